//! Optimization loops, trace records and the exhaustive graph study.

use std::io::{BufRead, Write};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bandit::{normalize_reward, BanditConfig, NestedBanditState, RewardRecord, DEFAULT_FAILURE_THRESHOLD};
use crate::bench::Objective;
use crate::error::{Error, Result};
use crate::gpbo::{self, AcquisitionOptions, FitOptions, GpParams, DEFAULT_KAPPA};
use crate::graphmold::{
    attach_global_node, enumerate_connected_graphs, is_connected, pagerank, pearson, AugmentedAdjacency, MoldedGraph,
    DEFAULT_BA_THRESHOLD, DEFAULT_DAMPING, DEFAULT_TOLERANCE,
};
use crate::neural::{AdamConfig, ModelConfig, TrainBatch, Trainer, VgaeModel, WARMUP_EPOCHS};
use crate::space::{Configuration, MixedSpace};

pub const TRACE_FORMAT: &str = "moldbo-trace/1";
pub const MAX_EXHAUSTIVE_NODES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Gebo,
    PriorGraph,
    Exhaustive,
    RandomSearch,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gebo" => Ok(Mode::Gebo),
            "prior-graph" => Ok(Mode::PriorGraph),
            "exhaustive" => Ok(Mode::Exhaustive),
            "random-search" => Ok(Mode::RandomSearch),
            other => Err(Error::InvalidRunConfig(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub task: String,
    pub mode: Mode,
    pub budget: usize,
    pub seed: u64,
    pub slots: usize,
    pub centered: usize,
    pub initial_points: usize,
    pub latent_dim: usize,
    pub kappa: f64,
    pub gamma: Option<f64>,
    pub failure_threshold: usize,
    pub ba_threshold: usize,
    pub warmup_epochs: usize,
    pub retrain_epochs: usize,
    /// Full-batch optimizer steps per training epoch.
    pub steps_per_epoch: usize,
    pub kl_weight: f64,
    /// Feed value ranks instead of raw values to the metric loss.
    pub rank_metric: bool,
    pub learning_rate: f64,
    pub gp_restarts: usize,
    pub gp_max_evals: usize,
    /// Wall-clock limit in seconds for the search phase.
    pub time_limit: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            task: String::new(),
            mode: Mode::Gebo,
            budget: 100,
            seed: 0,
            slots: 5,
            centered: 3,
            initial_points: 40,
            latent_dim: 4,
            kappa: DEFAULT_KAPPA,
            gamma: None,
            failure_threshold: DEFAULT_FAILURE_THRESHOLD,
            ba_threshold: DEFAULT_BA_THRESHOLD,
            warmup_epochs: WARMUP_EPOCHS,
            retrain_epochs: 1,
            steps_per_epoch: 20,
            kl_weight: 0.1,
            rank_metric: true,
            learning_rate: crate::neural::train::DEFAULT_LEARNING_RATE,
            gp_restarts: 1,
            gp_max_evals: 20,
            time_limit: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidRunConfig(m.to_string()));
        if self.slots == 0 {
            return bad("K must be at least 1");
        }
        if self.centered == 0 {
            return bad("c must be at least 1");
        }
        if self.latent_dim == 0 {
            return bad("latent dimension must be at least 1");
        }
        if self.mode != Mode::RandomSearch && self.initial_points < 2 {
            return bad("at least 2 initial points are needed to fit the surrogate");
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g <= 1.0) {
                return bad("gamma must lie in (0, 1]");
            }
        }
        if !(self.kappa >= 0.0) || !(self.learning_rate >= 0.0) {
            return bad("kappa and learning rate must be non-negative");
        }
        Ok(())
    }

    fn bandit_config(&self, dim: usize) -> BanditConfig {
        let mut b = BanditConfig::new(dim, self.slots, self.centered, Some(self.budget.max(1)));
        if let Some(g) = self.gamma {
            b.gamma_node = g;
            b.gamma_graph = g;
        }
        b.failure_threshold = self.failure_threshold;
        b.ba_threshold = self.ba_threshold;
        b
    }
}

/// Seconds spent in each phase of one search iteration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timing {
    pub encode: f64,
    pub fit: f64,
    pub acquire: f64,
    pub decode: f64,
    pub train: f64,
    pub total: f64,
}

impl Timing {
    /// Time to produce a suggestion, excluding retraining.
    pub fn suggestion(&self) -> f64 {
        self.encode + self.fit + self.acquire + self.decode
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Initial,
    Search,
}

/// Graph-agent weights and slot descriptors after an iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditSnapshot {
    pub node_probabilities: Vec<f64>,
    pub graph_probabilities: Vec<f64>,
    pub centered: Vec<Vec<usize>>,
    pub fail_counts: Vec<usize>,
}

impl BanditSnapshot {
    fn capture(state: &NestedBanditState) -> Result<Self> {
        Ok(Self {
            node_probabilities: state.node_agent.probabilities()?,
            graph_probabilities: state.graph_agent.probabilities()?,
            centered: state.slots.iter().map(|s| s.centered().to_vec()).collect(),
            fail_counts: state.slots.iter().map(|s| s.fail_count).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    pub phase: Phase,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub slot: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub centered: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub latent: Option<Vec<f64>>,
    pub configuration: Vec<f64>,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reward: Option<f64>,
    pub incumbent: f64,
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub duplicate: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gp: Option<GpParams>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub replaced: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bandit: Option<BanditSnapshot>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timing: Option<Timing>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub config: RunConfig,
    pub space: MixedSpace,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub known_optimum: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub graph: Option<MoldedGraph>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum TraceLine {
    Header(TraceHeader),
    Iteration(IterationRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<IterationRecord>,
}

impl Trace {
    pub fn final_incumbent(&self) -> f64 {
        self.records.last().map_or(f64::NEG_INFINITY, |r| r.incumbent)
    }

    pub fn evaluations(&self) -> usize {
        self.records.len()
    }

    pub fn search_records(&self) -> impl Iterator<Item = &IterationRecord> {
        self.records.iter().filter(|r| r.phase == Phase::Search)
    }

    pub fn best(&self) -> Option<&IterationRecord> {
        self.records.iter().fold(None, |best: Option<&IterationRecord>, r| match best {
            Some(b) if b.value >= r.value => Some(b),
            _ => Some(r),
        })
    }

    /// One header line, then one line per evaluation. Timings are written
    /// only when asked for, which keeps traces byte-reproducible otherwise.
    pub fn write_jsonl<W: Write>(&self, mut w: W, timings: bool) -> Result<()> {
        serde_json::to_writer(&mut w, &TraceLine::Header(self.header.clone()))?;
        writeln!(w)?;
        for r in &self.records {
            let mut r = r.clone();
            if !timings {
                r.timing = None;
            }
            serde_json::to_writer(&mut w, &TraceLine::Iteration(r))?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self, timings: bool) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf, timings).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut header = None;
        let mut records = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(&line)? {
                TraceLine::Header(h) if header.is_none() => header = Some(h),
                TraceLine::Header(_) => {
                    return Err(Error::InvalidRunConfig(format!("second header on line {}", n + 1)))
                }
                TraceLine::Iteration(rec) => records.push(rec),
            }
        }
        let header = header.ok_or_else(|| Error::InvalidRunConfig("trace has no header".into()))?;
        Ok(Self { header, records })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub iterations: usize,
    pub mean: f64,
    pub p50: f64,
    pub p90: f64,
    pub max: f64,
    pub mean_suggestion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub task: String,
    pub mode: Mode,
    pub seed: u64,
    pub evaluations: usize,
    pub initial_points: usize,
    pub final_incumbent: f64,
    pub best_configuration: Vec<f64>,
    pub replacements: usize,
    pub duplicates: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub known_optimum: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_node_probabilities: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timing: Option<TimingSummary>,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

pub fn summarize(trace: &Trace) -> Summary {
    let mut totals: Vec<f64> = trace.search_records().filter_map(|r| r.timing.map(|t| t.total)).collect();
    let suggestion: Vec<f64> = trace.search_records().filter_map(|r| r.timing.map(|t| t.suggestion())).collect();
    totals.sort_by(f64::total_cmp);
    let timing = (!totals.is_empty()).then(|| TimingSummary {
        iterations: totals.len(),
        mean: totals.iter().sum::<f64>() / totals.len() as f64,
        p50: percentile(&totals, 0.5),
        p90: percentile(&totals, 0.9),
        max: *totals.last().expect("non-empty"),
        mean_suggestion: suggestion.iter().sum::<f64>() / suggestion.len() as f64,
    });
    Summary {
        task: trace.header.config.task.clone(),
        mode: trace.header.config.mode,
        seed: trace.header.config.seed,
        evaluations: trace.evaluations(),
        initial_points: trace.records.iter().filter(|r| r.phase == Phase::Initial).count(),
        final_incumbent: trace.final_incumbent(),
        best_configuration: trace.best().map(|r| r.configuration.clone()).unwrap_or_default(),
        replacements: trace.records.iter().map(|r| r.replaced.len()).sum(),
        duplicates: trace.records.iter().filter(|r| r.duplicate).count(),
        known_optimum: trace.header.known_optimum,
        final_node_probabilities: trace
            .records
            .iter()
            .rev()
            .find_map(|r| r.bandit.as_ref().map(|b| b.node_probabilities.clone())),
        timing,
    }
}

// RNG substreams; every mode draws its initial design from the same one.
const STREAM_DESIGN: u64 = 0;
const STREAM_MODEL: u64 = 1;
const STREAM_BANDIT: u64 = 2;
const STREAM_TRAIN: u64 = 3;
const STREAM_GP: u64 = 4;
const STREAM_ACQUIRE: u64 = 5;
const STREAM_REINIT: u64 = 6;
const STREAM_RANDOM: u64 = 7;

fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn flat(cfg: &Configuration) -> Vec<f64> {
    cfg.values.iter().map(|v| v.as_f64()).collect()
}

struct Recorder {
    records: Vec<IterationRecord>,
    configs: Vec<Configuration>,
    values: Vec<f64>,
    incumbent: f64,
}

impl Recorder {
    fn new() -> Self {
        Self {
            records: Vec::new(),
            configs: Vec::new(),
            values: Vec::new(),
            incumbent: f64::NEG_INFINITY,
        }
    }

    /// Evaluates `cfg` and appends a record; returns the value and whether
    /// it strictly beat the incumbent.
    fn evaluate(
        &mut self,
        objective: &mut dyn Objective,
        cfg: Configuration,
        mut record: IterationRecord,
    ) -> Result<(f64, bool)> {
        let value = objective.evaluate(&cfg)?;
        if !value.is_finite() {
            return Err(Error::InvalidConfiguration(format!("objective returned {value} for {cfg}")));
        }
        let improved = value > self.incumbent;
        if improved {
            self.incumbent = value;
        }
        record.duplicate = self.configs.contains(&cfg);
        record.configuration = flat(&cfg);
        record.value = value;
        record.incumbent = self.incumbent;
        self.records.push(record);
        self.configs.push(cfg);
        self.values.push(value);
        Ok((value, improved))
    }
}

fn blank(t: usize, phase: Phase) -> IterationRecord {
    IterationRecord {
        t,
        phase,
        slot: None,
        centered: None,
        latent: None,
        configuration: Vec::new(),
        value: 0.0,
        reward: None,
        incumbent: 0.0,
        duplicate: false,
        gp: None,
        replaced: Vec::new(),
        bandit: None,
        timing: None,
    }
}

fn initial_design(cfg: &RunConfig, objective: &mut dyn Objective, rec: &mut Recorder) -> Result<()> {
    let mut rng = substream(cfg.seed, STREAM_DESIGN);
    let space = objective.space().clone();
    for _ in 0..cfg.initial_points {
        let x = space.sample_uniform(&mut rng);
        rec.evaluate(objective, x, blank(0, Phase::Initial))?;
    }
    Ok(())
}

fn header(cfg: &RunConfig, objective: &dyn Objective, graph: Option<MoldedGraph>) -> TraceHeader {
    TraceHeader {
        format: TRACE_FORMAT.to_string(),
        config: cfg.clone(),
        space: objective.space().clone(),
        known_optimum: objective.known_optimum(),
        graph,
    }
}

fn out_of_time(cfg: &RunConfig, started: Instant) -> bool {
    cfg.time_limit.is_some_and(|limit| started.elapsed().as_secs_f64() > limit)
}

/// Model, optimizer and per-slot surrogate state shared by the latent-space
/// loops.
struct LatentSearch {
    trainer: Trainer,
    previous: Vec<Option<GpParams>>,
    train_rng: ChaCha8Rng,
    gp_rng: ChaCha8Rng,
    acquire_rng: ChaCha8Rng,
    reinit_rng: ChaCha8Rng,
    fit: FitOptions,
    kappa: f64,
    steps: usize,
    rank_metric: bool,
}

struct Suggestion {
    cfg: Configuration,
    latent: Vec<f64>,
    gp: GpParams,
    timing: Timing,
}

impl LatentSearch {
    fn new(cfg: &RunConfig, space: &MixedSpace, slots: usize) -> Self {
        let mut model_rng = substream(cfg.seed, STREAM_MODEL);
        let model_cfg = ModelConfig {
            latent_dim: cfg.latent_dim,
            ..ModelConfig::default()
        };
        let model = VgaeModel::new(space, slots, model_cfg, &mut model_rng);
        let adam = AdamConfig {
            lr: cfg.learning_rate,
            ..AdamConfig::default()
        };
        let mut trainer = Trainer::new(model, adam);
        trainer.weights.kl = cfg.kl_weight;
        Self {
            trainer,
            previous: vec![None; slots],
            train_rng: substream(cfg.seed, STREAM_TRAIN),
            gp_rng: substream(cfg.seed, STREAM_GP),
            acquire_rng: substream(cfg.seed, STREAM_ACQUIRE),
            reinit_rng: substream(cfg.seed, STREAM_REINIT),
            fit: FitOptions {
                restarts: cfg.gp_restarts,
                max_evals: cfg.gp_max_evals,
            },
            kappa: cfg.kappa,
            steps: cfg.steps_per_epoch.max(1),
            rank_metric: cfg.rank_metric,
        }
    }

    fn suggest(&mut self, slot: usize, adj: &AugmentedAdjacency, rec: &Recorder) -> Result<Suggestion> {
        let mut timing = Timing::default();
        let clock = Instant::now();
        let (mu, _) = self.trainer.model.encode(&rec.configs, adj, slot)?;
        let z: Vec<Vec<f64>> = (0..mu.rows).map(|r| mu.row(r).to_vec()).collect();
        timing.encode = clock.elapsed().as_secs_f64();

        let clock = Instant::now();
        let targets = rank_scores(&rec.values);
        let state = gpbo::fit(&z, &targets, self.previous[slot], self.fit, &mut self.gp_rng)?;
        self.previous[slot] = Some(state.params());
        timing.fit = clock.elapsed().as_secs_f64();

        let clock = Instant::now();
        let bx = gpbo::latent_box(&z)?;
        let latent = gpbo::optimize_acquisition(&state, &bx, self.kappa, AcquisitionOptions::default(), &mut self.acquire_rng);
        timing.acquire = clock.elapsed().as_secs_f64();

        let clock = Instant::now();
        let (cfg, _) = self.trainer.model.decode(&latent);
        timing.decode = clock.elapsed().as_secs_f64();
        Ok(Suggestion {
            cfg,
            latent,
            gp: state.params(),
            timing,
        })
    }

    // rank weights depend only on the ordering, so rank scores leave them unchanged
    fn batch(&self, rec: &Recorder) -> Result<TrainBatch> {
        let values = if self.rank_metric { rank_scores(&rec.values) } else { rec.values.clone() };
        TrainBatch::new(rec.configs.clone(), values)
    }

    fn retrain(&mut self, slot: usize, adj: &AugmentedAdjacency, rec: &Recorder, epochs: usize) -> Result<f64> {
        let clock = Instant::now();
        let batch = self.batch(rec)?;
        self.trainer.train(slot, adj, &batch, epochs * self.steps, &mut self.train_rng)?;
        Ok(clock.elapsed().as_secs_f64())
    }

    fn warm_up(&mut self, adjs: &[AugmentedAdjacency], rec: &Recorder, epochs: usize) -> Result<()> {
        let batch = self.batch(rec)?;
        self.trainer.warm_up(adjs, &batch, epochs * self.steps, &mut self.train_rng)?;
        Ok(())
    }

    fn replace_slot(&mut self, slot: usize, adj: &AugmentedAdjacency, rec: &Recorder, epochs: usize) -> Result<()> {
        self.trainer.reset_slot(slot, &mut self.reinit_rng)?;
        self.previous[slot] = None;
        // a fresh encoder gets its own warm-up on everything seen so far
        self.retrain(slot, adj, rec, epochs)?;
        Ok(())
    }
}

/// Mid-ranks scaled into (0, 1); ties share their average rank.
pub fn rank_scores(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0;
        for &k in &order[i..=j] {
            out[k] = (r + 0.5) / n as f64;
        }
        i = j + 1;
    }
    out
}

/// Latent-space optimization through one fixed graph.
pub fn run_prior_graph(cfg: &RunConfig, objective: &mut dyn Objective, graph: &MoldedGraph) -> Result<Trace> {
    cfg.validate()?;
    let space = objective.space().clone();
    if graph.node_count() != space.dim() {
        return Err(Error::InvalidGraph(format!(
            "graph has {} nodes but the space has {} variables",
            graph.node_count(),
            space.dim()
        )));
    }
    if !is_connected(graph) {
        return Err(Error::NotConnected);
    }
    let mut rec = Recorder::new();
    initial_design(cfg, objective, &mut rec)?;
    let adj = attach_global_node(graph);
    let mut search = LatentSearch::new(cfg, &space, 1);
    search.warm_up(std::slice::from_ref(&adj), &rec, cfg.warmup_epochs)?;
    let started = Instant::now();
    for t in 1..=cfg.budget {
        if out_of_time(cfg, started) {
            break;
        }
        let clock = Instant::now();
        let s = search.suggest(0, &adj, &rec)?;
        let mut record = blank(t, Phase::Search);
        record.slot = Some(0);
        record.latent = Some(s.latent);
        record.gp = Some(s.gp);
        let eval_clock = Instant::now();
        rec.evaluate(objective, s.cfg, record)?;
        let eval_time = eval_clock.elapsed().as_secs_f64();
        let mut timing = s.timing;
        timing.train = search.retrain(0, &adj, &rec, cfg.retrain_epochs)?;
        timing.total = clock.elapsed().as_secs_f64() - eval_time;
        rec.records.last_mut().expect("just pushed").timing = Some(timing);
    }
    Ok(Trace {
        header: header(cfg, objective, Some(graph.clone())),
        records: rec.records,
    })
}

/// Full loop: the nested bandit picks a candidate graph each iteration and
/// is rewarded with the normalized value of the resulting evaluation.
pub fn run_gebo(cfg: &RunConfig, objective: &mut dyn Objective) -> Result<Trace> {
    cfg.validate()?;
    let space = objective.space().clone();
    let dim = space.dim();
    let mut rec = Recorder::new();
    initial_design(cfg, objective, &mut rec)?;
    let mut bandit_rng = substream(cfg.seed, STREAM_BANDIT);
    let mut bandit = NestedBanditState::new(dim, cfg.bandit_config(dim), &mut bandit_rng)?;
    let mut adjs: Vec<AugmentedAdjacency> = bandit.slots.iter().map(|s| attach_global_node(&s.graph)).collect();
    let mut search = LatentSearch::new(cfg, &space, cfg.slots);
    search.warm_up(&adjs, &rec, cfg.warmup_epochs)?;
    let started = Instant::now();
    for t in 1..=cfg.budget {
        if out_of_time(cfg, started) {
            break;
        }
        let clock = Instant::now();
        let (slot, _) = bandit.select_graph(&mut bandit_rng)?;
        // the shared decoder moves while other slots train, so realign this
        // encoder with it before encoding
        let train = search.retrain(slot, &adjs[slot], &rec, cfg.retrain_epochs)?;
        let s = search.suggest(slot, &adjs[slot], &rec)?;
        let centered = bandit.slots[slot].centered().to_vec();
        let mut record = blank(t, Phase::Search);
        record.slot = Some(slot);
        record.centered = Some(centered.clone());
        record.latent = Some(s.latent);
        record.gp = Some(s.gp);
        let history = rec.values.clone();
        let eval_clock = Instant::now();
        let (value, improved) = rec.evaluate(objective, s.cfg, record)?;
        let eval_time = eval_clock.elapsed().as_secs_f64();

        let reward = normalize_reward(&history, value);
        bandit.update_rewards(&RewardRecord {
            raw_value: value,
            reward,
            slot,
            centered,
        })?;
        let mut timing = s.timing;
        timing.train = train;
        let replaced = bandit.maybe_replace(improved, &mut bandit_rng)?;
        for &j in &replaced {
            adjs[j] = attach_global_node(&bandit.slots[j].graph);
            let train_clock = Instant::now();
            search.replace_slot(j, &adjs[j], &rec, cfg.warmup_epochs)?;
            timing.train += train_clock.elapsed().as_secs_f64();
        }
        timing.total = clock.elapsed().as_secs_f64() - eval_time;
        let last = rec.records.last_mut().expect("just pushed");
        last.reward = Some(reward);
        last.replaced = replaced;
        last.bandit = Some(BanditSnapshot::capture(&bandit)?);
        last.timing = Some(timing);
    }
    Ok(Trace {
        header: header(cfg, objective, None),
        records: rec.records,
    })
}

/// Uniform sampling baseline.
pub fn run_random_search(cfg: &RunConfig, objective: &mut dyn Objective) -> Result<Trace> {
    cfg.validate()?;
    let space = objective.space().clone();
    let mut rec = Recorder::new();
    initial_design(cfg, objective, &mut rec)?;
    let mut rng = substream(cfg.seed, STREAM_RANDOM);
    let started = Instant::now();
    for t in 1..=cfg.budget {
        if out_of_time(cfg, started) {
            break;
        }
        let x = space.sample_uniform(&mut rng);
        rec.evaluate(objective, x, blank(t, Phase::Search))?;
    }
    Ok(Trace {
        header: header(cfg, objective, None),
        records: rec.records,
    })
}

/// Dispatches on `cfg.mode`; prior-graph mode uses `graph` or, when absent,
/// the complete graph.
pub fn run(cfg: &RunConfig, objective: &mut dyn Objective, graph: Option<&MoldedGraph>) -> Result<Trace> {
    match cfg.mode {
        Mode::Gebo => run_gebo(cfg, objective),
        Mode::RandomSearch => run_random_search(cfg, objective),
        Mode::PriorGraph => {
            let complete = MoldedGraph::complete(objective.space().dim());
            run_prior_graph(cfg, objective, graph.unwrap_or(&complete))
        }
        Mode::Exhaustive => Err(Error::InvalidRunConfig(
            "exhaustive mode produces a table, use run_exhaustive".into(),
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRow {
    pub index: usize,
    pub graph: MoldedGraph,
    pub pagerank: Vec<f64>,
    pub finals: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

/// Per-graph performance over every connected graph on the task's
/// variables, with per-node correlation between PageRank and mean result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustiveTable {
    pub rows: Vec<GraphRow>,
    /// One entry per node; NaN when a node's PageRank is constant.
    pub pearson: Vec<f64>,
}

impl ExhaustiveTable {
    pub fn from_rows(rows: Vec<GraphRow>) -> Self {
        let dim = rows.first().map_or(0, |r| r.pagerank.len());
        let means: Vec<f64> = rows.iter().map(|r| r.mean).collect();
        let pearson = (0..dim)
            .map(|v| {
                let pr: Vec<f64> = rows.iter().map(|r| r.pagerank[v]).collect();
                pearson(&pr, &means).unwrap_or(f64::NAN)
            })
            .collect();
        Self { rows, pearson }
    }

    /// Rows `graph,edges,mean,std,pr_0..` followed by one `pearson` row that
    /// fills the PageRank columns with the per-node correlations.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let dim = self.pearson.len();
        let pr_cols: Vec<String> = (0..dim).map(|v| format!("pr_{v}")).collect();
        writeln!(w, "graph,edges,mean,std,{}", pr_cols.join(","))?;
        for r in &self.rows {
            let edges: Vec<String> = r.graph.edges().iter().map(|(a, b)| format!("{a}-{b}")).collect();
            let pr: Vec<String> = r.pagerank.iter().map(|p| p.to_string()).collect();
            writeln!(w, "{},{},{},{},{}", r.index, edges.join(" "), r.mean, r.std, pr.join(","))?;
        }
        let pc: Vec<String> = self.pearson.iter().map(|p| p.to_string()).collect();
        writeln!(w, "pearson,,,,{}", pc.join(","))?;
        Ok(())
    }
}

/// Runs the fixed-graph loop for every connected graph over `repeats`
/// seeds (`cfg.seed`, `cfg.seed + 1`, ...).
pub fn run_exhaustive(cfg: &RunConfig, objective: &mut dyn Objective, repeats: usize) -> Result<ExhaustiveTable> {
    let dim = objective.space().dim();
    if dim > MAX_EXHAUSTIVE_NODES {
        return Err(Error::TooLarge {
            n: dim,
            max: MAX_EXHAUSTIVE_NODES,
        });
    }
    if repeats == 0 {
        return Err(Error::InvalidRunConfig("at least one repeat is needed".into()));
    }
    let mut rows = Vec::new();
    for (index, graph) in enumerate_connected_graphs(dim)?.enumerate() {
        let pr = pagerank(&graph, DEFAULT_DAMPING, DEFAULT_TOLERANCE)?;
        let mut finals = Vec::with_capacity(repeats);
        for r in 0..repeats {
            let run_cfg = RunConfig {
                seed: cfg.seed.wrapping_add(r as u64),
                mode: Mode::PriorGraph,
                ..cfg.clone()
            };
            finals.push(run_prior_graph(&run_cfg, objective, &graph)?.final_incumbent());
        }
        let mean = finals.iter().sum::<f64>() / repeats as f64;
        let std = (finals.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / repeats as f64).sqrt();
        log::info!("graph {index}: mean {mean:.4} std {std:.4}");
        rows.push(GraphRow {
            index,
            graph,
            pagerank: pr.scores,
            finals,
            mean,
            std,
        });
    }
    Ok(ExhaustiveTable::from_rows(rows))
}
