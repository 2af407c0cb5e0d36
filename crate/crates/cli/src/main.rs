use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use moldbo::bench::{ExternalObjective, Objective, Task, TASK_IDS};
use moldbo::engine::{self, Mode, RunConfig, Trace};
use moldbo::graphmold::{enumerate_connected_graphs, MoldedGraph};
use moldbo::space::MixedSpace;

#[derive(Parser)]
#[command(name = "moldbo", version, about = "Mixed-space optimization through learned variable graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one optimization and write a JSONL trace.
    Optimize(OptimizeArgs),
    /// Evaluate every connected graph of a small task and write a CSV table.
    Exhaustive(ExhaustiveArgs),
    /// Summarize a trace.
    Analyze {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print every connected graph on `n` nodes, one JSON object per line.
    Enumerate {
        #[arg(long)]
        nodes: usize,
    },
    /// List built-in task ids.
    Tasks,
}

#[derive(Args, Clone)]
struct SearchArgs {
    /// Built-in task id, or `ext:<command>` for an external objective.
    #[arg(long)]
    task: String,
    /// Space file for external objectives.
    #[arg(long)]
    space: Option<PathBuf>,
    /// Negate values returned by an external objective.
    #[arg(long)]
    minimize: bool,
    /// Per-evaluation timeout in seconds for external objectives.
    #[arg(long, default_value_t = 60.0)]
    eval_timeout: f64,
    #[arg(long, default_value_t = 100)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 40)]
    initial: usize,
    #[arg(long = "slots", short = 'k', default_value_t = 5)]
    slots: usize,
    #[arg(long = "centered", short = 'c', default_value_t = 3)]
    centered: usize,
    #[arg(long, default_value_t = 4)]
    latent_dim: usize,
    #[arg(long, default_value_t = 2.0)]
    kappa: f64,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 5)]
    failure_threshold: usize,
    #[arg(long, default_value_t = 2)]
    ba_threshold: usize,
    #[arg(long, default_value_t = 5)]
    warmup_epochs: usize,
    #[arg(long, default_value_t = 1)]
    retrain_epochs: usize,
    /// Full-batch optimizer steps per training epoch.
    #[arg(long, default_value_t = 20)]
    steps_per_epoch: usize,
    #[arg(long, default_value_t = 0.1)]
    kl_weight: f64,
    /// Metric loss on raw values instead of value ranks.
    #[arg(long)]
    raw_metric: bool,
    /// Stop the search phase after this many seconds.
    #[arg(long)]
    time_limit: Option<f64>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    search: SearchArgs,
    /// gebo, prior-graph or random-search.
    #[arg(long, default_value = "gebo")]
    mode: Mode,
    /// Fixed graph for prior-graph mode (defaults to the complete graph).
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Leave per-iteration timings out of the trace.
    #[arg(long)]
    no_timings: bool,
}

#[derive(Args)]
struct ExhaustiveArgs {
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long)]
    out: PathBuf,
}

fn run_config(a: &SearchArgs, mode: Mode) -> RunConfig {
    RunConfig {
        task: a.task.clone(),
        mode,
        budget: a.budget,
        seed: a.seed,
        slots: a.slots,
        centered: a.centered,
        initial_points: a.initial,
        latent_dim: a.latent_dim,
        kappa: a.kappa,
        gamma: a.gamma,
        failure_threshold: a.failure_threshold,
        ba_threshold: a.ba_threshold,
        warmup_epochs: a.warmup_epochs,
        retrain_epochs: a.retrain_epochs,
        steps_per_epoch: a.steps_per_epoch,
        kl_weight: a.kl_weight,
        rank_metric: !a.raw_metric,
        time_limit: a.time_limit,
        ..RunConfig::default()
    }
}

fn objective(a: &SearchArgs) -> Result<Box<dyn Objective>> {
    if let Some(command) = a.task.strip_prefix("ext:") {
        let path = a.space.as_ref().context("external objectives need --space")?;
        let space = MixedSpace::load(path).with_context(|| format!("reading {}", path.display()))?;
        let timeout = Duration::from_secs_f64(a.eval_timeout);
        return Ok(Box::new(ExternalObjective::spawn(command, space, timeout, a.minimize)?));
    }
    Ok(Box::new(Task::by_id(&a.task)?))
}

fn create(path: &PathBuf) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Optimize(args) => {
            if args.mode == Mode::Exhaustive {
                bail!("use the exhaustive subcommand for the graph study");
            }
            let cfg = run_config(&args.search, args.mode);
            let graph = match &args.graph {
                Some(p) => Some(serde_json::from_reader::<_, MoldedGraph>(BufReader::new(File::open(p)?))?),
                None => None,
            };
            let mut obj = objective(&args.search)?;
            let trace = engine::run(&cfg, obj.as_mut(), graph.as_ref())?;
            let mut w = create(&args.out)?;
            trace.write_jsonl(&mut w, !args.no_timings)?;
            w.flush()?;
            log::info!(
                "{} evaluations, best {:.6}",
                trace.evaluations(),
                trace.final_incumbent()
            );
        }
        Command::Exhaustive(args) => {
            let cfg = run_config(&args.search, Mode::Exhaustive);
            let mut obj = objective(&args.search)?;
            let table = engine::run_exhaustive(&cfg, obj.as_mut(), args.repeats)?;
            let mut w = create(&args.out)?;
            table.write_csv(&mut w)?;
            w.flush()?;
            log::info!("{} graphs, pearson per node {:?}", table.rows.len(), table.pearson);
        }
        Command::Analyze { trace, report } => {
            let file = File::open(&trace).with_context(|| format!("opening {}", trace.display()))?;
            let trace = Trace::read_jsonl(BufReader::new(file))?;
            let summary = engine::summarize(&trace);
            let text = serde_json::to_string_pretty(&summary)?;
            match report {
                Some(path) => {
                    let mut w = create(&path)?;
                    writeln!(w, "{text}")?;
                }
                None => println!("{text}"),
            }
        }
        Command::Enumerate { nodes } => {
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            for g in enumerate_connected_graphs(nodes)? {
                match writeln!(out, "{}", g.to_json()) {
                    Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => break,
                    r => r?,
                }
            }
        }
        Command::Tasks => {
            for id in TASK_IDS {
                let t = Task::by_id(id)?;
                println!("{id}\t{} variables\t{}", t.space().dim(), t.description);
            }
        }
    }
    Ok(())
}
