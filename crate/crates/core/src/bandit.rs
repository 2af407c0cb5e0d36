//! Nested EXP3 bandit for graph structure learning.
//!
//! The node agent has one arm per variable and proposes centered node sets.
//! The graph agent has one arm per candidate graph slot. Rewards earned by a
//! graph cascade to its centered nodes, importance-weighted by how likely
//! each node was to be centered in the selected graph this round.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphmold::{ba_biased, MoldedGraph};

pub const DEFAULT_GAMMA: f64 = 0.1;
pub const DEFAULT_FAILURE_THRESHOLD: usize = 5;
const MIN_GAMMA: f64 = 0.01;

/// Theoretically tuned EXP3 exploration rate for `arms` arms and a horizon
/// of `budget` rounds, or [`DEFAULT_GAMMA`] when the horizon is unknown.
pub fn default_gamma(arms: usize, budget: Option<usize>) -> f64 {
    match budget {
        Some(t) if t > 0 && arms > 1 => {
            let k = arms as f64;
            (k * k.ln() / ((std::f64::consts::E - 1.0) * t as f64))
                .sqrt()
                .clamp(MIN_GAMMA, 1.0)
        }
        _ => DEFAULT_GAMMA,
    }
}

/// EXP3 agent with weights kept in log space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp3Agent {
    log_weights: Vec<f64>,
    gamma: f64,
}

impl Exp3Agent {
    pub fn new(arms: usize, gamma: f64) -> Self {
        assert!(arms > 0, "an agent needs at least one arm");
        Self {
            log_weights: vec![0.0; arms],
            gamma,
        }
    }

    pub fn with_weights(weights: &[f64], gamma: f64) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::NonFiniteWeight);
        }
        Ok(Self {
            log_weights: weights.iter().map(|w| w.ln()).collect(),
            gamma,
        })
    }

    pub fn arms(&self) -> usize {
        self.log_weights.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    /// `p_i = (1 - γ) ω_i / Σω + γ / K`.
    pub fn probabilities(&self) -> Result<Vec<f64>> {
        if self.log_weights.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFiniteWeight);
        }
        let max = self
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let shifted: Vec<f64> = self.log_weights.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = shifted.iter().sum();
        let k = self.arms() as f64;
        Ok(shifted
            .iter()
            .map(|w| (1.0 - self.gamma) * w / total + self.gamma / k)
            .collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        Ok(sample_index(&self.probabilities()?, rng))
    }

    /// Multiplies arm `arm`'s weight by `exp(exponent)`.
    pub fn boost(&mut self, arm: usize, exponent: f64) {
        self.log_weights[arm] += exponent;
    }

    fn set_weight(&mut self, arm: usize, weight: f64) {
        self.log_weights[arm] = weight.ln();
    }

    /// Rescales all weights so they sum to `total`.
    fn normalize_to(&mut self, total: f64) {
        let max = self
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let log_sum = max
            + self
                .log_weights
                .iter()
                .map(|l| (l - max).exp())
                .sum::<f64>()
                .ln();
        let shift = total.ln() - log_sum;
        self.log_weights.iter_mut().for_each(|l| *l += shift);
    }
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Min-max normalization of `f_new` against the history including itself.
pub fn normalize_reward(history: &[f64], f_new: f64) -> f64 {
    let (lo, hi) = history
        .iter()
        .fold((f_new, f_new), |(lo, hi), &f| (lo.min(f), hi.max(f)));
    if hi > lo {
        (f_new - lo) / (hi - lo)
    } else {
        0.5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub graph: MoldedGraph,
    pub fail_count: usize,
}

impl Slot {
    pub fn centered(&self) -> &[usize] {
        self.graph.centered()
    }
}

/// Graph-agent probabilities captured when a slot was selected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub slot: usize,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRecord {
    pub raw_value: f64,
    pub reward: f64,
    pub slot: usize,
    pub centered: Vec<usize>,
}

/// Multipliers applied by one reward update, for tracing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardUpdate {
    pub graph_estimate: f64,
    pub graph_multiplier: f64,
    /// `(node, estimate, multiplier)` per centered node.
    pub nodes: Vec<(usize, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditConfig {
    pub slots: usize,
    pub draws: usize,
    pub gamma_node: f64,
    pub gamma_graph: f64,
    pub failure_threshold: usize,
    pub ba_threshold: usize,
}

impl BanditConfig {
    pub fn new(dim: usize, slots: usize, draws: usize, budget: Option<usize>) -> Self {
        Self {
            slots,
            draws,
            gamma_node: default_gamma(dim, budget),
            gamma_graph: default_gamma(slots, budget),
            failure_threshold: DEFAULT_FAILURE_THRESHOLD,
            ba_threshold: crate::graphmold::DEFAULT_BA_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedBanditState {
    pub node_agent: Exp3Agent,
    pub graph_agent: Exp3Agent,
    pub slots: Vec<Slot>,
    pub config: BanditConfig,
    pending: Option<Selection>,
    last_selected: Option<usize>,
}

impl NestedBanditState {
    /// Fresh agents with unit weights and `K` BA-biased graphs centered on
    /// node sets drawn from the node agent.
    pub fn new<R: Rng + ?Sized>(dim: usize, config: BanditConfig, rng: &mut R) -> Result<Self> {
        if config.slots == 0 || config.draws == 0 || dim == 0 {
            return Err(Error::InvalidRunConfig(
                "bandit needs K >= 1, c >= 1 and at least one node".into(),
            ));
        }
        if !(config.gamma_node > 0.0 && config.gamma_node <= 1.0)
            || !(config.gamma_graph > 0.0 && config.gamma_graph <= 1.0)
        {
            return Err(Error::InvalidRunConfig("gamma must lie in (0, 1]".into()));
        }
        let mut state = Self {
            node_agent: Exp3Agent::new(dim, config.gamma_node),
            graph_agent: Exp3Agent::new(config.slots, config.gamma_graph),
            slots: Vec::with_capacity(config.slots),
            config,
            pending: None,
            last_selected: None,
        };
        for _ in 0..state.config.slots {
            let graph = state.generate_graph(rng)?;
            state.slots.push(Slot {
                graph,
                fail_count: 0,
            });
        }
        Ok(state)
    }

    /// Builds a state around explicit slots, for resuming and for scripted
    /// scenarios.
    pub fn from_parts(
        node_agent: Exp3Agent,
        graph_agent: Exp3Agent,
        slots: Vec<Slot>,
        config: BanditConfig,
    ) -> Self {
        Self {
            node_agent,
            graph_agent,
            slots,
            config,
            pending: None,
            last_selected: None,
        }
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    pub fn pending(&self) -> Option<&Selection> {
        self.pending.as_ref()
    }

    /// Draws `c` arms i.i.d. from the node agent and returns the sorted,
    /// deduplicated set.
    pub fn sample_centered_nodes<R: Rng + ?Sized>(&self, c: usize, rng: &mut R) -> Result<Vec<usize>> {
        let probs = self.node_agent.probabilities()?;
        let mut nodes: Vec<usize> = (0..c.max(1)).map(|_| sample_index(&probs, rng)).collect();
        nodes.sort_unstable();
        nodes.dedup();
        Ok(nodes)
    }

    fn generate_graph<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<MoldedGraph> {
        let centered = self.sample_centered_nodes(self.config.draws, rng)?;
        ba_biased(
            self.node_agent.arms(),
            &centered,
            self.config.ba_threshold,
            rng,
        )
    }

    /// Samples a slot from the graph agent and stores the probability
    /// snapshot for the next reward update.
    pub fn select_graph<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(usize, Vec<f64>)> {
        let probs = self.graph_agent.probabilities()?;
        let slot = sample_index(&probs, rng);
        self.set_selection(Selection {
            slot,
            probabilities: probs.clone(),
        });
        Ok((slot, probs))
    }

    pub fn set_selection(&mut self, selection: Selection) {
        self.last_selected = Some(selection.slot);
        self.pending = Some(selection);
    }

    /// Applies the graph reward to the selected slot and cascades it to the
    /// slot's centered nodes.
    pub fn update_rewards(&mut self, record: &RewardRecord) -> Result<RewardUpdate> {
        if !(0.0..=1.0).contains(&record.reward) {
            return Err(Error::RewardOutOfRange(record.reward));
        }
        let snapshot = self.pending.take().ok_or(Error::MissingSnapshot)?;
        let k = self.slots.len() as f64;
        let slot = record.slot;
        let p_slot = snapshot.probabilities[slot];
        let graph_estimate = record.reward / p_slot;
        let graph_exponent = self.graph_agent.gamma() * graph_estimate / k;
        self.graph_agent.boost(slot, graph_exponent);

        let centered = self.slots[slot].centered().to_vec();
        let share = centered.len() as f64;
        let mut nodes = Vec::with_capacity(centered.len());
        for &v in &centered {
            let membership: f64 = self
                .slots
                .iter()
                .zip(&snapshot.probabilities)
                .filter(|(s, _)| s.centered().contains(&v))
                .map(|(_, p)| p)
                .sum();
            let node_estimate = graph_estimate / membership;
            let exponent = self.node_agent.gamma() * node_estimate / (share * k);
            self.node_agent.boost(v, exponent);
            nodes.push((v, node_estimate, exponent.exp()));
        }
        Ok(RewardUpdate {
            graph_estimate,
            graph_multiplier: graph_exponent.exp(),
            nodes,
        })
    }

    /// Updates the failure counter of the last selected slot and replaces
    /// every slot that reached the failure threshold with a fresh BA-biased
    /// graph.
    pub fn maybe_replace<R: Rng + ?Sized>(&mut self, improved: bool, rng: &mut R) -> Result<Vec<usize>> {
        self.maybe_replace_with(improved, rng, |state, rng| state.generate_graph(rng))
    }

    pub fn maybe_replace_with<R, F>(&mut self, improved: bool, rng: &mut R, mut generate: F) -> Result<Vec<usize>>
    where
        R: Rng + ?Sized,
        F: FnMut(&Self, &mut R) -> Result<MoldedGraph>,
    {
        let Some(selected) = self.last_selected else {
            return Err(Error::MissingSnapshot);
        };
        if improved {
            self.slots[selected].fail_count = 0;
        } else {
            self.slots[selected].fail_count += 1;
        }
        let due: Vec<usize> = (0..self.slots.len())
            .filter(|&j| self.slots[j].fail_count >= self.config.failure_threshold)
            .collect();
        for &j in &due {
            let graph = generate(self, rng)?;
            self.slots[j] = Slot {
                graph,
                fail_count: 0,
            };
            self.graph_agent.set_weight(j, 1.0);
        }
        if !due.is_empty() {
            self.graph_agent.normalize_to(self.slots.len() as f64);
        }
        Ok(due)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("bandit state serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn probability_examples() {
        let a = Exp3Agent::with_weights(&[1.0; 5], 0.1).unwrap();
        assert!(close(&a.probabilities().unwrap(), &[0.2; 5], 1e-15));
        let a = Exp3Agent::with_weights(&[2.0, 1.0, 1.0], 0.0).unwrap();
        assert!(close(&a.probabilities().unwrap(), &[0.5, 0.25, 0.25], 1e-15));
        let a = Exp3Agent::with_weights(&[3.0, 1.0], 0.2).unwrap();
        assert!(close(
            &a.probabilities().unwrap(),
            &[0.8 * 0.75 + 0.1, 0.8 * 0.25 + 0.1],
            1e-15
        ));
        assert!(matches!(
            Exp3Agent::with_weights(&[1.0, f64::NAN], 0.1),
            Err(Error::NonFiniteWeight)
        ));
        assert!(matches!(
            Exp3Agent::with_weights(&[1.0, 0.0], 0.1),
            Err(Error::NonFiniteWeight)
        ));
    }

    #[test]
    fn probabilities_survive_huge_weights() {
        let mut a = Exp3Agent::new(3, 0.1);
        a.boost(0, 5000.0);
        let p = a.probabilities().unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((p[0] - (0.9 + 0.1 / 3.0)).abs() < 1e-12);
    }

    fn state_with(slots: Vec<Vec<usize>>, dim: usize, gamma: f64) -> NestedBanditState {
        let k = slots.len();
        let slots = slots
            .into_iter()
            .map(|c| Slot {
                graph: ba_biased(dim, &c, 2, &mut ChaCha8Rng::seed_from_u64(0)).unwrap(),
                fail_count: 0,
            })
            .collect();
        let mut config = BanditConfig::new(dim, k, 3, None);
        config.gamma_node = gamma;
        config.gamma_graph = gamma;
        NestedBanditState::from_parts(
            Exp3Agent::new(dim, gamma),
            Exp3Agent::new(k, gamma),
            slots,
            config,
        )
    }

    #[test]
    fn centered_sampling_degenerate_and_bounds() {
        let mut s = state_with(vec![vec![0]], 10, 0.1);
        s.node_agent = Exp3Agent::with_weights(
            &[1e-300, 1e-300, 1e-300, 1.0, 1e-300, 1e-300, 1e-300, 1e-300, 1e-300, 1e-300],
            0.0,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for c in 1..6 {
            assert_eq!(s.sample_centered_nodes(c, &mut rng).unwrap(), vec![3]);
        }
        let s = state_with(vec![vec![0]], 10, 0.1);
        for _ in 0..200 {
            let v = s.sample_centered_nodes(3, &mut rng).unwrap();
            assert!((1..=3).contains(&v.len()));
        }
    }

    #[test]
    fn centered_sampling_birthday_rate() {
        let s = state_with(vec![vec![0]], 10, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let trials = 10_000;
        let distinct = (0..trials)
            .filter(|_| s.sample_centered_nodes(3, &mut rng).unwrap().len() == 3)
            .count();
        let oracle = 9.0 * 8.0 / 100.0;
        let freq = distinct as f64 / trials as f64;
        assert!((freq - oracle).abs() < 0.02, "{freq}");
    }

    #[test]
    fn select_graph_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = state_with(vec![vec![0]], 4, 0.1);
        for _ in 0..20 {
            let (i, p) = s.select_graph(&mut rng).unwrap();
            assert_eq!(i, 0);
            assert_eq!(p, vec![1.0]);
        }
        let mut s = state_with(vec![vec![0], vec![1], vec![2], vec![3], vec![0, 1]], 4, 0.1);
        let mut counts = [0usize; 5];
        for _ in 0..10_000 {
            counts[s.select_graph(&mut rng).unwrap().0] += 1;
        }
        for c in counts {
            assert!((c as f64 / 1e4 - 0.2).abs() < 0.02);
        }
        s.graph_agent = Exp3Agent::with_weights(&[100.0, 1.0, 1.0, 1.0, 1.0], 1.0).unwrap();
        let (_, p) = s.select_graph(&mut rng).unwrap();
        assert!(close(&p, &[0.2; 5], 1e-15));
    }

    #[test]
    fn zero_reward_changes_nothing() {
        let mut s = state_with(vec![vec![0, 1], vec![2]], 4, 0.1);
        let before = s.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (slot, _) = s.select_graph(&mut rng).unwrap();
        s.update_rewards(&RewardRecord {
            raw_value: 0.0,
            reward: 0.0,
            slot,
            centered: s.slots[slot].centered().to_vec(),
        })
        .unwrap();
        assert_eq!(s.node_agent, before.node_agent);
        assert_eq!(s.graph_agent, before.graph_agent);
    }

    #[test]
    fn hand_computed_cascade() {
        let mut s = state_with(vec![vec![0], vec![1], vec![2]], 4, 0.1);
        s.set_selection(Selection {
            slot: 0,
            probabilities: vec![0.5, 0.25, 0.25],
        });
        let up = s
            .update_rewards(&RewardRecord {
                raw_value: 1.0,
                reward: 0.5,
                slot: 0,
                centered: vec![0],
            })
            .unwrap();
        assert!((up.graph_estimate - 1.0).abs() < 1e-15);
        assert!((up.graph_multiplier - (0.1f64 / 3.0).exp()).abs() < 1e-12);
        assert_eq!(up.nodes.len(), 1);
        assert!((up.nodes[0].1 - 2.0).abs() < 1e-15);
        assert!((up.nodes[0].2 - (0.2f64 / 3.0).exp()).abs() < 1e-12);
        assert!((s.graph_agent.weights()[0] - (0.1f64 / 3.0).exp()).abs() < 1e-12);
        assert_eq!(s.graph_agent.weights()[1], 1.0);
        assert_eq!(s.node_agent.weights()[1], 1.0);
    }

    #[test]
    fn full_membership_passes_estimate_through() {
        let mut s = state_with(vec![vec![1], vec![1], vec![1]], 4, 0.1);
        s.set_selection(Selection {
            slot: 2,
            probabilities: vec![1.0 / 3.0; 3],
        });
        let up = s
            .update_rewards(&RewardRecord {
                raw_value: 0.0,
                reward: 0.7,
                slot: 2,
                centered: vec![1],
            })
            .unwrap();
        assert!((up.nodes[0].1 - up.graph_estimate).abs() < 1e-12);
    }

    #[test]
    fn update_errors() {
        let mut s = state_with(vec![vec![0]], 3, 0.1);
        let rec = RewardRecord {
            raw_value: 0.0,
            reward: 0.5,
            slot: 0,
            centered: vec![0],
        };
        assert!(matches!(s.update_rewards(&rec), Err(Error::MissingSnapshot)));
        s.select_graph(&mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let bad = RewardRecord { reward: 1.5, ..rec };
        assert!(matches!(s.update_rewards(&bad), Err(Error::RewardOutOfRange(_))));
    }

    #[test]
    fn normalize_reward_examples() {
        assert_eq!(normalize_reward(&[1.0, 3.0], 3.0), 1.0);
        assert_eq!(normalize_reward(&[1.0, 3.0], 2.0), 0.5);
        assert_eq!(normalize_reward(&[], -42.0), 0.5);
        assert_eq!(normalize_reward(&[1.0, 3.0], 0.0), 0.0);
    }

    #[test]
    fn replacement_policy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s = state_with(vec![vec![0], vec![1], vec![2]], 6, 0.1);
        s.config.failure_threshold = 2;
        s.set_selection(Selection {
            slot: 1,
            probabilities: vec![1.0 / 3.0; 3],
        });
        assert!(s.maybe_replace(true, &mut rng).unwrap().is_empty());
        assert_eq!(s.slots[1].fail_count, 0);
        assert!(s.maybe_replace(false, &mut rng).unwrap().is_empty());
        assert_eq!(s.slots[1].fail_count, 1);

        s.graph_agent = Exp3Agent::with_weights(&[4.0, 2.0, 3.0], 0.1).unwrap();
        let replaced = s.maybe_replace(false, &mut rng).unwrap();
        assert_eq!(replaced, vec![1]);
        assert_eq!(s.slots[1].fail_count, 0);
        let w = s.graph_agent.weights();
        assert!((w.iter().sum::<f64>() - 3.0).abs() < 1e-12);
        // Pre-normalization weights [4, 1, 3] sum to 8, so the new arm holds 3/8.
        assert!((w[1] - 3.0 / 8.0).abs() < 1e-12);
        assert!((w[0] - 12.0 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn replacement_selection_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut s = state_with(vec![vec![0], vec![1], vec![2], vec![3], vec![4]], 6, 0.1);
        s.config.failure_threshold = 1;
        s.set_selection(Selection {
            slot: 0,
            probabilities: vec![0.2; 5],
        });
        s.maybe_replace(false, &mut rng).unwrap();
        let p = s.graph_agent.probabilities().unwrap();
        assert!((p[0] - 0.2).abs() < 1e-12);

        s.graph_agent = Exp3Agent::with_weights(&[1.0, 5.0, 1.0, 2.0, 1.0], 0.1).unwrap();
        s.set_selection(Selection {
            slot: 2,
            probabilities: vec![0.2; 5],
        });
        s.maybe_replace(false, &mut rng).unwrap();
        let p = s.graph_agent.probabilities().unwrap();
        // weight share 1/10 pre-mix, so p = 0.9/10 + 0.1/5 = 0.11
        assert!((p[2] - 0.11).abs() < 1e-12);
        println!("non-uniform replacement: new-slot probability {:.4} (1/K = 0.2)", p[2]);
    }

    #[test]
    fn snapshot_round_trip() {
        let s = NestedBanditState::new(
            6,
            BanditConfig::new(6, 3, 3, Some(50)),
            &mut ChaCha8Rng::seed_from_u64(8),
        )
        .unwrap();
        let back: NestedBanditState = serde_json::from_str(&s.to_json()).unwrap();
        assert_eq!(back, s);
    }

    proptest::proptest! {
        #[test]
        fn scale_invariance(ws in proptest::collection::vec(0.01f64..100.0, 1..8), c in 0.001f64..1000.0) {
            let a = Exp3Agent::with_weights(&ws, 0.1).unwrap();
            let scaled: Vec<f64> = ws.iter().map(|w| w * c).collect();
            let b = Exp3Agent::with_weights(&scaled, 0.1).unwrap();
            let (pa, pb) = (a.probabilities().unwrap(), b.probabilities().unwrap());
            proptest::prop_assert!((pa.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (x, y) in pa.iter().zip(&pb) {
                proptest::prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn weights_stay_finite(rewards in proptest::collection::vec(0.0f64..=1.0, 1..200), seed in 0u64..100) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = NestedBanditState::new(5, BanditConfig::new(5, 3, 2, Some(200)), &mut rng).unwrap();
            for r in rewards {
                let (slot, _) = s.select_graph(&mut rng).unwrap();
                s.update_rewards(&RewardRecord { raw_value: r, reward: r, slot, centered: vec![] }).unwrap();
                s.maybe_replace(r > 0.9, &mut rng).unwrap();
            }
            for l in s.node_agent.log_weights().iter().chain(s.graph_agent.log_weights()) {
                proptest::prop_assert!(l.is_finite());
            }
            let p = s.graph_agent.probabilities().unwrap();
            proptest::prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
