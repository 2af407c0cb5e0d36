//! Graph structures over the variables of a space.
//!
//! Covers BA-biased generation around a centered node set, connectivity,
//! global-node augmentation for the encoder, PageRank on the bidirected
//! graph, exhaustive enumeration of small connected graphs, and the Pearson
//! statistic used to relate node importance to graph performance.

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DAMPING: f64 = 0.85;
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;
pub const DEFAULT_BA_THRESHOLD: usize = 2;
pub const MAX_ENUMERATION_NODES: usize = 6;

/// Undirected graph with one node per variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GraphFile")]
pub struct MoldedGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    #[serde(default)]
    centered: Vec<usize>,
}

#[derive(Deserialize)]
struct GraphFile {
    n: usize,
    edges: Vec<(usize, usize)>,
    #[serde(default)]
    centered: Vec<usize>,
}

impl TryFrom<GraphFile> for MoldedGraph {
    type Error = Error;
    fn try_from(f: GraphFile) -> Result<Self> {
        MoldedGraph::new(f.n, f.edges, f.centered)
    }
}

impl MoldedGraph {
    /// Normalizes edges to `(min, max)` order, sorted. Self-loops, duplicates
    /// and out-of-range indices are rejected.
    pub fn new(n: usize, edges: Vec<(usize, usize)>, centered: Vec<usize>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no nodes".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop on node {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!("edge ({a},{b}) out of range")));
            }
            if !set.insert((a.min(b), a.max(b))) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({a},{b})")));
            }
        }
        let centered: BTreeSet<usize> = centered.into_iter().collect();
        if let Some(&node) = centered.iter().find(|&&v| v >= n) {
            return Err(Error::CenterOutOfRange { node, n });
        }
        Ok(Self {
            n,
            edges: set.into_iter().collect(),
            centered: centered.into_iter().collect(),
        })
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        Self::new(n, edges, Vec::new()).expect("complete graph is valid")
    }

    pub fn path(n: usize) -> Self {
        Self::new(n, (1..n).map(|i| (i - 1, i)).collect(), Vec::new()).expect("path is valid")
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn centered(&self) -> &[usize] {
        &self.centered
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    /// Applies `perm` (old index -> new index) to every node.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        Self::new(
            self.n,
            self.edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect(),
            self.centered.iter().map(|&v| perm[v]).collect(),
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serializes")
    }
}

/// Modified Barabási-Albert generator.
///
/// Starts from the complete graph on `centered`, then attaches every other
/// node in ascending index order with a single edge. The target is drawn
/// uniformly from a repeated-node list that initially holds each centered
/// node `max(threshold, degree)` times and grows by both endpoints of every
/// new edge.
pub fn ba_biased<R: Rng + ?Sized>(
    n: usize,
    centered: &[usize],
    threshold: usize,
    rng: &mut R,
) -> Result<MoldedGraph> {
    let center: BTreeSet<usize> = centered.iter().copied().collect();
    if center.is_empty() {
        return Err(Error::EmptyCenter);
    }
    if let Some(&node) = center.iter().find(|&&v| v >= n) {
        return Err(Error::CenterOutOfRange { node, n });
    }
    let core: Vec<usize> = center.iter().copied().collect();
    let mut edges = Vec::with_capacity(core.len() * core.len() / 2 + n);
    for (i, &a) in core.iter().enumerate() {
        for &b in &core[i + 1..] {
            edges.push((a, b));
        }
    }
    let core_degree = core.len() - 1;
    let mut repeated: Vec<usize> = core
        .iter()
        .flat_map(|&v| std::iter::repeat_n(v, threshold.max(core_degree)))
        .collect();
    for node in (0..n).filter(|v| !center.contains(v)) {
        let target = repeated[rng.random_range(0..repeated.len())];
        edges.push((node, target));
        repeated.push(target);
        repeated.push(node);
    }
    MoldedGraph::new(n, edges, core)
}

pub fn is_connected(g: &MoldedGraph) -> bool {
    let adj = g.neighbors();
    let mut seen = vec![false; g.n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                queue.push_back(w);
            }
        }
    }
    count == g.n
}

/// Directed adjacency of a molded graph plus a global readout node.
///
/// Node `n` is the global node: it has an incoming edge from every original
/// node and no outgoing edges. Original undirected edges appear in both
/// directions.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedAdjacency {
    /// `in_neighbors[v]` lists the sources of edges pointing at `v`.
    pub in_neighbors: Vec<Vec<usize>>,
}

impl AugmentedAdjacency {
    pub fn node_count(&self) -> usize {
        self.in_neighbors.len()
    }

    pub fn global_node(&self) -> usize {
        self.in_neighbors.len() - 1
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.in_neighbors[v].len()
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.in_neighbors.iter().filter(|srcs| srcs.contains(&v)).count()
    }

    pub fn edge_count(&self) -> usize {
        self.in_neighbors.iter().map(Vec::len).sum()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.in_neighbors[to].contains(&from)
    }

    /// Row-normalized propagation weights `D_in^{-1} (A + I)` as
    /// `(source, weight)` lists per target row.
    pub fn propagation_rows(&self) -> Vec<Vec<(usize, f64)>> {
        self.in_neighbors
            .iter()
            .enumerate()
            .map(|(v, srcs)| {
                let w = 1.0 / (srcs.len() + 1) as f64;
                std::iter::once((v, w))
                    .chain(srcs.iter().map(|&s| (s, w)))
                    .collect()
            })
            .collect()
    }
}

pub fn attach_global_node(g: &MoldedGraph) -> AugmentedAdjacency {
    let mut in_neighbors = g.neighbors();
    for list in &mut in_neighbors {
        list.sort_unstable();
    }
    in_neighbors.push((0..g.n).collect());
    AugmentedAdjacency { in_neighbors }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PageRankResult {
    pub scores: Vec<f64>,
    pub damping: f64,
    pub iterations: usize,
}

pub fn pagerank(g: &MoldedGraph, damping: f64, tol: f64) -> Result<PageRankResult> {
    pagerank_capped(g, damping, tol, DEFAULT_MAX_ITERATIONS)
}

/// Power iteration on the bidirected graph until the largest per-node change
/// drops below `tol`.
pub fn pagerank_capped(
    g: &MoldedGraph,
    damping: f64,
    tol: f64,
    max_iterations: usize,
) -> Result<PageRankResult> {
    if !(damping > 0.0 && damping < 1.0) || tol <= 0.0 {
        return Err(Error::DegenerateInput("damping must lie in (0,1), tol > 0"));
    }
    if !is_connected(g) {
        return Err(Error::NotConnected);
    }
    let n = g.n;
    if n == 1 {
        return Ok(PageRankResult {
            scores: vec![1.0],
            damping,
            iterations: 0,
        });
    }
    let adj = g.neighbors();
    let base = (1.0 - damping) / n as f64;
    let mut scores = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for it in 1..=max_iterations {
        for (v, out) in next.iter_mut().enumerate() {
            *out = base
                + damping
                    * adj[v]
                        .iter()
                        .map(|&u| scores[u] / adj[u].len() as f64)
                        .sum::<f64>();
        }
        let delta = scores
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut scores, &mut next);
        if delta < tol {
            let total: f64 = scores.iter().sum();
            scores.iter_mut().for_each(|s| *s /= total);
            return Ok(PageRankResult {
                scores,
                damping,
                iterations: it,
            });
        }
    }
    Err(Error::NoConvergence(max_iterations))
}

fn pair_list(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect()
}

/// Every labeled connected graph on `n` nodes, in increasing edge-mask order.
pub fn enumerate_connected_graphs(n: usize) -> Result<impl Iterator<Item = MoldedGraph>> {
    if n > MAX_ENUMERATION_NODES {
        return Err(Error::TooLarge {
            n,
            max: MAX_ENUMERATION_NODES,
        });
    }
    if n < 2 {
        return Err(Error::DegenerateInput("enumeration needs at least 2 nodes"));
    }
    let pairs = pair_list(n);
    let subsets = 1u64 << pairs.len();
    Ok((0..subsets).filter_map(move |mask| {
        let edges = pairs
            .iter()
            .enumerate()
            .filter(|(k, _)| mask >> k & 1 == 1)
            .map(|(_, &e)| e)
            .collect();
        let g = MoldedGraph::new(n, edges, Vec::new()).expect("enumerated edges are valid");
        is_connected(&g).then_some(g)
    }))
}

/// Sample Pearson correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::DegenerateInput("pearson needs two equal-length lists of length >= 2"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput("pearson input is constant"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}
