//! Multiple random walks carrying model payloads over a graph, with
//! return-time tracking at every node, an active-walk estimator, a
//! replication rule and failure injection.

use crate::error::{invalid, Error, Result};
use crate::graph::Graph;
use crate::rng::{stream, Rng};
use crate::series::Series;
use crate::stats::{mean, std_dev};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};

pub const PAYLOAD_DIM: usize = 4;

/// Return-time samples and last-visit times observed at one node.
#[derive(Debug, Clone, Default)]
pub struct NodeTracker {
    last_seen: BTreeMap<u64, u64>,
    fifo: VecDeque<u64>,
    sorted: Vec<u64>,
    capacity: usize,
}

impl NodeTracker {
    pub fn new(capacity: usize) -> Self {
        NodeTracker { capacity: capacity.max(1), ..Default::default() }
    }

    pub fn sample_count(&self) -> usize {
        self.sorted.len()
    }

    pub fn last_seen(&self, walk: u64) -> Option<u64> {
        self.last_seen.get(&walk).copied()
    }

    pub fn add_sample(&mut self, r: u64) {
        if self.fifo.len() == self.capacity {
            let old = self.fifo.pop_front().expect("non-empty at capacity");
            let pos = self.sorted.partition_point(|&s| s < old);
            self.sorted.remove(pos);
        }
        self.fifo.push_back(r);
        let pos = self.sorted.partition_point(|&s| s <= r);
        self.sorted.insert(pos, r);
    }

    /// Registers walk `walk` at time `t`, recording a return time when the
    /// walk has been here before.
    pub fn visit(&mut self, walk: u64, t: u64) {
        if let Some(prev) = self.last_seen.insert(walk, t) {
            self.add_sample(t - prev);
        }
    }

    /// Marks a walk as seen without producing a return sample.
    pub fn register(&mut self, walk: u64, t: u64) {
        self.last_seen.insert(walk, t);
    }

    /// Empirical CDF of the return time.
    pub fn cdf(&self, x: u64) -> Result<f64> {
        if self.sorted.is_empty() {
            return Err(Error::InsufficientData("no return-time samples at this node".into()));
        }
        Ok(self.sorted.partition_point(|&s| s <= x) as f64 / self.sorted.len() as f64)
    }

    /// `1 − F̂(elapsed)`: estimated chance a walk last seen `elapsed` steps
    /// ago has not come back yet.
    pub fn survival(&self, elapsed: u64) -> Result<f64> {
        Ok(1.0 - self.cdf(elapsed)?)
    }

    /// `1/2 + Σ_{l≠k} survival(t − L_l)` over every other walk seen here.
    pub fn estimate_active(&self, t: u64, exclude: u64) -> Result<f64> {
        let mut beta = 0.5;
        for (&walk, &seen) in &self.last_seen {
            if walk != exclude {
                beta += self.survival(t.saturating_sub(seen))?;
            }
        }
        if self.sorted.is_empty() {
            return Err(Error::InsufficientData("no return-time samples at this node".into()));
        }
        Ok(beta)
    }
}

/// Replicates with probability `1/n_f` when `beta < epsilon`.
pub fn maybe_replicate(beta: f64, epsilon: f64, n_f: usize, rng: &mut Rng) -> bool {
    beta < epsilon && rng.random::<f64>() < 1.0 / n_f as f64
}

/// `10·log10(n)` for `n ≥ 1`, else 0.
pub fn resilience_value(active_walks: usize) -> f64 {
    if active_walks == 0 {
        0.0
    } else {
        10.0 * (active_walks as f64).log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Link,
    Node,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureTarget {
    /// Uniformly random fraction of the surviving links or nodes.
    Fraction(f64),
    /// Explicit node ids (node failures) or `[u, v]` pairs (link failures).
    Nodes(Vec<usize>),
    Links(Vec<(usize, usize)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureEvent {
    pub step: u64,
    pub kind: FailureKind,
    pub target: FailureTarget,
}

impl FailureEvent {
    pub fn validate(&self) -> Result<()> {
        match (&self.kind, &self.target) {
            (_, FailureTarget::Fraction(f)) if !(0.0..=1.0).contains(f) => {
                Err(invalid(format!("failure fraction {f} outside [0, 1]")))
            }
            (FailureKind::Link, FailureTarget::Nodes(_)) | (FailureKind::Node, FailureTarget::Links(_)) => {
                Err(invalid("failure target does not match its kind"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub id: u64,
    pub node: usize,
    /// Node the token arrived from on its last hop.
    pub from: Option<usize>,
    pub payload: [f64; PAYLOAD_DIM],
}

#[derive(Debug, Clone)]
pub struct WalkSystem {
    pub graph: Graph,
    pub alive: Vec<bool>,
    pub tokens: Vec<Token>,
    pub trackers: Vec<NodeTracker>,
    /// Minimiser of each node's local quadratic.
    pub targets: Vec<[f64; PAYLOAD_DIM]>,
    pub epsilon: f64,
    pub n_f: usize,
    pub warmup: u64,
    pub learning_rate: f64,
    pub t: u64,
    next_id: u64,
    /// Sum and count of `2β̂` over every estimate taken.
    pub estimate_sum: f64,
    pub estimate_count: u64,
}

impl WalkSystem {
    /// `n_f` walks started at uniformly random nodes.
    pub fn new(graph: Graph, epsilon: f64, n_f: usize, warmup: u64, rng: &mut Rng) -> Result<Self> {
        let n = graph.node_count();
        if n == 0 || n_f == 0 {
            return Err(invalid("need at least one node and one walk"));
        }
        let targets = (0..n).map(|_| std::array::from_fn(|_| StandardNormal.sample(rng))).collect();
        let tokens = (0..n_f as u64)
            .map(|id| Token { id, node: rng.random_range(0..n), from: None, payload: [0.0; PAYLOAD_DIM] })
            .collect();
        Ok(WalkSystem {
            graph,
            alive: vec![true; n],
            tokens,
            trackers: vec![NodeTracker::new(10_000); n],
            targets,
            epsilon,
            n_f,
            warmup,
            learning_rate: 0.1,
            t: 0,
            next_id: n_f as u64,
            estimate_sum: 0.0,
            estimate_count: 0,
        })
    }

    pub fn active(&self) -> usize {
        self.tokens.len()
    }

    /// Removes links or nodes. Tokens at a failed node, or that last
    /// travelled over a failed link, are lost.
    pub fn apply_failure(&mut self, event: &FailureEvent, rng: &mut Rng) -> Result<()> {
        event.validate()?;
        match event.kind {
            FailureKind::Link => {
                let links = match &event.target {
                    FailureTarget::Fraction(f) => {
                        let mut edges = self.graph.edges();
                        let k = (f * edges.len() as f64).round() as usize;
                        edges.shuffle(rng);
                        edges.truncate(k);
                        edges
                    }
                    FailureTarget::Links(l) => l.clone(),
                    FailureTarget::Nodes(_) => unreachable!("validated"),
                };
                for &(u, v) in &links {
                    self.graph.remove_edge(u, v);
                }
                self.tokens.retain(|tok| tok.from.is_none_or(|f| f == tok.node || self.graph.has_edge(f, tok.node)));
            }
            FailureKind::Node => {
                let nodes = match &event.target {
                    FailureTarget::Fraction(f) => {
                        let mut live: Vec<usize> = (0..self.alive.len()).filter(|&u| self.alive[u]).collect();
                        let k = (f * live.len() as f64).round() as usize;
                        live.shuffle(rng);
                        live.truncate(k);
                        live
                    }
                    FailureTarget::Nodes(ns) => ns.clone(),
                    FailureTarget::Links(_) => unreachable!("validated"),
                };
                for &u in &nodes {
                    if u >= self.alive.len() {
                        return Err(invalid(format!("node {u} out of range")));
                    }
                    self.graph.isolate(u);
                    self.alive[u] = false;
                }
                self.tokens.retain(|tok| self.alive[tok.node]);
            }
        }
        Ok(())
    }

    /// One step: every token hops to a uniform neighbour (staying put when
    /// isolated), then arrivals are handled in token-id order.
    pub fn step(&mut self, rng: &mut Rng) {
        self.t += 1;
        let t = self.t;
        for tok in &mut self.tokens {
            let nbrs = self.graph.neighbors(tok.node);
            let next = match nbrs.len() {
                0 => tok.node,
                d => *nbrs.iter().nth(rng.random_range(0..d)).expect("index below degree"),
            };
            tok.from = Some(tok.node);
            tok.node = next;
        }
        self.tokens.sort_by_key(|tok| tok.id);
        // Every arrival of this step is seen at time t before any estimate.
        for tok in &mut self.tokens {
            let i = tok.node;
            for (x, c) in tok.payload.iter_mut().zip(&self.targets[i]) {
                *x -= self.learning_rate * (*x - c);
            }
            self.trackers[i].visit(tok.id, t);
        }
        if t <= self.warmup {
            return;
        }
        let mut born = Vec::new();
        for tok in &self.tokens {
            let i = tok.node;
            let tracker = &mut self.trackers[i];
            let Ok(beta) = tracker.estimate_active(t, tok.id) else { continue };
            self.estimate_sum += 2.0 * beta;
            self.estimate_count += 1;
            if maybe_replicate(beta, self.epsilon, self.n_f, rng) {
                let id = self.next_id;
                self.next_id += 1;
                tracker.register(id, t);
                born.push(Token { id, node: i, from: None, payload: tok.payload });
            }
        }
        self.tokens.extend(born);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    pub nodes: usize,
    pub edge_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WalkParams {
    pub topology: Topology,
    pub epsilon: f64,
    pub n_f: usize,
    pub steps: u64,
    pub warmup: u64,
    pub failures: Vec<FailureEvent>,
    /// Independent realisations averaged per output row.
    pub replicates: usize,
}

impl Default for WalkParams {
    fn default() -> Self {
        WalkParams {
            topology: Topology { nodes: 50, edge_prob: 0.1 },
            epsilon: 1.6,
            n_f: 10,
            steps: 5000,
            warmup: 500,
            failures: vec![
                FailureEvent { step: 1000, kind: FailureKind::Link, target: FailureTarget::Fraction(0.5) },
                FailureEvent { step: 3000, kind: FailureKind::Node, target: FailureTarget::Fraction(0.5) },
            ],
            replicates: 50,
        }
    }
}

impl WalkParams {
    pub fn validate(&self) -> Result<()> {
        if self.topology.nodes < 2 || !(0.0..=1.0).contains(&self.topology.edge_prob) || self.topology.edge_prob == 0.0 {
            return Err(invalid("topology needs ≥ 2 nodes and edge probability in (0, 1]"));
        }
        if self.n_f == 0 || self.replicates == 0 || self.epsilon < 0.0 {
            return Err(invalid("n_f and replicates must be positive, epsilon non-negative"));
        }
        self.failures.iter().try_for_each(FailureEvent::validate)
    }
}

/// Per-step active-walk counts for one realisation; also returns the mean
/// of `2β̂` over all estimates taken.
pub fn simulate_walks(p: &WalkParams, seed: u64) -> Result<(Vec<usize>, f64)> {
    p.validate()?;
    let mut rng = stream(seed, "walks/topology");
    let g = Graph::connected_erdos_renyi(p.topology.nodes, p.topology.edge_prob, &mut rng);
    let mut sys = WalkSystem::new(g, p.epsilon, p.n_f, p.warmup, &mut rng)?;
    let mut fail_rng = stream(seed, "walks/failures");
    let mut move_rng = stream(seed, "walks/moves");
    let mut counts = Vec::with_capacity(p.steps as usize);
    for t in 1..=p.steps {
        for ev in p.failures.iter().filter(|e| e.step == t) {
            sys.apply_failure(ev, &mut fail_rng)?;
        }
        sys.step(&mut move_rng);
        counts.push(sys.active());
    }
    let calib = if sys.estimate_count > 0 { sys.estimate_sum / sys.estimate_count as f64 } else { f64::NAN };
    Ok((counts, calib))
}

/// Mean and spread of the active-walk count over `replicates` realisations.
pub fn run_walk_experiment(p: &WalkParams, seed: u64) -> Result<Series> {
    p.validate()?;
    let runs: Vec<Vec<usize>> = (0..p.replicates as u64)
        .into_par_iter()
        .map(|r| simulate_walks(p, seed.wrapping_mul(1_000_003).wrapping_add(r)).map(|(c, _)| c))
        .collect::<Result<_>>()?;
    let mut out = Series::new(&["t", "n_walks_mean", "n_walks_std", "resilience_value"]);
    for t in 0..p.steps as usize {
        let xs: Vec<f64> = runs.iter().map(|r| r[t] as f64).collect();
        let rv: Vec<f64> = runs.iter().map(|r| resilience_value(r[t])).collect();
        out.push(vec![(t + 1) as f64, mean(&xs), std_dev(&xs), mean(&rv)]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tracker(samples: &[u64]) -> NodeTracker {
        let mut tr = NodeTracker::new(100);
        for &s in samples {
            tr.add_sample(s);
        }
        tr
    }

    #[test]
    fn empirical_survival() {
        let tr = tracker(&[2, 2, 4]);
        assert_eq!(tr.survival(0).unwrap(), 1.0);
        assert!((tr.survival(3).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(tr.survival(4).unwrap(), 0.0);
        assert_eq!(tr.survival(100).unwrap(), 0.0);
        assert!(NodeTracker::new(5).survival(1).is_err());
    }

    #[test]
    fn fifo_eviction_keeps_latest() {
        let mut tr = NodeTracker::new(3);
        for s in [1, 9, 9, 9] {
            tr.add_sample(s);
        }
        assert_eq!(tr.sample_count(), 3);
        assert_eq!(tr.cdf(5).unwrap(), 0.0);
    }

    #[test]
    fn estimator_examples() {
        let mut tr = tracker(&[2, 2, 4]);
        tr.register(7, 10);
        assert_eq!(tr.estimate_active(10, 7).unwrap(), 0.5);
        tr.register(1, 7);
        tr.register(2, 3);
        let expected = 0.5 + tr.survival(3).unwrap() + tr.survival(7).unwrap();
        assert_eq!(tr.estimate_active(10, 7).unwrap(), expected);
        let mut fresh = tracker(&[5]);
        for w in 0..10 {
            fresh.register(w, 20);
        }
        assert_eq!(fresh.estimate_active(20, 0).unwrap(), 0.5 + 9.0);
    }

    #[test]
    fn return_times_recorded_on_revisit() {
        let mut tr = NodeTracker::new(10);
        tr.visit(3, 5);
        assert_eq!(tr.sample_count(), 0);
        tr.visit(3, 12);
        assert_eq!(tr.cdf(7).unwrap(), 1.0);
        assert_eq!(tr.last_seen(3), Some(12));
    }

    #[test]
    fn replication_rule() {
        let mut rng = stream(1, "rep");
        assert!((0..1000).all(|_| !maybe_replicate(2.0, 1.6, 10, &mut rng)));
        assert!((0..100).all(|_| maybe_replicate(0.5, 1.6, 1, &mut rng)));
        let hits = (0..10_000).filter(|_| maybe_replicate(0.5, 1.6, 10, &mut rng)).count();
        assert!((800..1200).contains(&hits));
    }

    #[test]
    fn resilience_values() {
        assert_eq!(resilience_value(10), 10.0);
        assert_eq!(resilience_value(1), 0.0);
        assert_eq!(resilience_value(0), 0.0);
    }

    #[test]
    fn conserved_without_failures_or_replication() {
        let p = WalkParams { epsilon: 0.0, failures: vec![], steps: 800, ..Default::default() };
        let (counts, _) = simulate_walks(&p, 3).unwrap();
        assert!(counts.iter().all(|&c| c == 10));
    }

    #[test]
    fn failures_prune_tokens() {
        let mut rng = stream(2, "fail");
        let g = Graph::connected_erdos_renyi(30, 0.2, &mut rng);
        let mut sys = WalkSystem::new(g, 0.0, 20, 0, &mut rng).unwrap();
        for _ in 0..5 {
            sys.step(&mut rng);
        }
        let ev = FailureEvent { step: 0, kind: FailureKind::Node, target: FailureTarget::Fraction(1.0) };
        sys.apply_failure(&ev, &mut rng).unwrap();
        assert_eq!(sys.active(), 0);
        let bad = FailureEvent { step: 0, kind: FailureKind::Link, target: FailureTarget::Fraction(1.5) };
        assert!(sys.apply_failure(&bad, &mut rng).is_err());
    }

    #[test]
    fn all_links_failing_drops_every_moved_token() {
        let mut rng = stream(4, "links");
        let g = Graph::connected_erdos_renyi(20, 0.3, &mut rng);
        let mut sys = WalkSystem::new(g, 0.0, 10, 0, &mut rng).unwrap();
        sys.step(&mut rng);
        let ev = FailureEvent { step: 0, kind: FailureKind::Link, target: FailureTarget::Fraction(1.0) };
        sys.apply_failure(&ev, &mut rng).unwrap();
        assert_eq!(sys.active(), 0);
    }
}
