//! Undirected motif census (3 and 4 nodes), significance against a
//! degree-preserving ensemble, motif-distribution deviation, and the
//! degree-targeted attack / link-reconfiguration use case.

use crate::error::{invalid, Error, Result};
use crate::graph::Graph;
use crate::rng::{stream, Rng};
use crate::series::Series;
use crate::stats::{mean, std_dev};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motif4 {
    Path,
    Star,
    Cycle,
    Tadpole,
    Diamond,
    Complete,
}

impl Motif4 {
    pub const ALL: [Motif4; 6] = [Motif4::Path, Motif4::Star, Motif4::Cycle, Motif4::Tadpole, Motif4::Diamond, Motif4::Complete];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motif3 {
    Path,
    Triangle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MotifClass {
    Three(Motif3),
    Four(Motif4),
}

/// Fixed-width adjacency bitsets; node ids are small in every use here.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Bits {
    n: usize,
    words: usize,
    rows: Vec<u64>,
}

impl Bits {
    fn new(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        Bits { n, words, rows: vec![0; n * words] }
    }

    fn from_graph(g: &Graph) -> Self {
        let mut b = Bits::new(g.node_count());
        for (u, v) in g.edges() {
            b.set(u, v, true);
        }
        b
    }

    #[inline]
    fn has(&self, u: usize, v: usize) -> bool {
        self.rows[u * self.words + v / 64] >> (v % 64) & 1 == 1
    }

    fn set(&mut self, u: usize, v: usize, on: bool) {
        for (a, b) in [(u, v), (v, u)] {
            let w = &mut self.rows[a * self.words + b / 64];
            if on {
                *w |= 1 << (b % 64);
            } else {
                *w &= !(1 << (b % 64));
            }
        }
    }

    fn row(&self, u: usize) -> &[u64] {
        &self.rows[u * self.words..(u + 1) * self.words]
    }

    fn degree(&self, u: usize) -> usize {
        self.row(u).iter().map(|w| w.count_ones() as usize).sum()
    }

    fn iter_set(words: &[u64]) -> impl Iterator<Item = usize> + '_ {
        words.iter().enumerate().flat_map(|(i, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                (w != 0).then(|| {
                    let b = w.trailing_zeros() as usize;
                    w &= w - 1;
                    i * 64 + b
                })
            })
        })
    }
}

/// Class from the induced edge pattern over four nodes, `None` if disconnected.
fn classify4_with(has: impl Fn(usize, usize) -> bool) -> Option<Motif4> {
    let mut deg = [0u8; 4];
    let mut edges = 0;
    for i in 0..4 {
        for j in i + 1..4 {
            if has(i, j) {
                deg[i] += 1;
                deg[j] += 1;
                edges += 1;
            }
        }
    }
    deg.sort_unstable();
    // An isolated node means disconnected; otherwise three edges can only
    // form a path or a star.
    if deg[0] == 0 {
        return None;
    }
    match (edges, deg) {
        (3, [1, 1, 2, 2]) => Some(Motif4::Path),
        (3, [1, 1, 1, 3]) => Some(Motif4::Star),
        (4, [2, 2, 2, 2]) => Some(Motif4::Cycle),
        (4, [1, 2, 2, 3]) => Some(Motif4::Tadpole),
        (5, _) => Some(Motif4::Diamond),
        (6, _) => Some(Motif4::Complete),
        _ => None,
    }
}

fn classify4_bits(b: &Bits, s: [usize; 4]) -> Option<Motif4> {
    classify4_with(|i, j| b.has(s[i], s[j]))
}

/// Class of the subgraph induced by four distinct nodes of `g`.
pub fn classify4(g: &Graph, nodes: [usize; 4]) -> Option<Motif4> {
    classify4_with(|i, j| g.has_edge(nodes[i], nodes[j]))
}

/// Connected induced subgraphs of `size` nodes (ESU enumeration); each set
/// is visited exactly once.
fn connected_subsets(b: &Bits, size: usize, visit: &mut dyn FnMut(&[usize])) {
    fn extend(b: &Bits, sub: &mut Vec<usize>, ext: Vec<usize>, root: usize, size: usize, visit: &mut dyn FnMut(&[usize])) {
        if sub.len() == size {
            visit(sub);
            return;
        }
        let mut ext = ext;
        while let Some(w) = ext.pop() {
            let mut next = ext.clone();
            for u in Bits::iter_set(b.row(w)) {
                if u > root && !sub.contains(&u) && u != w && !next.contains(&u) && !sub.iter().any(|&s| b.has(s, u)) {
                    next.push(u);
                }
            }
            sub.push(w);
            extend(b, sub, next, root, size, visit);
            sub.pop();
        }
    }
    for v in 0..b.n {
        let ext: Vec<usize> = Bits::iter_set(b.row(v)).filter(|&u| u > v).collect();
        extend(b, &mut vec![v], ext, v, size, visit);
    }
}

fn census4_bits(b: &Bits) -> [u64; 6] {
    let mut counts = [0u64; 6];
    connected_subsets(b, 4, &mut |s| {
        let c = classify4_bits(b, [s[0], s[1], s[2], s[3]]).expect("ESU yields connected sets");
        counts[c.index()] += 1;
    });
    counts
}

/// Counts of the six connected 4-node classes, in `Motif4::ALL` order.
pub fn census4(g: &Graph) -> [u64; 6] {
    census4_bits(&Bits::from_graph(g))
}

/// Counts of (path, triangle) 3-node classes.
pub fn census3(g: &Graph) -> [u64; 2] {
    let b = Bits::from_graph(g);
    let mut counts = [0u64; 2];
    connected_subsets(&b, 3, &mut |s| {
        let e = b.has(s[0], s[1]) as u8 + b.has(s[0], s[2]) as u8 + b.has(s[1], s[2]) as u8;
        counts[(e == 3) as usize] += 1;
    });
    counts
}

pub fn motif_count(g: &Graph, class: MotifClass) -> u64 {
    match class {
        MotifClass::Three(m) => census3(g)[m as usize],
        MotifClass::Four(m) => census4(g)[m.index()],
    }
}

/// Relative frequencies of the six 4-node classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotifDistribution(pub [f64; 6]);

impl MotifDistribution {
    pub fn from_counts(counts: &[u64; 6]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(invalid("graph has no connected 4-node subgraph"));
        }
        Ok(MotifDistribution(counts.map(|c| c as f64 / total as f64)))
    }

    pub fn get(&self, m: Motif4) -> f64 {
        self.0[m.index()]
    }
}

pub fn motif_distribution(g: &Graph) -> Result<MotifDistribution> {
    MotifDistribution::from_counts(&census4(g))
}

const KL_FLOOR: f64 = 1e-9;

fn smooth(p: &[f64; 6]) -> [f64; 6] {
    let s: f64 = p.iter().map(|x| x + KL_FLOOR).sum();
    p.map(|x| (x + KL_FLOOR) / s)
}

/// `Σ p0 ln(p0/p1)` after adding `1e-9` to every mass and renormalising.
pub fn kl_deviation(p0: &MotifDistribution, p1: &MotifDistribution) -> f64 {
    let (a, b) = (smooth(&p0.0), smooth(&p1.0));
    a.iter().zip(&b).map(|(x, y)| x * (x / y).ln()).sum::<f64>().max(0.0)
}

/// Deviation of raw counts from a reference; an empty census smooths to uniform.
fn kl_from_counts(p0: &[f64; 6], counts: &[i64; 6]) -> f64 {
    let total: i64 = counts.iter().sum();
    let p1 = if total > 0 { counts.map(|c| c as f64 / total as f64) } else { [0.0; 6] };
    let (a, b) = (smooth(p0), smooth(&p1));
    a.iter().zip(&b).map(|(x, y)| x * (x / y).ln()).sum::<f64>().max(0.0)
}

/// Degree-preserving randomisation by `attempts` double-edge swaps.
pub fn double_edge_swap(g: &Graph, attempts: usize, rng: &mut Rng) -> Graph {
    let mut edges = g.edges();
    let mut bits = Bits::from_graph(g);
    if edges.len() < 2 {
        return g.clone();
    }
    for _ in 0..attempts {
        let i = rng.random_range(0..edges.len());
        let j = rng.random_range(0..edges.len());
        if i == j {
            continue;
        }
        let (a, b) = edges[i];
        let (c, d) = if rng.random_bool(0.5) { edges[j] } else { (edges[j].1, edges[j].0) };
        // (a,b),(c,d) -> (a,d),(c,b)
        if a == d || c == b || a == c || b == d || bits.has(a, d) || bits.has(c, b) {
            continue;
        }
        bits.set(a, b, false);
        bits.set(c, d, false);
        bits.set(a, d, true);
        bits.set(c, b, true);
        edges[i] = (a.min(d), a.max(d));
        edges[j] = (c.min(b), c.max(b));
    }
    Graph::from_edges(g.node_count(), &edges).expect("swaps keep the graph simple")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub observed: u64,
    pub ensemble_mean: f64,
    pub ensemble_std: f64,
    /// `(N − mean)/std`; `±∞` (or 0 when `N` equals the mean) if the ensemble is degenerate.
    pub z: f64,
    pub degenerate: bool,
}

/// Z-score of a motif count against `ensemble_size` degree-preserving
/// randomisations, each using `100·|E|` attempted swaps.
pub fn motif_significance(g: &Graph, class: MotifClass, ensemble_size: usize, seed: u64) -> Result<Significance> {
    if ensemble_size < 2 {
        return Err(invalid("ensemble needs at least two samples"));
    }
    let observed = motif_count(g, class);
    let mut rng = stream(seed, "motifnet/ensemble");
    let attempts = 100 * g.edge_count();
    let samples: Vec<f64> =
        (0..ensemble_size).map(|_| motif_count(&double_edge_swap(g, attempts, &mut rng), class) as f64).collect();
    let (m, s) = (mean(&samples), std_dev(&samples));
    let diff = observed as f64 - m;
    let degenerate = s == 0.0;
    let z = if degenerate {
        if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        }
    } else {
        diff / s
    };
    Ok(Significance { observed, ensemble_mean: m, ensemble_std: s, z, degenerate })
}

/// Base topology, reconfigurable pool, activation bits and survivors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconfigState {
    pub base: Graph,
    pub pool: Vec<(usize, usize)>,
    pub active: Vec<bool>,
    pub alive: Vec<bool>,
    pub alpha: usize,
}

impl ReconfigState {
    pub fn new(base: Graph, pool: Vec<(usize, usize)>, alpha: usize) -> Result<Self> {
        let n = base.node_count();
        let mut seen = std::collections::BTreeSet::new();
        for &(u, v) in &pool {
            if u == v || u >= n || v >= n {
                return Err(invalid(format!("pool edge ({u}, {v}) is not a valid pair")));
            }
            if base.has_edge(u, v) {
                return Err(invalid(format!("pool edge ({u}, {v}) already in the base graph")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(invalid(format!("duplicate pool edge ({u}, {v})")));
            }
        }
        let pool: Vec<(usize, usize)> = pool.into_iter().map(|(u, v)| (u.min(v), u.max(v))).collect();
        Ok(ReconfigState { active: vec![false; pool.len()], alive: vec![true; n], base, pool, alpha })
    }

    /// Pool edges whose endpoints both survive.
    pub fn surviving_pool(&self) -> Vec<usize> {
        (0..self.pool.len()).filter(|&i| self.alive[self.pool[i].0] && self.alive[self.pool[i].1]).collect()
    }

    /// Current network: surviving base edges plus active surviving pool edges.
    pub fn graph(&self) -> Graph {
        let mut g = Graph::new(self.base.node_count());
        for (u, v) in self.base.edges() {
            if self.alive[u] && self.alive[v] {
                g.add_edge(u, v).expect("valid edge");
            }
        }
        for i in self.surviving_pool() {
            if self.active[i] {
                g.add_edge(self.pool[i].0, self.pool[i].1).expect("valid edge");
            }
        }
        g
    }

    /// Next attack target: highest surviving base degree, lowest id on ties.
    pub fn next_target(&self) -> Option<usize> {
        let deg = |u: usize| self.base.neighbors(u).iter().filter(|&&v| self.alive[v]).count();
        (0..self.alive.len()).filter(|&u| self.alive[u]).max_by(|&a, &b| deg(a).cmp(&deg(b)).then(b.cmp(&a)))
    }

    /// Highest degree in the current network.
    pub fn max_degree(&self) -> usize {
        let g = self.graph();
        (0..g.node_count()).filter(|&u| self.alive[u]).map(|u| g.degree(u)).max().unwrap_or(0)
    }
}

/// Removes the `k` next targets in turn, re-ranking after each removal;
/// activation bits on surviving pool edges are kept.
pub fn apply_attack(state: &ReconfigState, k: usize) -> Result<ReconfigState> {
    let alive = state.alive.iter().filter(|&&a| a).count();
    if k > alive {
        return Err(invalid(format!("cannot attack {k} of {alive} surviving nodes")));
    }
    let mut s = state.clone();
    for _ in 0..k {
        let t = s.next_target().expect("a survivor remains");
        s.alive[t] = false;
    }
    Ok(s)
}

/// Attack-size distribution over `1..=k_max` (`probs[k-1]` = P(k)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackModel {
    pub probs: Vec<f64>,
}

impl AttackModel {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|&p| !(p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(invalid("attack distribution must be non-negative and sum to 1"));
        }
        Ok(AttackModel { probs })
    }

    pub fn uniform(k_max: usize, lo: usize, hi: usize) -> Result<Self> {
        if !(1 <= lo && lo <= hi && hi <= k_max) {
            return Err(invalid(format!("support {lo}..={hi} outside 1..={k_max}")));
        }
        let w = 1.0 / (hi - lo + 1) as f64;
        Ok(AttackModel { probs: (1..=k_max).map(|k| if (lo..=hi).contains(&k) { w } else { 0.0 }).collect() })
    }

    pub fn k_max(&self) -> usize {
        self.probs.len()
    }

    pub fn prob(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.probs.get(k - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i + 1;
            }
        }
        self.probs.iter().rposition(|&p| p > 0.0).map_or(1, |i| i + 1)
    }
}

/// Empirical frequencies of observed attack sizes over `1..=k_max`.
pub fn estimate_attack(observed: &[usize], k_max: usize) -> Result<AttackModel> {
    let valid: Vec<usize> = observed.iter().copied().filter(|&k| (1..=k_max).contains(&k)).collect();
    if valid.is_empty() {
        return Err(Error::InsufficientData("no attack observations in range".into()));
    }
    let mut probs = vec![0.0; k_max];
    for &k in &valid {
        probs[k - 1] += 1.0 / valid.len() as f64;
    }
    Ok(AttackModel { probs })
}

/// Per-step activation bits `x^(0..=K)` over the pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconfigPlan {
    pub steps: Vec<Vec<bool>>,
    /// Attack sizes where no configuration met the degree floor.
    pub infeasible: Vec<usize>,
}

/// Class counts maintained under single-edge toggles.
struct Counter {
    bits: Bits,
    counts: [i64; 6],
}

impl Counter {
    fn new(bits: Bits) -> Self {
        let counts = census4_bits(&bits).map(|c| c as i64);
        Counter { bits, counts }
    }

    /// Class counts over connected 4-sets containing both `u` and `v`.
    fn local(&self, u: usize, v: usize) -> [i64; 6] {
        let b = &self.bits;
        let mut near: Vec<u64> = b.row(u).iter().zip(b.row(v)).map(|(x, y)| x | y).collect();
        for x in [u, v] {
            near[x / 64] &= !(1 << (x % 64));
        }
        let in_near = |x: usize| near[x / 64] >> (x % 64) & 1 == 1;
        let mut out = [0i64; 6];
        for a in Bits::iter_set(&near) {
            let mut second: Vec<u64> = near.iter().zip(b.row(a)).map(|(x, y)| x | y).collect();
            for x in [u, v, a] {
                second[x / 64] &= !(1 << (x % 64));
            }
            for c in Bits::iter_set(&second) {
                if in_near(c) && c < a {
                    continue;
                }
                if let Some(m) = classify4_bits(b, [u, v, a, c]) {
                    out[m.index()] += 1;
                }
            }
        }
        out
    }

    fn toggle(&mut self, u: usize, v: usize) {
        let before = self.local(u, v);
        let on = !self.bits.has(u, v);
        self.bits.set(u, v, on);
        let after = self.local(u, v);
        for i in 0..6 {
            self.counts[i] += after[i] - before[i];
        }
    }
}

fn lex_less(a: &[bool], b: &[bool]) -> bool {
    a.cmp(b) == Ordering::Less
}

/// Receding-horizon optimiser. At attack step `k` it chooses which of the
/// inactive surviving pool edges to switch on (earlier activations persist),
/// minimising `Σ_{j≥k} p̂_j · KL(π(x^0), π_j)` where `π_j` is the network
/// after `j` attacks with the step-`k` configuration carried forward. The
/// highest surviving degree must stay `≥ α`; when no choice achieves that
/// the step is reported and the objective alone decides. Search is
/// exhaustive (Gray-code order) up to 12 candidate edges, greedy beyond.
pub fn optimize_reconfig(state: &ReconfigState, p_hat: &AttackModel) -> Result<ReconfigPlan> {
    let k_max = p_hat.k_max();
    let survivors = state.alive.iter().filter(|&&a| a).count();
    if k_max >= survivors {
        return Err(invalid(format!("K = {k_max} must be below the {survivors} surviving nodes")));
    }
    let p0 = motif_distribution(&state.graph())?.0;
    // Attack sequence is fixed by base degrees.
    let mut stages = vec![state.clone()];
    for _ in 0..k_max {
        let next = apply_attack(stages.last().expect("non-empty"), 1)?;
        stages.push(next);
    }
    let mut current = state.active.clone();
    let mut plan = vec![current.clone()];
    let mut infeasible = Vec::new();
    for k in 1..=k_max {
        let stage = &stages[k];
        let cand: Vec<usize> = stage.surviving_pool().into_iter().filter(|&i| !current[i]).collect();
        let horizon: Vec<usize> = (k..=k_max).filter(|&j| p_hat.prob(j) > 0.0).collect();
        let (choice, feasible) = if cand.len() <= 12 {
            exhaustive_step(&stages, k, &current, &cand, &horizon, p_hat, &p0)
        } else {
            greedy_step(&stages, k, &current, &cand, &horizon, p_hat, &p0)
        };
        if !feasible {
            infeasible.push(k);
        }
        for (&i, &on) in cand.iter().zip(&choice) {
            if on {
                current[i] = true;
            }
        }
        plan.push(current.clone());
    }
    Ok(ReconfigPlan { steps: plan, infeasible })
}

fn stage_bits(stage: &ReconfigState, active: &[bool]) -> Bits {
    let mut s = stage.clone();
    s.active = active.to_vec();
    Bits::from_graph(&s.graph())
}

fn max_degree_alive(bits: &Bits, alive: &[bool]) -> usize {
    (0..bits.n).filter(|&u| alive[u]).map(|u| bits.degree(u)).max().unwrap_or(0)
}

/// Objective and constraint for activating `extra ⊆ cand` at step `k`,
/// by direct recomputation (used by greedy search and as a cross-check).
pub fn step_objective(
    state: &ReconfigState,
    k: usize,
    active: &[bool],
    p_hat: &AttackModel,
) -> Result<(f64, bool)> {
    let p0 = motif_distribution(&state.graph())?.0;
    let mut stage = state.clone();
    let mut stages = vec![stage.clone()];
    for _ in 0..p_hat.k_max() {
        stage = apply_attack(&stage, 1)?;
        stages.push(stage.clone());
    }
    Ok(direct_objective(&stages, k, active, p_hat, &p0))
}

fn direct_objective(stages: &[ReconfigState], k: usize, active: &[bool], p_hat: &AttackModel, p0: &[f64; 6]) -> (f64, bool) {
    let mut obj = 0.0;
    for (j, stage) in stages.iter().enumerate().skip(k) {
        let p = p_hat.prob(j);
        if p > 0.0 {
            let counts = census4_bits(&stage_bits(stage, active)).map(|c| c as i64);
            obj += p * kl_from_counts(p0, &counts);
        }
    }
    let feasible = max_degree_alive(&stage_bits(&stages[k], active), &stages[k].alive) >= stages[k].alpha;
    (obj, feasible)
}

fn better(cand: (f64, bool, &[bool]), best: (f64, bool, &[bool])) -> bool {
    // Feasible first, then objective, then lexicographic bits.
    match (cand.1, best.1) {
        (true, false) => return true,
        (false, true) => return false,
        _ => {}
    }
    if (cand.0 - best.0).abs() > 1e-12 {
        return cand.0 < best.0;
    }
    lex_less(cand.2, best.2)
}

fn exhaustive_step(
    stages: &[ReconfigState],
    k: usize,
    current: &[bool],
    cand: &[usize],
    horizon: &[usize],
    p_hat: &AttackModel,
    p0: &[f64; 6],
) -> (Vec<bool>, bool) {
    let stage = &stages[k];
    let mut counters: Vec<(usize, Counter)> = horizon.iter().map(|&j| (j, Counter::new(stage_bits(&stages[j], current)))).collect();
    let mut deg_bits = stage_bits(stage, current);
    let mut bits = vec![false; cand.len()];
    let eval = |counters: &[(usize, Counter)], deg_bits: &Bits| -> (f64, bool) {
        let obj = counters.iter().map(|(j, c)| p_hat.prob(*j) * kl_from_counts(p0, &c.counts)).sum();
        (obj, max_degree_alive(deg_bits, &stage.alive) >= stage.alpha)
    };
    let (o, f) = eval(&counters, &deg_bits);
    let mut best = (o, f, bits.clone());
    for i in 1u64..(1u64 << cand.len()) {
        let flip = i.trailing_zeros() as usize;
        bits[flip] = !bits[flip];
        let (u, v) = stage.pool[cand[flip]];
        deg_bits.set(u, v, bits[flip]);
        for (j, c) in counters.iter_mut() {
            if stages[*j].alive[u] && stages[*j].alive[v] {
                c.toggle(u, v);
            }
        }
        let (o, f) = eval(&counters, &deg_bits);
        if better((o, f, &bits), (best.0, best.1, &best.2)) {
            best = (o, f, bits.clone());
        }
    }
    (best.2, best.1)
}

fn greedy_step(
    stages: &[ReconfigState],
    k: usize,
    current: &[bool],
    cand: &[usize],
    _horizon: &[usize],
    p_hat: &AttackModel,
    p0: &[f64; 6],
) -> (Vec<bool>, bool) {
    let mut bits = vec![false; cand.len()];
    let with = |bits: &[bool]| -> Vec<bool> {
        let mut a = current.to_vec();
        for (&i, &on) in cand.iter().zip(bits) {
            a[i] |= on;
        }
        a
    };
    let (o, f) = direct_objective(stages, k, &with(&bits), p_hat, p0);
    let mut best = (o, f);
    loop {
        let mut step: Option<(usize, f64, bool)> = None;
        for i in 0..cand.len() {
            if bits[i] {
                continue;
            }
            bits[i] = true;
            let (o, f) = direct_objective(stages, k, &with(&bits), p_hat, p0);
            bits[i] = false;
            let improves = (f && !best.1) || (f == best.1 && o < best.0 - 1e-12);
            if improves && step.is_none_or(|(_, so, sf)| (f && !sf) || (f == sf && o < so - 1e-12)) {
                step = Some((i, o, f));
            }
        }
        match step {
            Some((i, o, f)) => {
                bits[i] = true;
                best = (o, f);
            }
            None => break,
        }
    }
    (bits, best.1)
}

/// `KL(π(x^0), π(x^(k)))` for `k = 0..=K` under a plan.
pub fn plan_losses(state: &ReconfigState, plan: &ReconfigPlan) -> Result<Vec<f64>> {
    let p0 = motif_distribution(&state.graph())?.0;
    let mut stage = state.clone();
    let mut out = Vec::with_capacity(plan.steps.len());
    for (k, active) in plan.steps.iter().enumerate() {
        if k > 0 {
            stage = apply_attack(&stage, 1)?;
        }
        let counts = census4_bits(&stage_bits(&stage, active)).map(|c| c as i64);
        out.push(kl_from_counts(&p0, &counts));
    }
    Ok(out)
}

/// `Σ_k p(k)·loss[k]`.
pub fn expected_loss(losses: &[f64], p: &AttackModel) -> f64 {
    losses.iter().enumerate().map(|(k, l)| p.prob(k) * l).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotifParams {
    pub nodes: usize,
    pub edge_prob: f64,
    pub pool_size: usize,
    pub alpha: usize,
    pub k_max: usize,
    pub steps: usize,
    pub change_at: usize,
    pub episodes_per_step: usize,
    /// Initial attack support (uniform over `lo..=hi`).
    pub before: (usize, usize),
    /// Support after the strategy change.
    pub after: (usize, usize),
    /// Trailing window for the drop detector.
    pub window: usize,
    /// Detection fires when a step's mean loss exceeds this multiple of the trailing mean.
    pub jump: f64,
    /// Steps of attack observations used to re-estimate `p̂`.
    pub estimate_steps: usize,
}

impl Default for MotifParams {
    fn default() -> Self {
        MotifParams {
            nodes: 50,
            edge_prob: 0.2,
            pool_size: 10,
            alpha: 10,
            k_max: 15,
            steps: 400,
            change_at: 150,
            episodes_per_step: 10,
            before: (1, 5),
            after: (8, 15),
            window: 20,
            jump: 2.0,
            estimate_steps: 50,
        }
    }
}

impl MotifParams {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 5 || !(self.edge_prob > 0.0 && self.edge_prob <= 1.0) {
            return Err(invalid("nodes must be ≥ 5 and edge_prob in (0, 1]"));
        }
        if self.steps == 0 || self.episodes_per_step == 0 || self.window == 0 || self.estimate_steps == 0 {
            return Err(invalid("steps, episodes_per_step, window and estimate_steps must be positive"));
        }
        for (name, (lo, hi)) in [("before", self.before), ("after", self.after)] {
            if lo > hi || hi > self.k_max {
                return Err(invalid(format!("{name} range must satisfy lo ≤ hi ≤ k_max")));
            }
        }
        if !(self.jump > 1.0) {
            return Err(invalid("jump must exceed 1"));
        }
        Ok(())
    }
}

/// Random base network with a disjoint reconfigurable pool.
pub fn build_instance(p: &MotifParams, seed: u64) -> Result<ReconfigState> {
    let mut rng = stream(seed, "motifnet/instance");
    let base = Graph::connected_erdos_renyi(p.nodes, p.edge_prob, &mut rng);
    let mut pool = Vec::new();
    let max_pairs = p.nodes * (p.nodes - 1) / 2 - base.edge_count();
    if p.pool_size > max_pairs {
        return Err(invalid("pool larger than the number of non-edges"));
    }
    while pool.len() < p.pool_size {
        let (u, v) = (rng.random_range(0..p.nodes), rng.random_range(0..p.nodes));
        let e = (u.min(v), u.max(v));
        if u != v && !base.has_edge(u, v) && !pool.contains(&e) {
            pool.push(e);
        }
    }
    ReconfigState::new(base, pool, p.alpha)
}

/// Per-step mean deviation for the fixed robust plan and for the
/// detect / re-estimate / re-optimise resilient plan.
pub fn run_motif_usecase(p: &MotifParams, seed: u64) -> Result<Series> {
    p.validate()?;
    let state = build_instance(p, seed)?;
    let before = AttackModel::uniform(p.k_max, p.before.0, p.before.1)?;
    let after = AttackModel::uniform(p.k_max, p.after.0, p.after.1)?;
    let robust_plan = optimize_reconfig(&state, &before)?;
    let robust_loss = plan_losses(&state, &robust_plan)?;
    let mut resilient_loss = robust_loss.clone();
    let mut rng = stream(seed, "motifnet/attacks");
    let mut history: Vec<f64> = Vec::new();
    let mut observing: Option<Vec<usize>> = None;
    let mut observe_until = 0;

    let mut out = Series::new(&["t", "kl_robust", "kl_resilient"]);
    for t in 0..p.steps {
        let model = if t < p.change_at { &before } else { &after };
        let ks: Vec<usize> = (0..p.episodes_per_step).map(|_| model.sample(&mut rng)).collect();
        let rob = ks.iter().map(|&k| robust_loss[k]).sum::<f64>() / ks.len() as f64;
        let res = ks.iter().map(|&k| resilient_loss[k]).sum::<f64>() / ks.len() as f64;
        out.push(vec![t as f64, rob, res]);

        if let Some(obs) = observing.as_mut() {
            obs.extend(&ks);
            if t >= observe_until {
                let p_hat = estimate_attack(obs, p.k_max)?;
                let plan = optimize_reconfig(&state, &p_hat)?;
                let candidate = plan_losses(&state, &plan)?;
                // Keep the current plan unless the new one is better under p̂.
                if expected_loss(&candidate, &p_hat) < expected_loss(&resilient_loss, &p_hat) {
                    resilient_loss = candidate;
                }
                observing = None;
                history.clear();
            }
        } else if history.len() >= p.window {
            let trailing = mean(&history[history.len() - p.window..]);
            if res > p.jump * trailing && res > 0.0 {
                observing = Some(ks.clone());
                observe_until = t + p.estimate_steps;
            }
        }
        if observing.is_none() {
            history.push(res);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(n: usize, e: &[(usize, usize)]) -> Graph {
        Graph::from_edges(n, e).unwrap()
    }

    #[test]
    fn small_census_examples() {
        let k4 = g(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        assert_eq!(census4(&k4), [0, 0, 0, 0, 0, 1]);
        assert_eq!(census3(&k4), [0, 4]);
        assert_eq!(census4(&g(4, &[(0, 1), (1, 2), (2, 3)])), [1, 0, 0, 0, 0, 0]);
        let c5 = g(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]);
        assert_eq!(census4(&c5), [5, 0, 0, 0, 0, 0]);
        assert_eq!(motif_count(&c5, MotifClass::Three(Motif3::Path)), 5);
        let star = g(4, &[(0, 1), (0, 2), (0, 3)]);
        assert_eq!(motif_distribution(&star).unwrap().0, [0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let diamond = g(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)]);
        assert_eq!(motif_distribution(&diamond).unwrap().get(Motif4::Diamond), 1.0);
        assert!(motif_distribution(&g(4, &[(0, 1), (2, 3)])).is_err());
    }

    #[test]
    fn kl_examples() {
        let a = MotifDistribution([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let b = MotifDistribution([0.5, 0.5, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(kl_deviation(&a, &a), 0.0);
        assert!((kl_deviation(&a, &b) - 2f64.ln()).abs() < 1e-6);
        let c = MotifDistribution([0.2, 0.3, 0.1, 0.1, 0.2, 0.1]);
        let d = MotifDistribution([0.4, 0.1, 0.2, 0.1, 0.1, 0.1]);
        assert!((kl_deviation(&c, &d) - kl_deviation(&d, &c)).abs() > 1e-3);
    }

    #[test]
    fn swaps_preserve_degrees() {
        let mut rng = stream(3, "swap");
        let base = Graph::connected_erdos_renyi(30, 0.2, &mut rng);
        let r = double_edge_swap(&base, 2000, &mut rng);
        for u in 0..30 {
            assert_eq!(base.degree(u), r.degree(u));
        }
        assert_ne!(base.edges(), r.edges());
    }

    #[test]
    fn degenerate_ensemble_flags() {
        let k4 = g(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        let s = motif_significance(&k4, MotifClass::Four(Motif4::Complete), 5, 1).unwrap();
        assert!(s.degenerate);
        assert!(motif_significance(&k4, MotifClass::Four(Motif4::Complete), 1, 1).is_err());
    }

    #[test]
    fn planted_triangles_are_significant() {
        let mut rng = stream(4, "planted");
        let mut base = Graph::erdos_renyi(40, 0.05, &mut rng);
        for i in 0..10 {
            let (a, b, c) = (i * 4, i * 4 + 1, i * 4 + 2);
            for (u, v) in [(a, b), (b, c), (a, c)] {
                base.add_edge(u, v).unwrap();
            }
        }
        let s = motif_significance(&base, MotifClass::Three(Motif3::Triangle), 200, 9).unwrap();
        assert!(s.z > 2.0, "{s:?}");
    }

    #[test]
    fn attack_semantics() {
        let star = g(4, &[(0, 1), (0, 2), (0, 3)]);
        let s = ReconfigState::new(star, vec![], 1).unwrap();
        assert_eq!(apply_attack(&s, 0).unwrap(), s);
        assert_eq!(apply_attack(&s, 1).unwrap().graph().edge_count(), 0);
        assert!(apply_attack(&s, 5).is_err());

        // 6-ring with chords 0-3 and 1-4: degrees 3,3,2,3,3,2. Target 0 (tie
        // broken by id), then 4, the only node still at degree 3.
        let ring = g(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 3), (1, 4)]);
        let s = ReconfigState::new(ring, vec![(2, 5)], 1).unwrap();
        let a = apply_attack(&s, 2).unwrap();
        assert_eq!(a.graph().edges(), vec![(1, 2), (2, 3)]);
        assert_eq!(apply_attack(&a, 0).unwrap(), a);
        assert!(ReconfigState::new(g(3, &[(0, 1)]), vec![(1, 0)], 1).is_err());
    }

    #[test]
    fn attack_estimate_is_empirical_frequency() {
        let p = estimate_attack(&[1, 1, 2, 1], 4).unwrap();
        assert_eq!(p.probs, vec![0.75, 0.25, 0.0, 0.0]);
        assert!(estimate_attack(&[], 3).is_err());
    }

    #[test]
    fn incremental_counter_matches_census() {
        let mut rng = stream(8, "counter");
        let base = Graph::erdos_renyi(20, 0.25, &mut rng);
        let mut c = Counter::new(Bits::from_graph(&base));
        let mut shadow = base.clone();
        for _ in 0..60 {
            let (u, v) = (rng.random_range(0..20), rng.random_range(0..20));
            if u == v {
                continue;
            }
            c.toggle(u, v);
            if !shadow.remove_edge(u, v) {
                shadow.add_edge(u, v).unwrap();
            }
            assert_eq!(c.counts, census4(&shadow).map(|x| x as i64));
        }
    }

    fn small_instance() -> ReconfigState {
        let mut rng = stream(2, "small");
        let base = Graph::connected_erdos_renyi(8, 0.45, &mut rng);
        let mut pool = Vec::new();
        for u in 0..8 {
            for v in u + 1..8 {
                if !base.has_edge(u, v) && pool.len() < 3 {
                    pool.push((u, v));
                }
            }
        }
        ReconfigState::new(base, pool, 2).unwrap()
    }

    #[test]
    fn exhaustive_matches_enumeration_and_beats_greedy() {
        let s = small_instance();
        let p = AttackModel::new(vec![0.4, 0.6]).unwrap();
        let plan = optimize_reconfig(&s, &p).unwrap();
        let p0 = motif_distribution(&s.graph()).unwrap().0;
        let mut stages = vec![s.clone()];
        for _ in 0..2 {
            let n = apply_attack(stages.last().unwrap(), 1).unwrap();
            stages.push(n);
        }
        for k in 1..=2 {
            let prev = &plan.steps[k - 1];
            let cand: Vec<usize> = stages[k].surviving_pool().into_iter().filter(|&i| !prev[i]).collect();
            // Brute force over every extension.
            let mut best: Option<(f64, bool, Vec<bool>)> = None;
            for mask in 0..(1u32 << cand.len()) {
                let mut a = prev.clone();
                let bits: Vec<bool> = (0..cand.len()).map(|i| mask >> i & 1 == 1).collect();
                for (&i, &on) in cand.iter().zip(&bits) {
                    a[i] |= on;
                }
                let (o, f) = direct_objective(&stages, k, &a, &p, &p0);
                if best.as_ref().is_none_or(|b| better((o, f, &bits), (b.0, b.1, &b.2))) {
                    best = Some((o, f, bits));
                }
            }
            let (bo, _, _) = best.unwrap();
            let (po, _) = direct_objective(&stages, k, &plan.steps[k], &p, &p0);
            assert!((po - bo).abs() < 1e-12);
            let (g_bits, _) = greedy_step(&stages, k, prev, &cand, &[], &p, &p0);
            let mut ga = prev.clone();
            for (&i, &on) in cand.iter().zip(&g_bits) {
                ga[i] |= on;
            }
            assert!(direct_objective(&stages, k, &ga, &p, &p0).0 >= po - 1e-12);
        }
    }

    #[test]
    fn plans_respect_persistence_and_degree_floor() {
        let s = small_instance();
        let p = AttackModel::uniform(3, 1, 3).unwrap();
        let plan = optimize_reconfig(&s, &p).unwrap();
        let mut stage = s.clone();
        for k in 1..plan.steps.len() {
            stage = apply_attack(&stage, 1).unwrap();
            for i in stage.surviving_pool() {
                assert!(!plan.steps[k - 1][i] || plan.steps[k][i]);
            }
            stage.active = plan.steps[k].clone();
            if !plan.infeasible.contains(&k) {
                assert!(stage.max_degree() >= stage.alpha);
            }
        }
    }

    #[test]
    fn empty_pool_and_zero_mass_edge_cases() {
        let s = small_instance();
        let empty = ReconfigState::new(s.base.clone(), vec![], 2).unwrap();
        let p = AttackModel::uniform(2, 1, 2).unwrap();
        let plan = optimize_reconfig(&empty, &p).unwrap();
        let losses = plan_losses(&empty, &plan).unwrap();
        let direct: Vec<f64> = (0..=2)
            .map(|k| {
                let g = apply_attack(&empty, k).unwrap().graph();
                let c = census4(&g).map(|x| x as i64);
                kl_from_counts(&motif_distribution(&empty.graph()).unwrap().0, &c)
            })
            .collect();
        assert_eq!(losses, direct);
        // No mass beyond k=1: later steps take the lexicographically smallest feasible choice.
        let only_first = AttackModel::new(vec![1.0, 0.0]).unwrap();
        let plan = optimize_reconfig(&s, &only_first).unwrap();
        if !plan.infeasible.contains(&2) {
            assert_eq!(plan.steps[2], plan.steps[1].iter().zip(&plan.steps[2]).map(|(a, b)| *a || *b).collect::<Vec<_>>());
        }
    }
}
