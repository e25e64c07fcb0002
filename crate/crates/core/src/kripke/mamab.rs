//! Multi-agent bandit under an oracle attack: a purely statistical UCB1
//! baseline against agents that keep interval beliefs, detect
//! contradictions and coordinate revisions through epistemic actions.

use super::{atom, mutual_knowledge, KripkeModel};
use crate::error::{invalid, Result};
use crate::rng::stream;
use crate::series::Series;
use crate::stats::{mean, std_dev};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BanditEnv {
    pub agents: usize,
    pub arms: usize,
    pub reward_std: f64,
    pub mean_lo: f64,
    pub mean_hi: f64,
    /// Additive deceptive noise on attacked arms.
    pub attack_noise: f64,
    /// The lowest-mean arms are attacked.
    pub attacked_arms: usize,
    /// Attack active for `t < attack_until`.
    pub attack_until: usize,
    pub horizon: usize,
}

impl Default for BanditEnv {
    fn default() -> Self {
        BanditEnv {
            agents: 5,
            arms: 20,
            reward_std: 0.1,
            mean_lo: 0.1,
            mean_hi: 0.9,
            attack_noise: 1.2,
            attacked_arms: 10,
            attack_until: 200,
            horizon: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeliefParams {
    /// Recovery/durability trade-off; higher values revise on less evidence.
    pub lambda: f64,
    pub tr_max: usize,
    pub td_min: usize,
    /// Observations per contradiction test.
    pub window: usize,
    /// Hypothesis grid spacing and upper end.
    pub grid: f64,
    pub grid_max: f64,
    /// Interval half-width in sample standard deviations.
    pub coverage: f64,
    /// Statistics decay applied by the explore action.
    pub decay: f64,
    /// Re-optimised exploration coefficient per unit of recovered reward spread.
    pub meta_scale: f64,
}

impl Default for BeliefParams {
    fn default() -> Self {
        BeliefParams { lambda: 0.5, tr_max: 100, td_min: 200, window: 10, grid: 0.1, grid_max: 2.5, coverage: 3.0, decay: 0.1, meta_scale: 2.0 }
    }
}

impl BeliefParams {
    /// Out-of-interval observations (of `window`) that flag a contradiction.
    pub fn threshold(&self) -> usize {
        (self.window as f64 * (1.0 - 0.4 * self.lambda)).round() as usize
    }

    fn cells(&self) -> usize {
        (self.grid_max / self.grid).round() as usize
    }

    /// Smallest grid interval covering `median ± coverage·σ̂` of a non-empty
    /// sample, with σ̂ the MAD-based scale (robust to a few stale points).
    pub fn interval_for(&self, xs: &[f64]) -> (usize, usize) {
        let m = median(xs);
        let dev: Vec<f64> = xs.iter().map(|x| (x - m).abs()).collect();
        let half = self.coverage * (1.4826 * median(&dev)).max(0.5 * self.grid);
        let cells = self.cells();
        let lo = ((m - half) / self.grid).floor().clamp(0.0, cells as f64 - 1.0) as usize;
        let hi = ((m + half) / self.grid).ceil().clamp(lo as f64 + 1.0, cells as f64) as usize;
        (lo, hi)
    }

    fn bounds(&self, iv: (usize, usize)) -> (f64, f64) {
        (iv.0 as f64 * self.grid, iv.1 as f64 * self.grid)
    }
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    if v.len() % 2 == 1 {
        v[h]
    } else {
        0.5 * (v[h - 1] + v[h])
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MamabParams {
    pub env: BanditEnv,
    pub belief: BeliefParams,
}

impl MamabParams {
    pub fn validate(&self) -> Result<()> {
        let e = &self.env;
        if !(0.0..=1.0).contains(&self.belief.lambda) {
            return Err(invalid(format!("lambda {} outside [0, 1]", self.belief.lambda)));
        }
        if e.agents == 0 || e.arms == 0 || e.horizon == 0 || self.belief.window == 0 {
            return Err(invalid("bandit sizes must be positive"));
        }
        if e.attacked_arms > e.arms || e.attack_noise < 0.0 || e.reward_std < 0.0 || e.mean_lo > e.mean_hi {
            return Err(invalid("inconsistent bandit environment"));
        }
        if self.belief.grid <= 0.0 || self.belief.grid_max <= self.belief.grid || !(0.0..=1.0).contains(&self.belief.decay) {
            return Err(invalid("inconsistent belief grid"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    Robust,
    Resilient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Epistemic {
    Query(usize),
    Revise(usize),
    Share(usize),
    /// Share a belief that survived re-testing.
    Confirm(usize),
    Explore,
}

#[derive(Debug, Clone)]
struct Agent {
    counts: Vec<f64>,
    sums: Vec<f64>,
    pulls: usize,
    /// Recent `(t, observed reward)` per arm since the last belief change.
    recent: Vec<VecDeque<(usize, f64)>>,
    belief: Vec<Option<(usize, usize)>>,
    /// When each belief was formed, revised, adopted or last re-validated.
    belief_time: Vec<usize>,
    /// Beliefs to re-test after evidence of a regime change.
    suspect: Vec<bool>,
    /// Time of the latest shared revision this agent has applied, per arm.
    seen: Vec<Option<usize>>,
    queue: VecDeque<Epistemic>,
    pooled: Vec<f64>,
    /// Exploration coefficient set by the meta policy.
    explore: f64,
    last_sweep: Option<usize>,
}

impl Agent {
    fn new(arms: usize) -> Self {
        Agent {
            counts: vec![0.0; arms],
            sums: vec![0.0; arms],
            pulls: 0,
            recent: vec![VecDeque::new(); arms],
            belief: vec![None; arms],
            belief_time: vec![0; arms],
            suspect: vec![false; arms],
            seen: vec![None; arms],
            queue: VecDeque::new(),
            pooled: Vec::new(),
            explore: 1.0,
            last_sweep: None,
        }
    }

    fn ucb_arm(&self) -> usize {
        let ln_t = ((self.pulls + 1) as f64).ln();
        let mut best = (f64::NEG_INFINITY, 0);
        for a in 0..self.counts.len() {
            let idx = if self.counts[a] <= 0.0 {
                f64::INFINITY
            } else {
                self.sums[a] / self.counts[a] + self.explore * (2.0 * ln_t / self.counts[a]).sqrt()
            };
            if idx > best.0 {
                best = (idx, a);
            }
        }
        best.1
    }

    fn record(&mut self, a: usize, r: f64) {
        self.counts[a] += 1.0;
        self.sums[a] += r;
        self.pulls += 1;
    }

    fn reset_arm(&mut self, a: usize, m: f64, n: f64) {
        self.counts[a] = n;
        self.sums[a] = m * n;
        self.recent[a].clear();
    }

    /// Evidence of a regime change at `t`: every older belief becomes
    /// suspect, at most once per `guard` steps.
    fn sweep(&mut self, t: usize, guard: usize) {
        if self.last_sweep.is_some_and(|s| t < s + guard) {
            return;
        }
        self.last_sweep = Some(t);
        for a in 0..self.belief.len() {
            if self.belief[a].is_some() && self.belief_time[a] < t && !self.suspect[a] {
                self.suspect[a] = true;
                self.recent[a].clear();
            }
        }
    }

    /// The suspect arm this agent tests, spread across agents by index.
    fn test_arm(&self, agent: usize) -> Option<usize> {
        let mut sus: Vec<usize> = (0..self.suspect.len()).filter(|&a| self.suspect[a]).collect();
        // Most optimistic beliefs first: they do the most damage if wrong.
        sus.sort_by_key(|&a| (std::cmp::Reverse(self.belief[a].map_or(0, |iv| iv.1)), a));
        (!sus.is_empty()).then(|| sus[agent % sus.len()])
    }
}

#[derive(Debug, Clone, Copy)]
struct Announcement {
    t: usize,
    interval: (usize, usize),
    mean: f64,
    count: f64,
    spread: f64,
}

/// Outcome of one design on one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MamabRun {
    /// Mean observed reward across agents per step; epistemic rounds pay 0.
    pub rewards: Vec<f64>,
    /// Steps after the attack until every corrupted belief is replaced by a
    /// mutually known valid one.
    pub recovery: Option<usize>,
    /// Steps the recovered mutual knowledge then persists.
    pub durability: usize,
    pub first_epistemic_action: Option<usize>,
    pub epistemic_actions: usize,
}

impl MamabRun {
    /// `λ t_r − (1−λ) t_d`, or `None` when recovery never happened.
    pub fn objective(&self, lambda: f64) -> Option<f64> {
        self.recovery.map(|tr| lambda * tr as f64 - (1.0 - lambda) * self.durability as f64)
    }

    pub fn meets_constraints(&self, p: &BeliefParams) -> bool {
        matches!(self.recovery, Some(tr) if tr <= p.tr_max) && self.durability >= p.td_min
    }
}

/// True arm means; the attacked set is the lowest `attacked_arms` of them.
pub fn arm_means(env: &BanditEnv, seed: u64) -> (Vec<f64>, Vec<bool>) {
    let mut rng = stream(seed, "mamab/env");
    let mu: Vec<f64> = (0..env.arms).map(|_| rng.random_range(env.mean_lo..=env.mean_hi)).collect();
    let mut order: Vec<usize> = (0..env.arms).collect();
    order.sort_by(|&a, &b| mu[a].total_cmp(&mu[b]).then(a.cmp(&b)));
    let mut attacked = vec![false; env.arms];
    order.iter().take(env.attacked_arms).for_each(|&a| attacked[a] = true);
    (mu, attacked)
}

/// Single-time model for one arm: world 0 is the actual state, world 1 an
/// uninformed alternative, and one world per distinct held interval. Each
/// agent cannot tell the actual world from the world of its belief.
pub fn belief_model(beliefs: &[Option<(usize, usize)>], mu: f64, p: &BeliefParams) -> KripkeModel {
    let mut held: Vec<(usize, usize)> = beliefs.iter().flatten().copied().collect();
    held.sort_unstable();
    held.dedup();
    let mut valuation: Vec<Vec<&str>> = vec![vec!["valid"], vec![]];
    for &iv in &held {
        let (lo, hi) = p.bounds(iv);
        valuation.push(if lo <= mu && mu <= hi { vec!["valid"] } else { vec![] });
    }
    let mut m = KripkeModel::new(beliefs.len(), 1, &valuation).expect("non-empty model");
    for (n, b) in beliefs.iter().enumerate() {
        let other = match b {
            Some(iv) => 2 + held.binary_search(iv).expect("held interval"),
            None => 1,
        };
        m.set_partition(n, 0, &[vec![0, other]]).expect("valid partition");
    }
    m
}

fn everyone_knows(agents: &[Agent], arms: &[usize], mu: &[f64], p: &BeliefParams) -> bool {
    let all: Vec<usize> = (0..agents.len()).collect();
    arms.iter().all(|&a| {
        let beliefs: Vec<_> = agents.iter().map(|ag| ag.belief[a]).collect();
        let m = belief_model(&beliefs, mu[a], p);
        mutual_knowledge(&m, 0, 0, &all, &atom("valid")).expect("well-formed query")
    })
}

pub fn run_mamab(params: &MamabParams, design: Design, seed: u64) -> Result<MamabRun> {
    params.validate()?;
    let env = &params.env;
    let bp = &params.belief;
    let (mu, attacked) = arm_means(env, seed);
    let mut noise_rng = stream(seed, "mamab/rewards");
    let mut agents: Vec<Agent> = (0..env.agents).map(|_| Agent::new(env.arms)).collect();
    let mut board: Vec<Option<Announcement>> = vec![None; env.arms];
    let threshold = bp.threshold();
    let mut rewards = Vec::with_capacity(env.horizon);
    let mut first_action = None;
    let mut actions = 0usize;
    let mut corrupted: Vec<usize> = Vec::new();
    let mut recovery = None;
    let mut durability = 0usize;
    let mut lapsed = false;

    for t in 0..env.horizon {
        let z: Vec<f64> = (0..env.agents).map(|_| StandardNormal.sample(&mut noise_rng)).collect();
        let mut total = 0.0;
        for n in 0..env.agents {
            if design == Design::Resilient {
                receive(&mut agents[n], &board, bp, t);
                let stale = |ag: &Agent, e: &Epistemic| matches!(*e, Epistemic::Confirm(a) if ag.recent[a].is_empty());
                while agents[n].queue.front().is_some_and(|e| stale(&agents[n], e)) {
                    agents[n].queue.pop_front();
                }
                if let Some(action) = agents[n].queue.pop_front() {
                    first_action.get_or_insert(t);
                    actions += 1;
                    match action {
                        Epistemic::Query(a) => {
                            // Own window plus the team's fresh observations.
                            let fresh = t.saturating_sub(bp.window);
                            let pooled: Vec<f64> = agents
                                .iter()
                                .enumerate()
                                .flat_map(|(m, ag)| ag.recent[a].iter().filter(move |(s, _)| m == n || *s >= fresh))
                                .map(|&(_, x)| x)
                                .collect();
                            let ag = &mut agents[n];
                            ag.pooled = pooled;
                            if ag.pooled.is_empty() {
                                ag.pooled.extend(ag.recent[a].iter().map(|&(_, x)| x));
                            }
                            if ag.pooled.is_empty() {
                                // Evidence vanished (a peer's revision was adopted meanwhile).
                                ag.queue.retain(|e| matches!(e, Epistemic::Confirm(_)));
                            }
                        }
                        Epistemic::Revise(a) => {
                            let ag = &mut agents[n];
                            ag.belief[a] = Some(bp.interval_for(&ag.pooled));
                            ag.belief_time[a] = t;
                            ag.suspect[a] = false;
                        }
                        Epistemic::Share(a) => {
                            let ag = &mut agents[n];
                            let xs = std::mem::take(&mut ag.pooled);
                            let m = mean(&xs);
                            let count = xs.len() as f64;
                            let spread = std_dev(&xs).max(0.5 * bp.grid);
                            let iv = ag.belief[a].expect("revised before sharing");
                            ag.reset_arm(a, m, count);
                            ag.seen[a] = Some(t);
                            ag.explore = ag.explore.min(bp.meta_scale * spread);
                            board[a] = Some(Announcement { t, interval: iv, mean: m, count, spread });
                        }
                        Epistemic::Confirm(a) => {
                            let ag = &mut agents[n];
                            let xs: Vec<f64> = ag.recent[a].iter().map(|&(_, x)| x).collect();
                            let (m, count) = (mean(&xs), xs.len() as f64);
                            let spread = std_dev(&xs).max(0.5 * bp.grid);
                            let iv = ag.belief[a].expect("confirmed belief exists");
                            ag.reset_arm(a, m, count);
                            ag.seen[a] = Some(t);
                            board[a] = Some(Announcement { t, interval: iv, mean: m, count, spread });
                        }
                        Epistemic::Explore => {
                            let ag = &mut agents[n];
                            ag.sweep(t, bp.tr_max);
                            for a in 0..env.arms {
                                ag.counts[a] *= bp.decay;
                                ag.sums[a] *= bp.decay;
                            }
                        }
                    }
                    continue;
                }
            }
            let ag = &mut agents[n];
            let testing = if design == Design::Resilient { ag.test_arm(n) } else { None };
            let a = testing.unwrap_or_else(|| ag.ucb_arm());
            let mut r = mu[a] + env.reward_std * z[n];
            if t < env.attack_until && attacked[a] {
                r += env.attack_noise;
            }
            ag.record(a, r);
            total += r;
            if design == Design::Resilient {
                observe(ag, a, t, r, bp, threshold);
            }
        }
        rewards.push(total / env.agents as f64);

        if t + 1 == env.attack_until {
            corrupted = (0..env.arms).filter(|&a| attacked[a] && agents.iter().any(|ag| ag.belief[a].is_some())).collect();
        }
        if t >= env.attack_until && !lapsed {
            let ok = everyone_knows(&agents, &corrupted, &mu, bp);
            match (recovery, ok) {
                (None, true) => {
                    recovery = Some(t - env.attack_until);
                    durability = 1;
                }
                (Some(_), true) => durability += 1,
                (Some(_), false) => lapsed = true,
                (None, false) => {}
            }
        }
    }
    Ok(MamabRun { rewards, recovery, durability, first_epistemic_action: first_action, epistemic_actions: actions })
}

/// Adopts shared revisions newer than what the agent has seen (free).
fn receive(ag: &mut Agent, board: &[Option<Announcement>], bp: &BeliefParams, t: usize) {
    for (a, ann) in board.iter().enumerate() {
        let Some(ann) = ann else { continue };
        if ag.seen[a].is_some_and(|s| s >= ann.t) {
            continue;
        }
        ag.seen[a] = Some(ann.t);
        ag.belief[a] = Some(ann.interval);
        ag.belief_time[a] = t;
        ag.suspect[a] = false;
        ag.reset_arm(a, ann.mean, ann.count.min(ag.counts[a]).max(1.0));
        ag.explore = ag.explore.min(bp.meta_scale * ann.spread);
        ag.sweep(ann.t, bp.tr_max);
    }
}

/// Forms, re-validates or contradicts the belief about arm `a`.
fn observe(ag: &mut Agent, a: usize, t: usize, r: f64, bp: &BeliefParams, threshold: usize) {
    let q = &mut ag.recent[a];
    q.push_back((t, r));
    if q.len() > bp.window {
        q.pop_front();
    }
    match ag.belief[a] {
        None if q.len() == bp.window => {
            let xs: Vec<f64> = q.iter().map(|&(_, x)| x).collect();
            ag.belief[a] = Some(bp.interval_for(&xs));
            ag.belief_time[a] = t;
            ag.recent[a].clear();
        }
        None => {}
        Some(iv) => {
            let (lo, hi) = bp.bounds(iv);
            let outside = q.iter().filter(|&&(_, x)| x < lo || x > hi).count();
            if outside >= threshold {
                if ag.queue.is_empty() {
                    ag.queue.extend([Epistemic::Query(a), Epistemic::Revise(a), Epistemic::Share(a), Epistemic::Explore]);
                }
            } else if ag.suspect[a] && q.len() == bp.window {
                // Survived a full test window.
                ag.suspect[a] = false;
                ag.belief_time[a] = t;
                ag.queue.push_back(Epistemic::Confirm(a));
            }
        }
    }
}

/// Per-step mean reward of both designs.
pub fn run_mamab_usecase(params: &MamabParams, seed: u64) -> Result<Series> {
    let robust = run_mamab(params, Design::Robust, seed)?;
    let resilient = run_mamab(params, Design::Resilient, seed)?;
    let mut s = Series::new(&["t", "mean_reward_robust", "mean_reward_resilient"]);
    for (t, (a, b)) in robust.rewards.iter().zip(&resilient.rewards).enumerate() {
        s.push(vec![t as f64, *a, *b]);
    }
    Ok(s)
}

/// Expected per-step reward of always pulling the best arm.
pub fn oracle_reward(env: &BanditEnv, seed: u64) -> f64 {
    arm_means(env, seed).0.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_from_lambda() {
        let mut p = BeliefParams::default();
        assert_eq!(p.threshold(), 8);
        p.lambda = 0.0;
        assert_eq!(p.threshold(), 10);
        p.lambda = 1.0;
        assert_eq!(p.threshold(), 6);
    }

    #[test]
    fn invalid_lambda_rejected() {
        let mut p = MamabParams::default();
        p.belief.lambda = 1.5;
        assert!(run_mamab(&p, Design::Resilient, 0).is_err());
    }

    #[test]
    fn intervals_cover_the_sample() {
        let p = BeliefParams::default();
        let xs = [0.52, 0.48, 0.61, 0.39, 0.5];
        let (lo, hi) = p.bounds(p.interval_for(&xs));
        assert!(xs.iter().all(|&x| lo <= x && x <= hi));
        assert!(((hi / p.grid).round() - hi / p.grid).abs() < 1e-9);
        let (lo, hi) = p.bounds(p.interval_for(&[9.0, 9.0]));
        assert!(lo < hi && hi <= p.grid_max + 1e-12);
    }

    #[test]
    fn belief_model_is_an_equivalence_and_tracks_validity() {
        let p = BeliefParams::default();
        let beliefs = [Some((3, 8)), Some((3, 8)), Some((12, 18)), None];
        let m = belief_model(&beliefs, 0.5, &p);
        for n in 0..4 {
            assert!(m.is_equivalence(n, 0));
        }
        let k = |n: usize| super::super::satisfies(&m, 0, 0, &super::super::know(n, atom("valid"))).unwrap();
        assert!(k(0) && k(1));
        assert!(!k(2) && !k(3));
        assert!(everyone_knows(
            &[Agent { belief: vec![Some((3, 8))], ..Agent::new(1) }, Agent { belief: vec![Some((4, 7))], ..Agent::new(1) }],
            &[0],
            &[0.5],
            &p
        ));
    }

    #[test]
    fn no_attack_designs_coincide_until_first_epistemic_action() {
        let mut p = MamabParams::default();
        p.env.attack_noise = 0.0;
        p.env.horizon = 400;
        let rob = run_mamab(&p, Design::Robust, 3).unwrap();
        let res = run_mamab(&p, Design::Resilient, 3).unwrap();
        let upto = res.first_epistemic_action.unwrap_or(p.env.horizon);
        assert!(upto > 0);
        assert_eq!(rob.rewards[..upto], res.rewards[..upto]);
    }

    #[test]
    fn attack_inflates_early_rewards() {
        let p = MamabParams::default();
        let rob = run_mamab(&p, Design::Robust, 1).unwrap();
        let early = mean(&rob.rewards[50..200]);
        assert!(early > 1.2, "{early}");
        assert!(rob.first_epistemic_action.is_none());
    }

    #[test]
    fn resilient_recovers_mutual_knowledge() {
        let p = MamabParams::default();
        for seed in 0..3 {
            let res = run_mamab(&p, Design::Resilient, seed).unwrap();
            assert!(res.recovery.is_some(), "seed {seed}");
            assert!(res.objective(0.5).is_some());
        }
    }
}
