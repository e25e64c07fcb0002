//! Drone-swarm coverage under independent then correlated failures:
//! a statically over-provisioned robust placement against a resilient
//! swarm steered by learned failure dependencies.

use crate::copula::{DependencyMatrix, FailureSampler};
use crate::error::{invalid, Result};
use crate::rng::{stream, Rng};
use crate::series::Series;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub type Point = [f64; 2];

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drone {
    pub pos: Point,
    pub energy: f64,
    pub age: u64,
    pub radius: f64,
    pub alive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskArea {
    pub pos: Point,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    Robust,
    Resilient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SwarmParams {
    pub drones: usize,
    pub area: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub base_rate: f64,
    pub switch_time: u64,
    pub steps: u64,
    pub raster: usize,
    /// Radius within which risk degrades a drone's channel and raises its failure rate.
    pub risk_radius: f64,
    /// Extra failure probability per unit of nearby risk weight.
    pub risk_gain: f64,
    pub max_fail_prob: f64,
    /// Weight of the risk area left at each failure location.
    pub failure_risk_weight: f64,
    pub repulsion_range: f64,
    pub attraction_band: (f64, f64),
    pub safety_weight: f64,
    pub max_step: f64,
    pub gate_threshold: f64,
    /// Also hold a drone still when its move would raise the risk weight around it.
    pub avoid_risk_increase: bool,
    pub co_failure_boost: f64,
    pub decay: f64,
    pub redundancy: f64,
    pub worst_case_failures: usize,
    pub anneal_iters: usize,
    pub anneal_cooling: f64,
    pub anneal_subsets: usize,
    pub anneal_raster: usize,
}

impl Default for SwarmParams {
    fn default() -> Self {
        SwarmParams {
            drones: 30,
            area: 1000.0,
            r_min: 75.0,
            r_max: 225.0,
            base_rate: 0.01,
            switch_time: 60,
            steps: 200,
            raster: 200,
            risk_radius: 150.0,
            risk_gain: 0.05,
            max_fail_prob: 0.5,
            failure_risk_weight: 1.0,
            avoid_risk_increase: true,
            repulsion_range: 200.0,
            attraction_band: (150.0, 350.0),
            safety_weight: 0.7,
            max_step: 20.0,
            gate_threshold: 0.5,
            co_failure_boost: 0.1,
            decay: 0.995,
            redundancy: 0.3,
            worst_case_failures: 5,
            anneal_iters: 2000,
            anneal_cooling: 0.995,
            anneal_subsets: 100,
            anneal_raster: 50,
        }
    }
}

impl SwarmParams {
    pub fn validate(&self) -> Result<()> {
        if self.drones == 0 || self.area <= 0.0 || self.raster == 0 || self.anneal_raster == 0 {
            return Err(invalid("drones, area and rasters must be positive"));
        }
        if !(0.0 < self.r_min && self.r_min <= self.r_max) {
            return Err(invalid("need 0 < r_min ≤ r_max"));
        }
        if !(0.0..=1.0).contains(&self.base_rate) || !(0.0..=1.0).contains(&self.max_fail_prob) {
            return Err(invalid("probabilities must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.failure_risk_weight) || !(0.0..=1.0).contains(&self.safety_weight) {
            return Err(invalid("weights must lie in [0, 1]"));
        }
        if self.worst_case_failures >= self.robust_count() {
            return Err(invalid("worst-case failures must be fewer than the robust swarm"));
        }
        Ok(())
    }

    /// `ceil(N(1 + α))`.
    pub fn robust_count(&self) -> usize {
        (self.drones as f64 * (1.0 + self.redundancy) - 1e-9).ceil() as usize
    }
}

/// Fraction of raster cells (cell centres) within range of an active drone.
pub fn coverage_ratio(area: f64, raster: usize, drones: &[(Point, f64)]) -> f64 {
    if drones.is_empty() {
        return 0.0;
    }
    let cell = area / raster as f64;
    let mut covered = vec![false; raster * raster];
    for &(p, r) in drones {
        let span = |c: f64| {
            let lo = ((c - r) / cell - 0.5).floor().max(0.0) as usize;
            let hi = ((c + r) / cell - 0.5).ceil().min(raster as f64 - 1.0);
            (lo, hi as i64)
        };
        let ((x0, x1), (y0, y1)) = (span(p[0]), span(p[1]));
        if x1 < x0 as i64 || y1 < y0 as i64 {
            continue;
        }
        for ix in x0..=x1 as usize {
            let cx = (ix as f64 + 0.5) * cell;
            for iy in y0..=y1 as usize {
                let cy = (iy as f64 + 0.5) * cell;
                if (cx - p[0]).hypot(cy - p[1]) <= r {
                    covered[ix * raster + iy] = true;
                }
            }
        }
    }
    covered.iter().filter(|&&c| c).count() as f64 / (raster * raster) as f64
}

/// Grid-with-jitter start positions; `jitter = false` gives exact centres.
pub fn initial_placement(n: usize, area: f64, jitter: bool, rng: &mut Rng) -> Result<Vec<Point>> {
    if n == 0 {
        return Err(invalid("need at least one drone"));
    }
    let side = (n as f64).sqrt();
    let spacing = area / side;
    let noise = Normal::new(0.0, area / (10.0 * side)).expect("positive std");
    Ok((0..n)
        .map(|i| {
            let i = i as f64;
            let col = (i / side).floor();
            let row = i - (i / side).floor() * side;
            let mut p = [col * spacing + spacing / 2.0, row * spacing + spacing / 2.0];
            if jitter {
                p[0] += noise.sample(rng);
                p[1] += noise.sample(rng);
            }
            [p[0].clamp(0.0, area), p[1].clamp(0.0, area)]
        })
        .collect())
}

/// Proximity prior `0.4/(1+exp((d−200)/50))`, diagonal 0.2.
pub fn initial_dependency(positions: &[Point]) -> Result<DependencyMatrix> {
    if positions.len() < 2 {
        return Err(invalid("dependency needs at least two drones"));
    }
    let rows = positions
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            positions
                .iter()
                .enumerate()
                .map(|(j, &q)| if i == j { 0.2 } else { 0.4 / (1.0 + ((dist(p, q) - 200.0) / 50.0).exp()) })
                .collect()
        })
        .collect();
    DependencyMatrix::new(rows)
}

#[derive(Debug, Clone)]
pub struct SwarmWorld {
    pub params: SwarmParams,
    pub drones: Vec<Drone>,
    pub risks: Vec<RiskArea>,
    pub gamma: DependencyMatrix,
    pub t: u64,
}

impl SwarmWorld {
    pub fn new(params: SwarmParams, positions: Vec<Point>) -> Result<Self> {
        params.validate()?;
        let gamma = initial_dependency(&positions)?;
        let drones = positions
            .into_iter()
            .map(|pos| Drone { pos, energy: 100.0, age: 1, radius: params.r_max, alive: true })
            .collect();
        let mut w = SwarmWorld { params, drones, risks: Vec::new(), gamma, t: 0 };
        w.update_radii();
        Ok(w)
    }

    pub fn active(&self) -> usize {
        self.drones.iter().filter(|d| d.alive).count()
    }

    /// Highest risk weight within the risk radius of `p`.
    pub fn nearby_risk(&self, p: Point) -> f64 {
        self.risks
            .iter()
            .filter(|r| dist(r.pos, p) <= self.params.risk_radius)
            .map(|r| r.weight)
            .fold(0.0, f64::max)
    }

    pub fn radius_at(&self, p: Point) -> f64 {
        let pr = &self.params;
        pr.r_min + (pr.r_max - pr.r_min) * (1.0 - self.nearby_risk(p))
    }

    pub fn fail_prob_at(&self, p: Point) -> f64 {
        (self.params.base_rate + self.params.risk_gain * self.nearby_risk(p)).min(self.params.max_fail_prob)
    }

    pub fn fail_prob(&self, i: usize) -> f64 {
        self.fail_prob_at(self.drones[i].pos)
    }

    fn update_radii(&mut self) {
        for i in 0..self.drones.len() {
            self.drones[i].radius = self.radius_at(self.drones[i].pos);
        }
    }

    pub fn coverage(&self) -> f64 {
        let live: Vec<(Point, f64)> = self.drones.iter().filter(|d| d.alive).map(|d| (d.pos, d.radius)).collect();
        coverage_ratio(self.params.area, self.params.raster, &live)
    }

    /// `Σ_j γ_ij·P_fail(j)` over live drones within the repulsion range of `p`.
    pub fn risk_score(&self, i: usize, p: Point) -> f64 {
        (0..self.drones.len())
            .filter(|&j| j != i && self.drones[j].alive && dist(p, self.drones[j].pos) < self.params.repulsion_range)
            .map(|j| self.gamma.get(i, j) * self.fail_prob(j))
            .sum()
    }

    /// Dependency repulsion, gap attraction and their blend.
    pub fn control_forces(&self, i: usize) -> (Point, Point, Point) {
        let pr = &self.params;
        let pi = self.drones[i].pos;
        let (mut fd, mut fc) = ([0.0; 2], [0.0; 2]);
        let mut exposure = 0.0;
        for (j, dj) in self.drones.iter().enumerate() {
            if j == i {
                continue;
            }
            let d = dist(pi, dj.pos);
            if dj.alive {
                exposure += self.gamma.get(i, j) * self.fail_prob(j);
                if d < pr.repulsion_range && d > 0.0 {
                    let w = self.gamma.get(i, j) * self.fail_prob(j) * (1.0 - d / pr.repulsion_range) / d;
                    fd[0] += w * (pi[0] - dj.pos[0]);
                    fd[1] += w * (pi[1] - dj.pos[1]);
                }
            } else if d > pr.attraction_band.0 && d < pr.attraction_band.1 {
                let w = (1.0 - self.gamma.get(i, j)) / d;
                fc[0] += w * (dj.pos[0] - pi[0]);
                fc[1] += w * (dj.pos[1] - pi[1]);
            }
        }
        let b = pr.safety_weight;
        let comb = if exposure > 0.0 { [b * fd[0] + (1.0 - b) * fc[0], b * fd[1] + (1.0 - b) * fc[1]] } else { fc };
        (fd, fc, comb)
    }

    /// Movement for drone `i`: the blended force scaled by the step limit,
    /// capped by the remaining energy, clamped to the area, and dropped if
    /// the destination fails the risk gate.
    pub fn proposed_move(&self, i: usize) -> Point {
        let pr = &self.params;
        let d = &self.drones[i];
        let (_, _, f) = self.control_forces(i);
        let norm = f[0].hypot(f[1]);
        if norm == 0.0 {
            return [0.0; 2];
        }
        let len = (pr.max_step * norm).min(pr.max_step).min(d.energy / 0.01);
        let target = [(d.pos[0] + f[0] / norm * len).clamp(0.0, pr.area), (d.pos[1] + f[1] / norm * len).clamp(0.0, pr.area)];
        if self.risk_score(i, target) > pr.gate_threshold {
            return [0.0; 2];
        }
        if pr.avoid_risk_increase && self.nearby_risk(target) > self.nearby_risk(d.pos) {
            return [0.0; 2];
        }
        [target[0] - d.pos[0], target[1] - d.pos[1]]
    }

    /// One step: control, movement, failure draws, risk and dependency updates.
    pub fn step(&mut self, design: Design, rng: &mut Rng) -> Result<()> {
        self.t += 1;
        if design == Design::Resilient {
            let moves: Vec<Point> =
                (0..self.drones.len()).map(|i| if self.drones[i].alive { self.proposed_move(i) } else { [0.0; 2] }).collect();
            for (d, u) in self.drones.iter_mut().zip(moves) {
                let len = u[0].hypot(u[1]);
                d.pos = [d.pos[0] + u[0], d.pos[1] + u[1]];
                d.energy = (d.energy - 0.01 * len).max(0.0);
            }
        }
        for d in self.drones.iter_mut().filter(|d| d.alive) {
            d.age += 1;
        }
        self.update_radii();

        let live: Vec<usize> = (0..self.drones.len()).filter(|&i| self.drones[i].alive).collect();
        let marginals: Vec<f64> = live.iter().map(|&i| self.fail_prob(i)).collect();
        let failed: Vec<bool> = if self.t < self.params.switch_time {
            marginals.iter().map(|&p| rng.random::<f64>() < p).collect()
        } else if live.is_empty() {
            Vec::new()
        } else {
            let sub: Vec<Vec<f64>> = live.iter().map(|&i| live.iter().map(|&j| self.gamma.get(i, j)).collect()).collect();
            FailureSampler::new(&DependencyMatrix::new(sub)?)?.sample(&marginals, rng)?
        };
        let down: Vec<usize> = live.iter().zip(&failed).filter(|(_, &f)| f).map(|(&i, _)| i).collect();
        for &i in &down {
            self.drones[i].alive = false;
            self.risks.push(RiskArea { pos: self.drones[i].pos, weight: self.params.failure_risk_weight });
        }
        self.learn_dependencies(&down);
        self.update_radii();
        Ok(())
    }

    /// Co-failing pairs gain dependency, all others decay.
    pub fn learn_dependencies(&mut self, failed_together: &[usize]) {
        let n = self.drones.len();
        for i in 0..n {
            for j in i + 1..n {
                let g = self.gamma.get(i, j);
                let next = if failed_together.contains(&i) && failed_together.contains(&j) {
                    (g + self.params.co_failure_boost).min(1.0)
                } else {
                    g * self.params.decay
                };
                self.gamma.set_symmetric(i, j, next);
            }
        }
    }
}

/// Hexagonal lattice with `n` points spread over the square.
pub fn hex_grid(n: usize, area: f64) -> Vec<Point> {
    let rows = ((n as f64) * 3f64.sqrt() / 2.0).sqrt().round().max(1.0) as usize;
    let cols = n.div_ceil(rows);
    let dx = area / cols as f64;
    let dy = area / rows as f64;
    let mut pts = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let shift = if r % 2 == 1 { dx / 4.0 } else { -dx / 4.0 };
        for c in 0..cols {
            let x = ((c as f64 + 0.5) * dx + shift).clamp(0.0, area);
            pts.push([x, (r as f64 + 0.5) * dy]);
        }
    }
    pts.truncate(n);
    pts
}

/// Per-drone covered cells on a coarse raster plus cover counts, so the
/// coverage left after removing a few drones is cheap to evaluate.
#[derive(Clone)]
struct CoverIndex {
    cells: Vec<Vec<u32>>,
    counts: Vec<u16>,
    scratch: Vec<u16>,
    total: usize,
    covered: usize,
    r: f64,
    cell: f64,
    raster: usize,
}

impl CoverIndex {
    fn new(positions: &[Point], r: f64, area: f64, raster: usize) -> Self {
        let mut idx = CoverIndex {
            cells: Vec::with_capacity(positions.len()),
            counts: vec![0; raster * raster],
            scratch: vec![0; raster * raster],
            total: raster * raster,
            covered: 0,
            r,
            cell: area / raster as f64,
            raster,
        };
        for &p in positions {
            let own = idx.disk(p);
            idx.cells.push(Vec::new());
            let i = idx.cells.len() - 1;
            idx.place(i, own);
        }
        idx
    }

    fn disk(&self, p: Point) -> Vec<u32> {
        let span = |c: f64| {
            let lo = ((c - self.r) / self.cell - 0.5).floor().max(0.0) as usize;
            let hi = ((c + self.r) / self.cell - 0.5).ceil().min(self.raster as f64 - 1.0).max(0.0) as usize;
            lo..=hi
        };
        let mut own = Vec::new();
        for ix in span(p[0]) {
            let cx = (ix as f64 + 0.5) * self.cell;
            for iy in span(p[1]) {
                let cy = (iy as f64 + 0.5) * self.cell;
                if (cx - p[0]).hypot(cy - p[1]) <= self.r {
                    own.push((ix * self.raster + iy) as u32);
                }
            }
        }
        own
    }

    fn place(&mut self, i: usize, own: Vec<u32>) {
        for &c in &self.cells[i] {
            self.counts[c as usize] -= 1;
            if self.counts[c as usize] == 0 {
                self.covered -= 1;
            }
        }
        for &c in &own {
            if self.counts[c as usize] == 0 {
                self.covered += 1;
            }
            self.counts[c as usize] += 1;
        }
        self.cells[i] = own;
    }

    fn move_drone(&mut self, i: usize, p: Point) {
        let own = self.disk(p);
        self.place(i, own);
    }

    fn covered(&self) -> usize {
        self.covered
    }

    /// Cells covered only by drone `i`.
    fn unique(&self, i: usize) -> usize {
        self.cells[i].iter().filter(|&&c| self.counts[c as usize] == 1).count()
    }

    /// Coverage with `removed` taken out: a cell is lost when every drone
    /// covering it was removed.
    fn covered_without(&mut self, removed: &[usize]) -> usize {
        let mut lost = 0;
        for &i in removed {
            for &c in &self.cells[i] {
                self.scratch[c as usize] += 1;
                if self.scratch[c as usize] == self.counts[c as usize] {
                    lost += 1;
                }
            }
        }
        for &i in removed {
            for &c in &self.cells[i] {
                self.scratch[c as usize] = 0;
            }
        }
        self.covered - lost
    }
}

/// Worst coverage over every `k`-subset (small cases only).
pub fn exhaustive_worst_case(positions: &[Point], k: usize, r: f64, area: f64, raster: usize) -> f64 {
    let mut idx = CoverIndex::new(positions, r, area, raster);
    let n = positions.len();
    let mut worst = usize::MAX;
    let mut subset: Vec<usize> = (0..k).collect();
    loop {
        worst = worst.min(idx.covered_without(&subset));
        let mut i = k;
        loop {
            if i == 0 {
                return worst as f64 / idx.total as f64;
            }
            i -= 1;
            if subset[i] < n - k + i {
                subset[i] += 1;
                for j in i + 1..k {
                    subset[j] = subset[j - 1] + 1;
                }
                break;
            }
        }
        if k == 0 {
            return worst as f64 / idx.total as f64;
        }
    }
}

/// Sampled worst case: subsets drawn with weight favouring drones whose
/// loss uncovers the most cells, always including the greedy top-`k`.
fn sampled_worst_case(idx: &mut CoverIndex, k: usize, samples: usize, rng: &mut Rng) -> usize {
    let n = idx.cells.len();
    if k == 0 {
        return idx.covered();
    }
    let weights: Vec<f64> = (0..n).map(|i| idx.unique(i) as f64 + 1.0).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let mut worst = idx.covered_without(&order[..k]);
    for _ in 0..samples.saturating_sub(1) {
        let mut pool = weights.clone();
        let mut pick = Vec::with_capacity(k);
        for _ in 0..k {
            let total: f64 = pool.iter().sum();
            let mut u = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in pool.iter().enumerate() {
                if u < w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            pool[chosen] = 0.0;
            pick.push(chosen);
        }
        worst = worst.min(idx.covered_without(&pick));
    }
    worst
}

/// Max-min placement of `ceil(N(1+α))` drones by simulated annealing from a
/// hexagonal start, against sampled worst-case `K`-failure subsets.
pub fn robust_placement(p: &SwarmParams, rng: &mut Rng) -> Result<Vec<Point>> {
    p.validate()?;
    let n = p.robust_count();
    let k = p.worst_case_failures;
    let mut current = hex_grid(n, p.area);
    let mut index = CoverIndex::new(&current, p.r_max, p.area, p.anneal_raster);
    let total = index.total as f64;
    let mut cur_score = sampled_worst_case(&mut index, k, p.anneal_subsets, rng) as f64 / total;
    let (mut best, mut best_score) = (current.clone(), cur_score);
    let jitter = Normal::new(0.0, p.area / 20.0).expect("positive std");
    let mut temp = 0.02;
    for _ in 0..p.anneal_iters {
        let i = rng.random_range(0..n);
        let old = current[i];
        let moved = [(old[0] + jitter.sample(rng)).clamp(0.0, p.area), (old[1] + jitter.sample(rng)).clamp(0.0, p.area)];
        index.move_drone(i, moved);
        let score = sampled_worst_case(&mut index, k, p.anneal_subsets, rng) as f64 / total;
        if score >= cur_score || rng.random::<f64>() < ((score - cur_score) / temp).exp() {
            current[i] = moved;
            cur_score = score;
            if score > best_score {
                best = current.clone();
                best_score = score;
            }
        } else {
            index.move_drone(i, old);
        }
        temp *= p.anneal_cooling;
    }
    Ok(best)
}

/// Coverage and live counts per step for both designs.
pub fn run_swarm_usecase(p: &SwarmParams, seed: u64) -> Result<Series> {
    p.validate()?;
    let robust_pos = robust_placement(p, &mut stream(seed, "swarm/anneal"))?;
    let resilient_pos = initial_placement(p.drones, p.area, true, &mut stream(seed, "swarm/placement"))?;
    let mut robust = SwarmWorld::new(p.clone(), robust_pos)?;
    let mut resilient = SwarmWorld::new(p.clone(), resilient_pos)?;
    let mut rng_r = stream(seed, "swarm/failures/robust");
    let mut rng_s = stream(seed, "swarm/failures/resilient");
    let mut out = Series::new(&["t", "coverage_robust", "coverage_resilient", "active_robust", "active_resilient"]);
    let row = |t: u64, a: &SwarmWorld, b: &SwarmWorld| vec![t as f64, a.coverage(), b.coverage(), a.active() as f64, b.active() as f64];
    out.push(row(0, &robust, &resilient));
    for t in 1..=p.steps {
        robust.step(Design::Robust, &mut rng_r)?;
        resilient.step(Design::Resilient, &mut rng_s)?;
        out.push(row(t, &robust, &resilient));
    }
    Ok(out)
}
