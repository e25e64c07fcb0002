//! Compositional active inference on a labelled grid: categorical beliefs,
//! free energy, information-seeking planning, geometric belief fusion and
//! the two-agent LiDAR/camera mapping experiment.

use crate::error::{invalid, Error, Result};
use crate::rng::{stream, Rng};
use crate::series::Series;
use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

pub const LABELS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Free,
    Blue,
    Red,
    Black,
}

impl Label {
    pub const ALL: [Label; LABELS] = [Label::Free, Label::Blue, Label::Red, Label::Black];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Next label in the cycle Free → Blue → Red → Black → Free.
    pub fn next(self) -> Label {
        Label::ALL[(self.index() + 1) % LABELS]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    N,
    E,
    S,
    W,
    Stay,
}

impl Action {
    /// Fixed order; earlier actions win ties.
    pub const ALL: [Action; 5] = [Action::N, Action::E, Action::S, Action::W, Action::Stay];

    pub fn delta(self) -> (i64, i64) {
        match self {
            Action::N => (0, 1),
            Action::E => (1, 0),
            Action::S => (0, -1),
            Action::W => (-1, 0),
            Action::Stay => (0, 0),
        }
    }
}

const BEARINGS: [(i64, i64); 4] = [(0, 1), (1, 0), (0, -1), (-1, 0)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Lidar,
    Camera,
}

pub type Pos = (usize, usize);

/// Ground-truth labelled grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridWorld {
    pub size: usize,
    pub labels: Vec<Label>,
}

impl GridWorld {
    pub fn new(size: usize, labels: Vec<Label>) -> Result<Self> {
        if size == 0 || labels.len() != size * size {
            return Err(Error::DimensionMismatch { expected: size * size, got: labels.len() });
        }
        Ok(GridWorld { size, labels })
    }

    /// Each cell is free with probability `free_prob`, otherwise a uniformly
    /// chosen obstacle colour.
    pub fn random(size: usize, free_prob: f64, rng: &mut Rng) -> Result<Self> {
        if !(0.0..=1.0).contains(&free_prob) {
            return Err(invalid("free_prob must lie in [0, 1]"));
        }
        let labels = (0..size * size)
            .map(|_| if rng.random::<f64>() < free_prob { Label::Free } else { Label::ALL[rng.random_range(1..LABELS)] })
            .collect();
        GridWorld::new(size, labels)
    }

    pub fn cell(&self, (x, y): Pos) -> usize {
        y * self.size + x
    }

    pub fn label(&self, p: Pos) -> Label {
        self.labels[self.cell(p)]
    }

    /// Cycles the labels of a random `fraction` of cells. Returns their indices.
    pub fn apply_stressor(&mut self, fraction: f64, rng: &mut Rng) -> Result<Vec<usize>> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(invalid("stressor fraction must lie in [0, 1]"));
        }
        let n = self.labels.len();
        let k = (fraction * n as f64).round() as usize;
        let mut cells = sample(rng, n, k).into_vec();
        cells.sort_unstable();
        for &c in &cells {
            self.labels[c] = self.labels[c].next();
        }
        Ok(cells)
    }

    pub fn step(&self, (x, y): Pos, a: Action) -> Pos {
        let (dx, dy) = a.delta();
        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
        if nx < 0 || ny < 0 || nx >= self.size as i64 || ny >= self.size as i64 {
            (x, y)
        } else {
            (nx as usize, ny as usize)
        }
    }

    /// Cells seen along `bearing` from `p`, up to `reach` of them, plus
    /// whether the grid edge cuts the ray before that.
    fn ray_cells(&self, (x, y): Pos, bearing: (i64, i64), reach: usize) -> (Vec<usize>, bool) {
        let mut cells = Vec::with_capacity(reach);
        for k in 1..=reach as i64 {
            let (cx, cy) = (x as i64 + bearing.0 * k, y as i64 + bearing.1 * k);
            if cx < 0 || cy < 0 || cx >= self.size as i64 || cy >= self.size as i64 {
                return (cells, true);
            }
            cells.push(cy as usize * self.size + cx as usize);
        }
        (cells, false)
    }
}

/// Sensor models. LiDAR reports a range bin in `1..=lidar_range` to the
/// nearest non-free cell (the grid edge counts as an obstacle); the
/// camera reports the label of the nearest obstacle within
/// `camera_range`, or Free if there is none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservationModel {
    pub lidar_sigma: f64,
    pub lidar_range: usize,
    pub camera_range: usize,
    pub camera_accuracy: f64,
}

impl Default for ObservationModel {
    fn default() -> Self {
        ObservationModel { lidar_sigma: 1.0, lidar_range: 6, camera_range: 3, camera_accuracy: 0.6 }
    }
}

impl ObservationModel {
    pub fn validate(&self) -> Result<()> {
        if self.lidar_range < 2 || self.camera_range == 0 {
            return Err(invalid("sensor ranges too short"));
        }
        if self.lidar_sigma < 0.0 || !(0.0..=1.0).contains(&self.camera_accuracy) {
            return Err(invalid("bad sensor noise"));
        }
        Ok(())
    }

    /// Row-normalised likelihood `L[h][o]` for hidden ray state `h`.
    pub fn likelihood(&self, m: Modality) -> Vec<Vec<f64>> {
        match m {
            Modality::Lidar => {
                let n = self.lidar_range;
                (0..n)
                    .map(|h| {
                        let row: Vec<f64> = (0..n)
                            .map(|o| {
                                let d = o as f64 - h as f64;
                                if self.lidar_sigma == 0.0 {
                                    (o == h) as u8 as f64
                                } else {
                                    (-d * d / (2.0 * self.lidar_sigma * self.lidar_sigma)).exp()
                                }
                            })
                            .collect();
                        let z: f64 = row.iter().sum();
                        row.into_iter().map(|v| v / z).collect()
                    })
                    .collect()
            }
            Modality::Camera => {
                let miss = (1.0 - self.camera_accuracy) / (LABELS - 1) as f64;
                (0..LABELS).map(|h| (0..LABELS).map(|o| if o == h { self.camera_accuracy } else { miss }).collect()).collect()
            }
        }
    }
}

/// One sensor ray: the cells whose labels it depends on, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct Ray {
    pub modality: Modality,
    pub cells: Vec<usize>,
    /// The grid edge ends the ray right after `cells`.
    pub walled: bool,
}

impl Ray {
    pub fn new(world: &GridWorld, model: &ObservationModel, m: Modality, p: Pos, bearing: (i64, i64)) -> Self {
        // The last LiDAR bin only says "nothing closer", so its cell is uninformative.
        let reach = match m {
            Modality::Lidar => model.lidar_range - 1,
            Modality::Camera => model.camera_range,
        };
        let (cells, walled) = world.ray_cells(p, bearing, reach);
        Ray { modality: m, cells, walled }
    }

    pub fn all(world: &GridWorld, model: &ObservationModel, m: Modality, p: Pos) -> [Ray; 4] {
        BEARINGS.map(|b| Ray::new(world, model, m, p, b))
    }

    fn states(&self, model: &ObservationModel) -> usize {
        match self.modality {
            Modality::Lidar => model.lidar_range,
            Modality::Camera => LABELS,
        }
    }

    /// Distribution of the hidden ray state when the cells are independent
    /// with the given label distributions.
    fn state_dist(&self, model: &ObservationModel, rows: &[[f64; LABELS]]) -> Vec<f64> {
        let mut out = vec![0.0; self.states(model)];
        let mut clear = 1.0;
        for (k, row) in rows.iter().enumerate() {
            let free = row[Label::Free.index()];
            match self.modality {
                Modality::Lidar => out[k] += clear * (1.0 - free),
                Modality::Camera => {
                    for l in 1..LABELS {
                        out[l] += clear * row[l];
                    }
                }
            }
            clear *= free;
        }
        match self.modality {
            Modality::Lidar => {
                // Edge right after the last cell, or nothing within range.
                let end = if self.walled { rows.len() } else { model.lidar_range - 1 };
                out[end.min(model.lidar_range - 1)] += clear;
            }
            Modality::Camera => out[Label::Free.index()] += clear,
        }
        out
    }

    /// True hidden state on the given map.
    pub fn true_state(&self, model: &ObservationModel, world: &GridWorld) -> usize {
        let rows: Vec<[f64; LABELS]> = self
            .cells
            .iter()
            .map(|&c| {
                let mut r = [0.0; LABELS];
                r[world.labels[c].index()] = 1.0;
                r
            })
            .collect();
        self.state_dist(model, &rows).iter().position(|&p| p == 1.0).expect("deterministic state")
    }

    fn rows(&self, belief: &BeliefView) -> Vec<[f64; LABELS]> {
        self.cells.iter().map(|&c| belief.get(c)).collect()
    }

    /// Predicted observation distribution.
    pub fn predictive(&self, model: &ObservationModel, lik: &[Vec<f64>], belief: &BeliefView) -> Vec<f64> {
        let ps = self.state_dist(model, &self.rows(belief));
        let mut po = vec![0.0; lik[0].len()];
        for (h, &p) in ps.iter().enumerate() {
            for (o, &l) in lik[h].iter().enumerate() {
                po[o] += p * l;
            }
        }
        po
    }

    /// Mutual information between this ray's observation and the map.
    pub fn info_gain(&self, model: &ObservationModel, lik: &[Vec<f64>], belief: &BeliefView) -> f64 {
        let ps = self.state_dist(model, &self.rows(belief));
        let mut po = vec![0.0; lik[0].len()];
        let mut noise = 0.0;
        for (h, &p) in ps.iter().enumerate() {
            for (o, &l) in lik[h].iter().enumerate() {
                po[o] += p * l;
            }
            noise += p * entropy(&lik[h]);
        }
        (entropy(&po) - noise).max(0.0)
    }

    /// Per-cell Bayes update: each cell's likelihood marginalises the other
    /// cells on the ray under the prior. Returns updated rows in cell order.
    pub fn posterior_rows(&self, model: &ObservationModel, lik: &[Vec<f64>], belief: &BeliefView, obs: usize) -> Vec<[f64; LABELS]> {
        let prior = self.rows(belief);
        let mut out = Vec::with_capacity(prior.len());
        for k in 0..prior.len() {
            let mut rows = prior.clone();
            let mut post = [0.0; LABELS];
            for l in 0..LABELS {
                let mut delta = [0.0; LABELS];
                delta[l] = 1.0;
                rows[k] = delta;
                let like: f64 = self.state_dist(model, &rows).iter().enumerate().map(|(h, &p)| p * lik[h][obs]).sum();
                post[l] = prior[k][l] * like;
            }
            let z: f64 = post.iter().sum();
            out.push(if z > 0.0 { post.map(|v| v / z) } else { prior[k] });
        }
        out
    }
}

pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum()
}

/// Factorised belief over the map: one categorical per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    pub cells: Vec<[f64; LABELS]>,
}

/// A belief with sparse hypothetical overrides, used while planning.
pub struct BeliefView<'a> {
    base: &'a Belief,
    overlay: HashMap<usize, [f64; LABELS]>,
}

impl BeliefView<'_> {
    pub fn get(&self, c: usize) -> [f64; LABELS] {
        self.overlay.get(&c).copied().unwrap_or(self.base.cells[c])
    }
}

impl Belief {
    pub fn uniform(cells: usize) -> Self {
        Belief { cells: vec![[1.0 / LABELS as f64; LABELS]; cells] }
    }

    /// Every cell free with probability `free`, obstacle colours equally likely otherwise.
    pub fn with_prior(cells: usize, free: f64) -> Self {
        let other = (1.0 - free) / (LABELS - 1) as f64;
        Belief { cells: vec![[free, other, other, other]; cells] }
    }

    pub fn view(&self) -> BeliefView<'_> {
        BeliefView { base: self, overlay: HashMap::new() }
    }

    /// Most probable label per cell; ties go to the earlier label.
    pub fn argmax(&self, c: usize) -> Label {
        let row = &self.cells[c];
        let mut best = 0;
        for l in 1..LABELS {
            if row[l] > row[best] {
                best = l;
            }
        }
        Label::ALL[best]
    }

    pub fn accuracy(&self, world: &GridWorld) -> f64 {
        let hits = (0..self.cells.len()).filter(|&c| self.argmax(c) == world.labels[c]).count();
        hits as f64 / self.cells.len() as f64
    }

    pub fn observe(&mut self, model: &ObservationModel, lik: &[Vec<f64>], ray: &Ray, obs: usize) {
        let post = ray.posterior_rows(model, lik, &self.view(), obs);
        for (&c, row) in ray.cells.iter().zip(post) {
            self.cells[c] = row;
        }
    }
}

/// Floors every entry then renormalises.
pub fn floor_row(row: &[f64; LABELS], floor: f64) -> [f64; LABELS] {
    let r = row.map(|v| v.max(floor));
    let z: f64 = r.iter().sum();
    r.map(|v| v / z)
}

/// Normalised geometric mean of `own` and `others`, after flooring.
pub fn fuse_row(own: &[f64; LABELS], others: &[[f64; LABELS]], floor: f64) -> [f64; LABELS] {
    let k = (others.len() + 1) as f64;
    let mut logs = floor_row(own, floor).map(f64::ln);
    for o in others {
        let f = floor_row(o, floor);
        for l in 0..LABELS {
            logs[l] += f[l].ln();
        }
    }
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let g = logs.map(|v| ((v - m) / k).exp());
    let z: f64 = g.iter().sum();
    g.map(|v| v / z)
}

/// Geometric-mean fusion of arbitrary-length categorical vectors.
pub fn fuse_beliefs(own: &[f64], others: &[&[f64]], floor: f64) -> Result<Vec<f64>> {
    if others.iter().any(|o| o.len() != own.len()) || own.is_empty() {
        return Err(Error::DimensionMismatch { expected: own.len(), got: others.iter().map(|o| o.len()).find(|&l| l != own.len()).unwrap_or(0) });
    }
    let floored = |v: &[f64]| {
        let r: Vec<f64> = v.iter().map(|x| x.max(floor)).collect();
        let z: f64 = r.iter().sum();
        r.into_iter().map(|x| x / z).collect::<Vec<_>>()
    };
    let k = (others.len() + 1) as f64;
    let mut logs: Vec<f64> = floored(own).iter().map(|v| v.ln()).collect();
    for o in others {
        for (acc, v) in logs.iter_mut().zip(floored(o)) {
            *acc += v.ln();
        }
    }
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let g: Vec<f64> = logs.iter().map(|v| ((v - m) / k).exp()).collect();
    let z: f64 = g.iter().sum();
    Ok(g.into_iter().map(|v| v / z).collect())
}

/// `E_q[ln q(s) − ln p(s, o)]` for a joint table `joint[s][o]`.
pub fn free_energy(q: &[f64], joint: &[Vec<f64>], o: usize) -> Result<f64> {
    if q.len() != joint.len() || joint.iter().any(|r| o >= r.len()) {
        return Err(invalid("belief and joint table do not match"));
    }
    let evidence: f64 = joint.iter().map(|r| r[o]).sum();
    if evidence <= 0.0 {
        return Err(invalid(format!("observation {o} has zero probability")));
    }
    let mut f = 0.0;
    for (&qs, row) in q.iter().zip(joint) {
        if qs > 0.0 {
            if row[o] <= 0.0 {
                return Ok(f64::INFINITY);
            }
            f += qs * (qs.ln() - row[o].ln());
        }
    }
    Ok(f)
}

/// Positions visited by a policy.
pub fn trajectory(world: &GridWorld, start: Pos, policy: &[Action]) -> Vec<Pos> {
    let mut p = start;
    policy
        .iter()
        .map(|&a| {
            p = world.step(p, a);
            p
        })
        .collect()
}

fn overlaps(a: &Ray, cells: &[usize]) -> bool {
    a.cells.iter().any(|c| cells.contains(c))
}

/// Expected free energy of a policy with uniform preferences: the negated
/// expected information gain of the observations along it. Later rays are
/// scored under every joint outcome of the earlier rays they depend on.
pub fn expected_free_energy(world: &GridWorld, model: &ObservationModel, m: Modality, belief: &Belief, start: Pos, policy: &[Action]) -> Result<f64> {
    if policy.len() > 3 {
        return Err(invalid("policies longer than 3 steps are not supported"));
    }
    let lik = model.likelihood(m);
    let steps: Vec<[Ray; 4]> = trajectory(world, start, policy).into_iter().map(|p| Ray::all(world, model, m, p)).collect();
    let mut gain = 0.0;
    for (t, rays) in steps.iter().enumerate() {
        for ray in rays {
            // Earlier rays linked to this one through shared cells.
            let mut cells = ray.cells.clone();
            let mut deps: Vec<&Ray> = Vec::new();
            for earlier in steps[..t].iter().rev() {
                for r in earlier {
                    if overlaps(r, &cells) {
                        cells.extend(&r.cells);
                        deps.push(r);
                    }
                }
            }
            deps.reverse();
            gain += expected_gain(model, &lik, belief.view(), &deps, ray);
        }
    }
    Ok(-gain)
}

fn expected_gain(model: &ObservationModel, lik: &[Vec<f64>], view: BeliefView, deps: &[&Ray], target: &Ray) -> f64 {
    let Some((first, rest)) = deps.split_first() else {
        return target.info_gain(model, lik, &view);
    };
    let po = first.predictive(model, lik, &view);
    let mut total = 0.0;
    for (o, &p) in po.iter().enumerate() {
        if p <= 1e-15 {
            continue;
        }
        let post = first.posterior_rows(model, lik, &view, o);
        let mut overlay = view.overlay.clone();
        for (&c, row) in first.cells.iter().zip(post) {
            overlay.insert(c, row);
        }
        total += p * expected_gain(model, lik, BeliefView { base: view.base, overlay }, rest, target);
    }
    total
}

/// All policies of the given length in lexicographic action order.
pub fn policies(horizon: usize) -> Vec<Vec<Action>> {
    let mut out = vec![Vec::new()];
    for _ in 0..horizon {
        out = out.into_iter().flat_map(|p| Action::ALL.iter().map(move |&a| [p.clone(), vec![a]].concat())).collect();
    }
    out
}

/// First action of the policy with the lowest expected free energy.
pub fn select_action(world: &GridWorld, model: &ObservationModel, m: Modality, belief: &Belief, start: Pos, horizon: usize) -> Result<Action> {
    let mut best = (f64::INFINITY, Action::Stay);
    for pol in policies(horizon.max(1)) {
        let g = expected_free_energy(world, model, m, belief, start, &pol)?;
        if g < best.0 - 1e-12 {
            best = (g, pol[0]);
        }
    }
    Ok(best.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridParams {
    pub size: usize,
    pub free_prob: f64,
    pub steps: usize,
    pub stressor_time: usize,
    pub stressor_fraction: f64,
    pub horizon: usize,
    pub fusion_floor: f64,
    pub sensors: ObservationModel,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams {
            size: 20,
            free_prob: 0.25,
            steps: 200,
            stressor_time: 60,
            stressor_fraction: 0.3,
            horizon: 2,
            fusion_floor: 1e-6,
            sensors: ObservationModel::default(),
        }
    }
}

impl GridParams {
    pub fn validate(&self) -> Result<()> {
        if self.size < 2 || !(1..=3).contains(&self.horizon) {
            return Err(invalid("need size ≥ 2 and horizon in 1..=3"));
        }
        if !(0.0..=1.0).contains(&self.stressor_fraction) || !(0.0..=1.0).contains(&self.free_prob) {
            return Err(invalid("fractions must lie in [0, 1]"));
        }
        if !(self.fusion_floor > 0.0 && self.fusion_floor < 1.0 / LABELS as f64) {
            return Err(invalid("fusion floor must lie in (0, 1/4)"));
        }
        self.sensors.validate()
    }
}

/// An agent's state in one design.
#[derive(Debug, Clone)]
pub struct Agent {
    pub modality: Modality,
    pub pos: Pos,
    pub belief: Belief,
}

/// Runs both designs on the same map, stressor and starting positions.
/// Columns: t, acc_lidar_comp, acc_cam_comp, acc_lidar_nocomp, acc_cam_nocomp.
pub fn run_gridworld(p: &GridParams, seed: u64) -> Result<Series> {
    p.validate()?;
    let mut world = GridWorld::random(p.size, p.free_prob, &mut stream(seed, "gridworld/map"))?;
    let mut start_rng = stream(seed, "gridworld/start");
    let starts = [(start_rng.random_range(0..p.size), start_rng.random_range(0..p.size)), (start_rng.random_range(0..p.size), start_rng.random_range(0..p.size))];
    let modalities = [Modality::Lidar, Modality::Camera];
    let fresh = || -> Vec<Agent> {
        modalities.iter().zip(starts).map(|(&m, pos)| Agent { modality: m, pos, belief: Belief::with_prior(p.size * p.size, p.free_prob) }).collect()
    };
    let mut designs = [fresh(), fresh()];
    // Observation noise is drawn per design and agent from separate streams.
    let mut obs_rngs: Vec<Vec<Rng>> =
        ["comp", "nocomp"].iter().map(|d| ["lidar", "camera"].iter().map(|a| stream(seed, &format!("gridworld/obs/{d}/{a}"))).collect()).collect();
    let liks = modalities.map(|m| p.sensors.likelihood(m));
    let mut stress_rng = stream(seed, "gridworld/stressor");

    let mut out = Series::new(&["t", "acc_lidar_comp", "acc_cam_comp", "acc_lidar_nocomp", "acc_cam_nocomp"]);
    let record = |t: usize, designs: &[Vec<Agent>; 2], world: &GridWorld, out: &mut Series| {
        let mut row = vec![t as f64];
        for d in designs {
            row.extend(d.iter().map(|a| a.belief.accuracy(world)));
        }
        out.push(row);
    };
    record(0, &designs, &world, &mut out);
    for t in 1..=p.steps {
        if t == p.stressor_time {
            world.apply_stressor(p.stressor_fraction, &mut stress_rng)?;
        }
        for (di, agents) in designs.iter_mut().enumerate() {
            for (ai, agent) in agents.iter_mut().enumerate() {
                let a = select_action(&world, &p.sensors, agent.modality, &agent.belief, agent.pos, p.horizon)?;
                agent.pos = world.step(agent.pos, a);
                for ray in Ray::all(&world, &p.sensors, agent.modality, agent.pos) {
                    let h = ray.true_state(&p.sensors, &world);
                    let obs = sample_index(&liks[ai][h], &mut obs_rngs[di][ai]);
                    agent.belief.observe(&p.sensors, &liks[ai], &ray, obs);
                }
            }
            if di == 0 {
                // Synchronous exchange of the freshly updated beliefs.
                let published: Vec<Belief> = agents.iter().map(|a| a.belief.clone()).collect();
                for (ai, agent) in agents.iter_mut().enumerate() {
                    let other = &published[1 - ai];
                    for (c, row) in agent.belief.cells.iter_mut().enumerate() {
                        *row = fuse_row(&published[ai].cells[c], &[other.cells[c]], p.fusion_floor);
                    }
                }
            }
        }
        record(t, &designs, &world, &mut out);
    }
    Ok(out)
}

fn sample_index(p: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &v) in p.iter().enumerate() {
        acc += v;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}
