//! Cellular sheaves on graphs: restriction maps, the sheaf Laplacian,
//! diffusion towards consensus, and distributed learning of restriction
//! maps on synthetic heterogeneous tasks with sensor failures.

use crate::error::{invalid, Error, Result};
use crate::graph::Graph;
use crate::rng::Rng;
use crate::series::Series;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// One vector per vertex.
pub type Cochain = Vec<DVector<f64>>;

/// A sheaf over an undirected graph. `maps[k]` holds the two restriction
/// matrices of `edges[k] = (i, j)`: first the one leaving `i`, then `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SheafRepr", into = "SheafRepr")]
pub struct SheafGraph {
    vertex_dims: Vec<usize>,
    edge_dim: usize,
    edges: Vec<(usize, usize)>,
    maps: Vec<[DMatrix<f64>; 2]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SheafRepr {
    vertex_dims: Vec<usize>,
    edge_dim: usize,
    edges: Vec<EdgeRepr>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRepr {
    ends: (usize, usize),
    maps: [Vec<Vec<f64>>; 2],
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>], cols: usize) -> Result<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != cols) {
        return Err(invalid("ragged restriction matrix"));
    }
    Ok(DMatrix::from_row_iterator(rows.len(), cols, rows.iter().flatten().copied()))
}

impl From<SheafGraph> for SheafRepr {
    fn from(s: SheafGraph) -> Self {
        let edges = s.edges.iter().zip(&s.maps).map(|(&ends, [a, b])| EdgeRepr { ends, maps: [rows_of(a), rows_of(b)] }).collect();
        SheafRepr { vertex_dims: s.vertex_dims, edge_dim: s.edge_dim, edges }
    }
}

impl TryFrom<SheafRepr> for SheafGraph {
    type Error = Error;

    fn try_from(r: SheafRepr) -> Result<Self> {
        let mut edges = Vec::with_capacity(r.edges.len());
        let mut maps = Vec::with_capacity(r.edges.len());
        for e in &r.edges {
            let (i, j) = e.ends;
            let di = *r.vertex_dims.get(i).ok_or_else(|| invalid(format!("vertex {i} out of range")))?;
            let dj = *r.vertex_dims.get(j).ok_or_else(|| invalid(format!("vertex {j} out of range")))?;
            edges.push(e.ends);
            maps.push([from_rows(&e.maps[0], di)?, from_rows(&e.maps[1], dj)?]);
        }
        SheafGraph::new(r.vertex_dims, r.edge_dim, edges, maps)
    }
}

impl SheafGraph {
    pub fn new(vertex_dims: Vec<usize>, edge_dim: usize, edges: Vec<(usize, usize)>, maps: Vec<[DMatrix<f64>; 2]>) -> Result<Self> {
        if edges.len() != maps.len() {
            return Err(Error::DimensionMismatch { expected: edges.len(), got: maps.len() });
        }
        let n = vertex_dims.len();
        let mut seen = std::collections::BTreeSet::new();
        for (&(i, j), [pi, pj]) in edges.iter().zip(&maps) {
            if i >= n || j >= n || i == j {
                return Err(invalid(format!("bad edge ({i}, {j})")));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(invalid(format!("duplicate edge ({i}, {j})")));
            }
            for (p, d) in [(pi, vertex_dims[i]), (pj, vertex_dims[j])] {
                if p.nrows() != edge_dim || p.ncols() != d {
                    return Err(invalid(format!(
                        "restriction on ({i}, {j}) is {}x{}, expected {edge_dim}x{d}",
                        p.nrows(),
                        p.ncols()
                    )));
                }
            }
        }
        Ok(SheafGraph { vertex_dims, edge_dim, edges, maps })
    }

    /// Identity restrictions with equal stalks everywhere.
    pub fn constant(g: &Graph, dim: usize) -> Self {
        let edges = g.edges();
        let maps = edges.iter().map(|_| [DMatrix::identity(dim, dim), DMatrix::identity(dim, dim)]).collect();
        SheafGraph { vertex_dims: vec![dim; g.node_count()], edge_dim: dim, edges, maps }
    }

    /// Restrictions with orthonormal rows (a random orthonormal frame of
    /// each vertex stalk, truncated); Gaussian entries when the edge stalk
    /// is wider than the vertex stalk.
    pub fn random(g: &Graph, vertex_dims: Vec<usize>, edge_dim: usize, rng: &mut Rng) -> Result<Self> {
        if vertex_dims.len() != g.node_count() {
            return Err(Error::DimensionMismatch { expected: g.node_count(), got: vertex_dims.len() });
        }
        let edges = g.edges();
        let maps = edges.iter().map(|&(i, j)| [random_rows(edge_dim, vertex_dims[i], rng), random_rows(edge_dim, vertex_dims[j], rng)]).collect();
        SheafGraph::new(vertex_dims, edge_dim, edges, maps)
    }

    pub fn vertex_dims(&self) -> &[usize] {
        &self.vertex_dims
    }

    pub fn edge_dim(&self) -> usize {
        self.edge_dim
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn maps(&self) -> &[[DMatrix<f64>; 2]] {
        &self.maps
    }

    pub fn total_dim(&self) -> usize {
        self.vertex_dims.iter().sum()
    }

    fn check(&self, theta: &Cochain) -> Result<()> {
        if theta.len() != self.vertex_dims.len() {
            return Err(Error::DimensionMismatch { expected: self.vertex_dims.len(), got: theta.len() });
        }
        for (v, &d) in theta.iter().zip(&self.vertex_dims) {
            if v.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: v.len() });
            }
        }
        Ok(())
    }

    pub fn zero_cochain(&self) -> Cochain {
        self.vertex_dims.iter().map(|&d| DVector::zeros(d)).collect()
    }

    /// Per-edge mismatch `P_ij θ_i − P_ji θ_j`.
    fn edge_gaps<'a>(&'a self, theta: &'a Cochain) -> impl Iterator<Item = DVector<f64>> + 'a {
        self.edges.iter().zip(&self.maps).map(|(&(i, j), [pi, pj])| pi * &theta[i] - pj * &theta[j])
    }

    /// Applies the sheaf Laplacian edge by edge.
    pub fn apply_laplacian(&self, theta: &Cochain) -> Result<Cochain> {
        self.check(theta)?;
        let mut out = self.zero_cochain();
        for (gap, (&(i, j), [pi, pj])) in self.edge_gaps(theta).zip(self.edges.iter().zip(&self.maps)) {
            out[i] += pi.transpose() * &gap;
            out[j] -= pj.transpose() * &gap;
        }
        Ok(out)
    }

    /// Sum of squared edge mismatches.
    pub fn disagreement(&self, theta: &Cochain) -> Result<f64> {
        self.check(theta)?;
        Ok(self.edge_gaps(theta).map(|g| g.norm_squared()).sum())
    }

    /// Dense block matrix: `Σ PᵀP` on the diagonal, `−P_jiᵀ P_ij` off it.
    pub fn laplacian_matrix(&self) -> DMatrix<f64> {
        let offsets = self.offsets();
        let mut m = DMatrix::zeros(self.total_dim(), self.total_dim());
        for (&(i, j), [pi, pj]) in self.edges.iter().zip(&self.maps) {
            let (oi, oj, di, dj) = (offsets[i], offsets[j], self.vertex_dims[i], self.vertex_dims[j]);
            let mut block = m.view_mut((oi, oi), (di, di));
            block += pi.transpose() * pi;
            let mut block = m.view_mut((oj, oj), (dj, dj));
            block += pj.transpose() * pj;
            let cross = pj.transpose() * pi;
            let mut block = m.view_mut((oj, oi), (dj, di));
            block -= &cross;
            let mut block = m.view_mut((oi, oj), (di, dj));
            block -= cross.transpose();
        }
        m
    }

    fn offsets(&self) -> Vec<usize> {
        self.vertex_dims
            .iter()
            .scan(0, |acc, &d| {
                let o = *acc;
                *acc += d;
                Some(o)
            })
            .collect()
    }

    pub fn flatten(&self, theta: &Cochain) -> Result<DVector<f64>> {
        self.check(theta)?;
        Ok(DVector::from_iterator(self.total_dim(), theta.iter().flat_map(|v| v.iter().copied())))
    }

    pub fn unflatten(&self, flat: &DVector<f64>) -> Result<Cochain> {
        if flat.len() != self.total_dim() {
            return Err(Error::DimensionMismatch { expected: self.total_dim(), got: flat.len() });
        }
        let offsets = self.offsets();
        Ok(self.vertex_dims.iter().zip(offsets).map(|(&d, o)| flat.rows(o, d).into_owned()).collect())
    }

    /// Power-iteration estimate of the largest Laplacian eigenvalue.
    pub fn max_eigenvalue(&self, iters: usize) -> f64 {
        let n = self.total_dim();
        if n == 0 || self.edges.is_empty() {
            return 0.0;
        }
        // Deterministic start with no special alignment.
        let mut x = DVector::from_fn(n, |k, _| 1.0 + 0.1 * ((k * 7919) % 13) as f64);
        let mut lambda = 0.0;
        for _ in 0..iters {
            let norm = x.norm();
            if norm == 0.0 {
                return 0.0;
            }
            x /= norm;
            let c = self.unflatten(&x).expect("sized");
            let y = self.flatten(&self.apply_laplacian(&c).expect("sized")).expect("sized");
            lambda = x.dot(&y);
            x = y;
        }
        lambda
    }

    /// Explicit-Euler diffusion `θ ← θ − step·Lθ`. Returns the final cochain
    /// and the disagreement after every iterate, starting with the input.
    pub fn diffuse(&self, theta: &Cochain, step: f64, iters: usize) -> Result<(Cochain, Vec<f64>)> {
        self.check(theta)?;
        let bound = 2.0 / self.max_eigenvalue(500).max(f64::MIN_POSITIVE);
        if !(step > 0.0 && step < bound) {
            return Err(invalid(format!("diffusion step {step} is outside (0, {bound:.6})")));
        }
        let mut cur = theta.clone();
        let mut trace = vec![self.disagreement(&cur)?];
        for _ in 0..iters {
            let lt = self.apply_laplacian(&cur)?;
            for (c, l) in cur.iter_mut().zip(&lt) {
                *c -= step * l;
            }
            trace.push(self.disagreement(&cur)?);
        }
        Ok((cur, trace))
    }
}

fn gauss(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_rows(rows: usize, cols: usize, rng: &mut Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(cols, cols.max(rows), |_, _| gauss(rng));
    if rows <= cols {
        let q = g.columns(0, cols).into_owned().qr().q();
        q.rows(0, rows).into_owned()
    } else {
        let mut m = DMatrix::from_fn(rows, cols, |_, _| gauss(rng));
        normalize_rows(&mut m);
        m
    }
}

fn normalize_rows(m: &mut DMatrix<f64>) {
    for mut r in m.row_iter_mut() {
        let n = r.norm();
        if n > 0.0 {
            r /= n;
        }
    }
}

/// Local binary classification task at one node.
#[derive(Debug, Clone)]
pub struct Task {
    /// Samples as rows.
    pub train_x: DMatrix<f64>,
    pub train_y: Vec<f64>,
    pub test_x: DMatrix<f64>,
    pub test_y: Vec<f64>,
    /// Columns from here on belong to the failure-prone sensor.
    pub sensor_start: usize,
}

impl Task {
    pub fn dim(&self) -> usize {
        self.train_x.ncols()
    }

    /// Zeroes the failure-prone sensor's inputs.
    pub fn fail_sensor(&mut self) {
        let (s, d) = (self.sensor_start, self.dim());
        self.train_x.columns_mut(s, d - s).fill(0.0);
        self.test_x.columns_mut(s, d - s).fill(0.0);
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean logistic loss and its gradient for labels in {−1, 1}.
fn logistic(x: &DMatrix<f64>, y: &[f64], w: &DVector<f64>) -> (f64, DVector<f64>) {
    let margins = x * w;
    let n = y.len() as f64;
    let mut loss = 0.0;
    let mut coeff = DVector::zeros(y.len());
    for (k, (&m, &yk)) in margins.iter().zip(y).enumerate() {
        loss += log1p_exp(-yk * m);
        coeff[k] = -yk * sigmoid(-yk * m) / n;
    }
    (loss / n, x.transpose() * coeff)
}

fn accuracy(x: &DMatrix<f64>, y: &[f64], w: &DVector<f64>) -> f64 {
    let margins = x * w;
    let hits = margins.iter().zip(y).filter(|(&m, &yk)| (m >= 0.0) == (yk > 0.0)).count();
    hits as f64 / y.len().max(1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SheafLearnParams {
    pub nodes: usize,
    pub edge_prob: f64,
    pub vertex_dims: Vec<usize>,
    pub edge_dim: usize,
    pub latent_dim: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub noise: f64,
    pub rounds: usize,
    pub local_steps: usize,
    pub map_steps: usize,
    pub lr_theta: f64,
    pub lr_maps: f64,
    pub disagreement_weight: f64,
    pub failure_round: usize,
    pub failure_ratio: f64,
}

impl Default for SheafLearnParams {
    fn default() -> Self {
        SheafLearnParams {
            nodes: 20,
            edge_prob: 0.25,
            vertex_dims: vec![3, 4, 5],
            edge_dim: 2,
            latent_dim: 2,
            train_samples: 20,
            test_samples: 400,
            noise: 0.3,
            rounds: 60,
            local_steps: 10,
            map_steps: 50,
            lr_theta: 0.05,
            lr_maps: 0.01,
            disagreement_weight: 0.5,
            failure_round: 10,
            failure_ratio: 0.25,
        }
    }
}

impl SheafLearnParams {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 2 || self.vertex_dims.is_empty() || self.edge_dim == 0 || self.latent_dim == 0 {
            return Err(invalid("need at least two nodes and positive dimensions"));
        }
        if self.vertex_dims.iter().any(|&d| d <= self.latent_dim) {
            return Err(invalid("vertex stalks must be wider than the latent so a sensor block remains"));
        }
        if !(0.0..=1.0).contains(&self.edge_prob) || !(0.0..=1.0).contains(&self.failure_ratio) {
            return Err(invalid("probabilities must lie in [0, 1]"));
        }
        if self.train_samples == 0 || self.test_samples == 0 || self.noise < 0.0 {
            return Err(invalid("need samples and non-negative noise"));
        }
        if self.lr_theta <= 0.0 || self.lr_maps < 0.0 || self.disagreement_weight < 0.0 {
            return Err(invalid("learning rates and weights must be non-negative"));
        }
        Ok(())
    }
}

/// Communication graph plus one task per node. Every node sees the same
/// latent through its own mixing; the first `latent_dim` features form a
/// reliable sensor and the rest a failure-prone one.
pub fn synthetic_tasks(p: &SheafLearnParams, rng: &mut Rng) -> Result<(Graph, Vec<Task>)> {
    p.validate()?;
    let graph = Graph::connected_erdos_renyi(p.nodes, p.edge_prob, rng);
    let readout = DVector::from_fn(p.latent_dim, |_, _| gauss(rng)).normalize();
    let tasks = (0..p.nodes)
        .map(|i| {
            let d = p.vertex_dims[i % p.vertex_dims.len()];
            let mixing = DMatrix::from_fn(d, p.latent_dim, |_, _| gauss(rng) / (p.latent_dim as f64).sqrt());
            let mut draw = |n: usize| {
                let z = DMatrix::from_fn(n, p.latent_dim, |_, _| gauss(rng));
                let y: Vec<f64> = (&z * &readout).iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect();
                let noise = DMatrix::from_fn(n, d, |_, _| p.noise * gauss(rng));
                (z * mixing.transpose() + noise, y)
            };
            let (train_x, train_y) = draw(p.train_samples);
            let (test_x, test_y) = draw(p.test_samples);
            Task { train_x, train_y, test_x, test_y, sensor_start: p.latent_dim }
        })
        .collect();
    Ok((graph, tasks))
}

#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub sheaf: SheafGraph,
    pub theta: Cochain,
    /// Columns: round, train_acc, test_acc, disagreement.
    pub history: Series,
    pub failed_nodes: Vec<usize>,
}

/// Sum of local losses plus the weighted disagreement.
pub fn objective(sheaf: &SheafGraph, tasks: &[Task], theta: &Cochain, weight: f64) -> Result<f64> {
    let local: f64 = tasks.iter().zip(theta).map(|(t, w)| logistic(&t.train_x, &t.train_y, w).0).sum();
    Ok(local + weight * sheaf.disagreement(theta)?)
}

/// One synchronous gradient step on the models.
pub fn theta_step(sheaf: &SheafGraph, tasks: &[Task], theta: &mut Cochain, lr: f64, weight: f64) -> Result<()> {
    let lt = sheaf.apply_laplacian(theta)?;
    let grads: Vec<DVector<f64>> =
        tasks.iter().zip(theta.iter()).zip(&lt).map(|((t, w), l)| logistic(&t.train_x, &t.train_y, w).1 + 2.0 * weight * l).collect();
    for (w, g) in theta.iter_mut().zip(grads) {
        *w -= lr * g;
    }
    Ok(())
}

/// One gradient step on every restriction map, moving each row along the
/// sphere and renormalising it.
pub fn maps_step(sheaf: &mut SheafGraph, theta: &Cochain, lr: f64, weight: f64) -> Result<()> {
    sheaf.check(theta)?;
    let SheafGraph { edges, maps, .. } = sheaf;
    for (&(i, j), pair) in edges.iter().zip(maps.iter_mut()) {
        let gap = &pair[0] * &theta[i] - &pair[1] * &theta[j];
        let grads = [2.0 * weight * &gap * theta[i].transpose(), -2.0 * weight * &gap * theta[j].transpose()];
        for (p, g) in pair.iter_mut().zip(grads) {
            for (mut row, grow) in p.row_iter_mut().zip(g.row_iter()) {
                let tangent = grow - row.dot(&grow) * &row;
                row -= lr * tangent;
                let n = row.norm();
                if n > 0.0 {
                    row /= n;
                }
            }
        }
    }
    Ok(())
}

/// Alternating training of local models and restriction maps. At
/// `failure_round`, a random `failure_ratio` of nodes lose their second
/// sensor (inputs zeroed) for the rest of the run.
pub fn learn_restrictions(graph: &Graph, mut tasks: Vec<Task>, p: &SheafLearnParams, rng: &mut Rng) -> Result<LearnOutcome> {
    p.validate()?;
    if tasks.len() != graph.node_count() {
        return Err(Error::DimensionMismatch { expected: graph.node_count(), got: tasks.len() });
    }
    let dims: Vec<usize> = tasks.iter().map(Task::dim).collect();
    let mut sheaf = SheafGraph::random(graph, dims, p.edge_dim, rng)?;
    let mut theta = sheaf.zero_cochain();
    let mut order: Vec<usize> = (0..tasks.len()).collect();
    order.shuffle(rng);
    let n_fail = (p.failure_ratio * tasks.len() as f64).round() as usize;
    let mut failed_nodes: Vec<usize> = order[..n_fail].to_vec();
    failed_nodes.sort_unstable();

    let mut history = Series::new(&["round", "train_acc", "test_acc", "disagreement"]);
    for round in 0..p.rounds {
        if round == p.failure_round {
            for &i in &failed_nodes {
                tasks[i].fail_sensor();
            }
        }
        for _ in 0..p.local_steps {
            theta_step(&sheaf, &tasks, &mut theta, p.lr_theta, p.disagreement_weight)?;
        }
        for _ in 0..p.map_steps {
            maps_step(&mut sheaf, &theta, p.lr_maps, p.disagreement_weight)?;
        }
        let obj = objective(&sheaf, &tasks, &theta, p.disagreement_weight)?;
        if !obj.is_finite() {
            return Err(Error::Infeasible(format!("training diverged at round {round} (objective {obj})")));
        }
        let n = tasks.len() as f64;
        let train = tasks.iter().zip(&theta).map(|(t, w)| accuracy(&t.train_x, &t.train_y, w)).sum::<f64>() / n;
        let test = tasks.iter().zip(&theta).map(|(t, w)| accuracy(&t.test_x, &t.test_y, w)).sum::<f64>() / n;
        history.push(vec![round as f64, train, test, sheaf.disagreement(&theta)?]);
    }
    Ok(LearnOutcome { sheaf, theta, history, failed_nodes })
}

/// Builds tasks from `seed` and trains; the use-case entry point.
pub fn run_sheaf_usecase(p: &SheafLearnParams, seed: u64) -> Result<LearnOutcome> {
    let mut data_rng = crate::rng::stream(seed, "sheaf/tasks");
    let (graph, tasks) = synthetic_tasks(p, &mut data_rng)?;
    let mut rng = crate::rng::stream(seed, "sheaf/learn");
    learn_restrictions(&graph, tasks, p, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn two_node_scalar_example() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let s = SheafGraph::constant(&g, 1);
        let theta = vec![v(&[3.0]), v(&[1.0])];
        let l = s.apply_laplacian(&theta).unwrap();
        assert_eq!((l[0][0], l[1][0]), (2.0, -2.0));
        assert_eq!(s.disagreement(&theta).unwrap(), 4.0);
    }

    #[test]
    fn constant_sheaf_is_graph_laplacian() {
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 0), (2, 3)]).unwrap();
        let m = SheafGraph::constant(&g, 1).laplacian_matrix();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { g.degree(i) as f64 } else if g.has_edge(i, j) { -1.0 } else { 0.0 };
                assert_eq!(m[(i, j)], want);
            }
        }
    }

    #[test]
    fn shape_errors_are_reported() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let s = SheafGraph::constant(&g, 2);
        assert!(s.apply_laplacian(&vec![v(&[1.0, 2.0])]).is_err());
        assert!(s.disagreement(&vec![v(&[1.0]), v(&[1.0, 2.0])]).is_err());
        let bad = SheafGraph::new(vec![2, 2], 2, vec![(0, 1)], vec![[DMatrix::identity(2, 2), DMatrix::identity(1, 2)]]);
        assert!(bad.is_err());
    }

    #[test]
    fn global_section_is_a_fixed_point() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let s = SheafGraph::constant(&g, 2);
        let theta = vec![v(&[1.0, -2.0]); 3];
        let (out, trace) = s.diffuse(&theta, 0.1, 20).unwrap();
        assert_eq!(out, theta);
        assert!(trace.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn unstable_step_is_rejected() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let s = SheafGraph::constant(&g, 1);
        // λ_max of the path P3 is 3.
        assert!((s.max_eigenvalue(500) - 3.0).abs() < 1e-9);
        assert!(s.diffuse(&vec![v(&[1.0]); 3], 0.7, 5).is_err());
        assert!(s.diffuse(&vec![v(&[1.0]); 3], 0.6, 5).is_ok());
    }

    #[test]
    fn json_round_trip() {
        let mut rng = stream(3, "sheaf-json");
        let g = Graph::connected_erdos_renyi(5, 0.5, &mut rng);
        let s = SheafGraph::random(&g, vec![3, 4, 5, 3, 4], 2, &mut rng).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: SheafGraph = serde_json::from_str(&text).unwrap();
        assert_eq!(back.vertex_dims(), s.vertex_dims());
        for (a, b) in back.maps().iter().zip(s.maps()) {
            assert!((&a[0] - &b[0]).norm() < 1e-15 && (&a[1] - &b[1]).norm() < 1e-15);
        }
        assert!(serde_json::from_str::<SheafGraph>(r#"{"vertex_dims":[1],"edge_dim":1,"edges":[{"ends":[0,3],"maps":[[[1]],[[1]]]}]}"#).is_err());
    }

    #[test]
    fn random_maps_have_unit_rows() {
        let mut rng = stream(5, "rows");
        for (r, c) in [(2, 3), (2, 5), (4, 2)] {
            let m = random_rows(r, c, &mut rng);
            for row in m.row_iter() {
                assert!((row.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, -0.3, 2.0, 0.7, -1.1]);
        let y = [1.0, -1.0, 1.0];
        let w = v(&[0.2, -0.4]);
        let (_, g) = logistic(&x, &y, &w);
        for k in 0..2 {
            let mut wp = w.clone();
            wp[k] += 1e-6;
            let mut wm = w.clone();
            wm[k] -= 1e-6;
            let fd = (logistic(&x, &y, &wp).0 - logistic(&x, &y, &wm).0) / 2e-6;
            assert!((fd - g[k]).abs() < 1e-8);
        }
    }
}
