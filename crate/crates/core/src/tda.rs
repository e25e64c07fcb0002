//! Vietoris–Rips persistence in dimensions 0 and 1.

use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::{Read, Write};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    points: Vec<Vec<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(first) = points.first() {
            let d = first.len();
            for p in &points {
                if p.len() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: p.len() });
                }
                if p.iter().any(|x| !x.is_finite()) {
                    return Err(invalid("point coordinates must be finite"));
                }
            }
        }
        Ok(PointCloud { points })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Header-less CSV, one point per row.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(r);
        let mut pts = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let p = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| invalid(format!("bad coordinate `{s}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            pts.push(p);
        }
        PointCloud::new(pts)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        for p in &self.points {
            wr.write_record(p.iter().map(|x| x.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simplex {
    /// Sorted vertex ids.
    pub vertices: Vec<usize>,
    pub value: f64,
}

impl Simplex {
    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }

    fn cmp_order(&self, other: &Simplex) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then(self.vertices.len().cmp(&other.vertices.len()))
            .then_with(|| self.vertices.cmp(&other.vertices))
    }
}

/// Simplices sorted by (value, dimension, vertex tuple).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Filtration {
    simplices: Vec<Simplex>,
}

impl Filtration {
    /// Sorts into canonical order; faces are checked by [`persistence`].
    pub fn new(mut simplices: Vec<Simplex>) -> Self {
        for s in &mut simplices {
            s.vertices.sort_unstable();
        }
        simplices.sort_by(|a, b| a.cmp_order(b));
        Filtration { simplices }
    }

    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    /// Boundary columns as sorted row indices. Fails when a face is missing
    /// or enters after its coface.
    pub fn boundary(&self) -> Result<Vec<Vec<usize>>> {
        let index: HashMap<&[usize], usize> =
            self.simplices.iter().enumerate().map(|(i, s)| (s.vertices.as_slice(), i)).collect();
        let mut cols = Vec::with_capacity(self.simplices.len());
        for (j, s) in self.simplices.iter().enumerate() {
            let mut col = Vec::new();
            if s.vertices.len() > 1 {
                for skip in 0..s.vertices.len() {
                    let face: Vec<usize> =
                        s.vertices.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v).collect();
                    match index.get(face.as_slice()) {
                        Some(&i) if i < j => col.push(i),
                        _ => {
                            return Err(invalid(format!("face {:?} of {:?} missing or later", face, s.vertices)))
                        }
                    }
                }
            }
            col.sort_unstable();
            cols.push(col);
        }
        Ok(cols)
    }
}

/// Vietoris–Rips filtration up to triangles with the Euclidean metric.
pub fn vr_filtration(cloud: &PointCloud, gamma_max: f64) -> Filtration {
    vr_filtration_with(cloud, gamma_max, euclidean)
}

pub fn vr_filtration_with<M>(cloud: &PointCloud, gamma_max: f64, metric: M) -> Filtration
where
    M: Fn(&[f64], &[f64]) -> f64,
{
    let n = cloud.len();
    let pts = cloud.points();
    let mut dist = vec![vec![f64::INFINITY; n]; n];
    let mut simplices: Vec<Simplex> = (0..n).map(|i| Simplex { vertices: vec![i], value: 0.0 }).collect();
    for i in 0..n {
        for j in i + 1..n {
            let d = metric(&pts[i], &pts[j]);
            if d <= gamma_max {
                dist[i][j] = d;
                dist[j][i] = d;
                simplices.push(Simplex { vertices: vec![i, j], value: d });
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            if dist[i][j].is_infinite() {
                continue;
            }
            for k in j + 1..n {
                let v = dist[i][j].max(dist[i][k]).max(dist[j][k]);
                if v.is_finite() {
                    simplices.push(Simplex { vertices: vec![i, j, k], value: v });
                }
            }
        }
    }
    Filtration::new(simplices)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PersistenceDiagram {
    pub h0: Vec<(f64, f64)>,
    pub h1: Vec<(f64, f64)>,
}

impl PersistenceDiagram {
    pub fn dim(&self, p: usize) -> &[(f64, f64)] {
        match p {
            0 => &self.h0,
            1 => &self.h1,
            _ => &[],
        }
    }

    /// Sorts each dimension so equal multisets compare equal.
    pub fn canonicalize(&mut self) {
        let key = |a: &(f64, f64), b: &(f64, f64)| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1));
        self.h0.sort_by(key);
        self.h1.sort_by(key);
    }

    /// Rows `dim,birth,death`; infinite deaths are written as `inf`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["dim", "birth", "death"])?;
        for p in 0..2 {
            for &(b, d) in self.dim(p) {
                let death = if d.is_infinite() { "inf".to_string() } else { d.to_string() };
                wr.write_record([p.to_string(), b.to_string(), death])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let mut out = PersistenceDiagram::default();
        for rec in rd.records() {
            let rec = rec?;
            if rec.len() != 3 {
                return Err(invalid("diagram rows need dim,birth,death"));
            }
            let num = |s: &str| -> Result<f64> {
                if s == "inf" {
                    Ok(f64::INFINITY)
                } else {
                    s.parse::<f64>().map_err(|e| invalid(format!("bad number `{s}`: {e}")))
                }
            };
            let pair = (num(&rec[1])?, num(&rec[2])?);
            match &rec[0] {
                "0" => out.h0.push(pair),
                "1" => out.h1.push(pair),
                other => return Err(invalid(format!("unsupported dimension `{other}`"))),
            }
        }
        Ok(out)
    }
}

fn add_columns(target: &mut Vec<usize>, other: &[usize]) {
    let mut out = Vec::with_capacity(target.len() + other.len());
    let (mut i, mut j) = (0, 0);
    while i < target.len() && j < other.len() {
        match target[i].cmp(&other[j]) {
            Ordering::Less => {
                out.push(target[i]);
                i += 1;
            }
            Ordering::Greater => {
                out.push(other[j]);
                j += 1;
            }
            Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&target[i..]);
    out.extend_from_slice(&other[j..]);
    *target = out;
}

/// Boundary-matrix reduction over Z/2 with clearing.
pub fn persistence(filt: &Filtration) -> Result<PersistenceDiagram> {
    let mut cols = filt.boundary()?;
    let simplices = filt.simplices();
    let n = cols.len();
    let mut pivot_owner: Vec<Option<usize>> = vec![None; n];
    let mut killed = vec![false; n];
    let max_dim = simplices.iter().map(Simplex::dim).max().unwrap_or(0);
    for d in (1..=max_dim).rev() {
        for j in 0..n {
            if simplices[j].dim() != d {
                continue;
            }
            if killed[j] {
                // Clearing: a creator already paired with a higher cell.
                cols[j].clear();
                continue;
            }
            while let Some(&low) = cols[j].last() {
                match pivot_owner[low] {
                    Some(k) => {
                        let other = std::mem::take(&mut cols[k]);
                        add_columns(&mut cols[j], &other);
                        cols[k] = other;
                    }
                    None => break,
                }
            }
            if let Some(&low) = cols[j].last() {
                pivot_owner[low] = Some(j);
                killed[low] = true;
            }
        }
    }
    let mut diag = PersistenceDiagram::default();
    for (i, s) in simplices.iter().enumerate() {
        let d = s.dim();
        if d > 1 {
            continue;
        }
        let death = if let Some(j) = pivot_owner[i] {
            simplices[j].value
        } else if !cols[i].is_empty() {
            // Negative cell: it destroys a class rather than creating one.
            continue;
        } else {
            f64::INFINITY
        };
        if death > s.value {
            let bar = (s.value, death);
            if d == 0 {
                diag.h0.push(bar);
            } else {
                diag.h1.push(bar);
            }
        }
    }
    diag.canonicalize();
    Ok(diag)
}

/// H0 bars from Kruskal-style union-find over the filtration's edges.
pub fn h0_union_find(filt: &Filtration) -> Vec<(f64, f64)> {
    let simplices = filt.simplices();
    let n_vertices = simplices.iter().filter(|s| s.dim() == 0).map(|s| s.vertices[0] + 1).max().unwrap_or(0);
    let mut parent: Vec<usize> = (0..n_vertices).collect();
    let mut birth = vec![f64::INFINITY; n_vertices];
    for s in simplices.iter().filter(|s| s.dim() == 0) {
        birth[s.vertices[0]] = s.value;
    }
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut bars = Vec::new();
    for s in simplices.iter().filter(|s| s.dim() == 1) {
        let (a, b) = (find(&mut parent, s.vertices[0]), find(&mut parent, s.vertices[1]));
        if a == b {
            continue;
        }
        // Elder rule: the younger root dies.
        let (old, young) = if (birth[a], a) <= (birth[b], b) { (a, b) } else { (b, a) };
        if s.value > birth[young] {
            bars.push((birth[young], s.value));
        }
        parent[young] = old;
    }
    for v in 0..n_vertices {
        if birth[v].is_finite() && find(&mut parent, v) == v {
            bars.push((birth[v], f64::INFINITY));
        }
    }
    bars.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    bars
}

/// Number of bars `(b, d]` containing each `γ`.
pub fn betti_curve(diag: &PersistenceDiagram, p: usize, gammas: &[f64]) -> Result<Vec<usize>> {
    if p > 1 {
        return Err(invalid(format!("homology dimension {p} not supported")));
    }
    let bars = diag.dim(p);
    Ok(gammas.iter().map(|&g| bars.iter().filter(|&&(b, d)| b < g && g <= d).count()).collect())
}

/// Bottleneck distance; infinite bars are matched among themselves by birth.
pub fn bottleneck_distance(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (a_inf, a_fin): (Vec<_>, Vec<_>) = a.iter().copied().partition(|p| p.1.is_infinite());
    let (b_inf, b_fin): (Vec<_>, Vec<_>) = b.iter().copied().partition(|p| p.1.is_infinite());
    if a_inf.len() != b_inf.len() {
        return f64::INFINITY;
    }
    let mut ab: Vec<f64> = a_inf.iter().map(|p| p.0).collect();
    let mut bb: Vec<f64> = b_inf.iter().map(|p| p.0).collect();
    ab.sort_by(f64::total_cmp);
    bb.sort_by(f64::total_cmp);
    let inf_cost = ab.iter().zip(&bb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    inf_cost.max(finite_bottleneck(&a_fin, &b_fin))
}

/// Max over dimensions 0 and 1.
pub fn diagram_bottleneck(a: &PersistenceDiagram, b: &PersistenceDiagram) -> f64 {
    bottleneck_distance(&a.h0, &b.h0).max(bottleneck_distance(&a.h1, &b.h1))
}

fn linf(p: (f64, f64), q: (f64, f64)) -> f64 {
    (p.0 - q.0).abs().max((p.1 - q.1).abs())
}

fn finite_bottleneck(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut cands = vec![0.0];
    cands.extend(a.iter().chain(b).map(|p| (p.1 - p.0) / 2.0));
    for &p in a {
        for &q in b {
            cands.push(linf(p, q));
        }
    }
    cands.sort_by(f64::total_cmp);
    cands.dedup();
    let (mut lo, mut hi) = (0, cands.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if perfect_matching(a, b, cands[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    cands[lo]
}

/// Left side: points of `a` then diagonal images of `b`; right side: points
/// of `b` then diagonal images of `a`.
fn perfect_matching(a: &[(f64, f64)], b: &[(f64, f64)], r: f64) -> bool {
    let (n, m) = (a.len(), b.len());
    let size = n + m;
    let half = |p: (f64, f64)| (p.1 - p.0) / 2.0;
    let adj: Vec<Vec<usize>> = (0..size)
        .map(|u| {
            if u < n {
                let mut out: Vec<usize> = (0..m).filter(|&j| linf(a[u], b[j]) <= r).collect();
                if half(a[u]) <= r {
                    out.push(m + u);
                }
                out
            } else {
                let j = u - n;
                let mut out = Vec::new();
                if half(b[j]) <= r {
                    out.push(j);
                }
                out.extend(m..m + n);
                out
            }
        })
        .collect();
    let mut match_right: Vec<Option<usize>> = vec![None; size];
    fn augment(u: usize, adj: &[Vec<usize>], seen: &mut [bool], mr: &mut [Option<usize>]) -> bool {
        for &v in &adj[u] {
            if seen[v] {
                continue;
            }
            seen[v] = true;
            if mr[v].is_none_or(|w| augment(w, adj, seen, mr)) {
                mr[v] = Some(u);
                return true;
            }
        }
        false
    }
    (0..size).all(|u| {
        let mut seen = vec![false; size];
        augment(u, &adj, &mut seen, &mut match_right)
    })
}
