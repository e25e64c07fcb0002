//! Signal Temporal Logic over uniformly sampled signals.
//!
//! Formulas are evaluated on whole traces bottom-up, so nested temporal
//! operators cost one pass per subformula. Time arguments are mapped to the
//! nearest sample index. Interval `[a, b]` covers the sample offsets
//! `ceil(a/dt)..=floor(b/dt)`. Windows running past the end of the signal
//! use the samples that exist. Empty windows are false for `Eventually` /
//! `Until` (robustness `f64::MIN`) and true for `Always` (`f64::MAX`).

use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    values: Vec<Vec<f64>>,
    dt: f64,
    t0: f64,
}

impl Signal {
    pub fn new(values: Vec<Vec<f64>>, dt: f64, t0: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("signal must be non-empty"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("dt must be positive, got {dt}")));
        }
        let dim = values[0].len();
        if let Some(v) = values.iter().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
        }
        Ok(Signal { values, dt, t0 })
    }

    /// One-dimensional signal with `dt = 1`, `t0 = 0`.
    pub fn scalar(xs: &[f64]) -> Self {
        Signal::new(xs.iter().map(|&x| vec![x]).collect(), 1.0, 0.0).expect("non-empty scalar signal")
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Signal duration `|ξ| = len · dt`.
    pub fn duration(&self) -> f64 {
        self.len() as f64 * self.dt
    }

    pub fn time_at(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Nearest sample index for time `t`.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let k = ((t - self.t0) / self.dt).round();
        if !(k >= 0.0 && (k as usize) < self.len()) {
            return Err(invalid(format!("time {t} outside signal domain")));
        }
        Ok(k as usize)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim()).map(|i| format!("x{i}")));
        wr.write_record(&header)?;
        for (k, v) in self.values.iter().enumerate() {
            let mut row = vec![self.time_at(k).to_string()];
            row.extend(v.iter().map(|x| x.to_string()));
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads `t,x1..xn` rows; `dt` comes from the first two timestamps and
    /// sampling must be uniform.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut times = Vec::new();
        let mut values = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let nums: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| invalid(format!("bad number `{s}`: {e}"))))
                .collect::<Result<_>>()?;
            if nums.len() < 2 {
                return Err(invalid("signal rows need t and at least one value"));
            }
            times.push(nums[0]);
            values.push(nums[1..].to_vec());
        }
        if times.is_empty() {
            return Err(invalid("signal must be non-empty"));
        }
        let dt = if times.len() > 1 { times[1] - times[0] } else { 1.0 };
        for (k, &t) in times.iter().enumerate() {
            if (t - (times[0] + k as f64 * dt)).abs() > 1e-6 * dt.abs().max(1.0) {
                return Err(invalid(format!("non-uniform sampling at row {k}")));
            }
        }
        Signal::new(values, dt, times[0])
    }
}

/// Closed time interval `[lo, hi]`; `hi` may be `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0 && lo <= hi && lo.is_finite()) {
            return Err(invalid(format!("interval [{lo}, {hi}] must satisfy 0 <= lo <= hi")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn unbounded(lo: f64) -> Result<Self> {
        Interval::new(lo, f64::INFINITY)
    }

    /// Inclusive sample-offset range, `None` for the upper end when unbounded.
    fn offsets(&self, dt: f64) -> (usize, Option<usize>) {
        let lo = (self.lo / dt - EPS).ceil().max(0.0) as usize;
        let hi = if self.hi.is_finite() {
            let h = (self.hi / dt + EPS).floor();
            if h < lo as f64 {
                // Interval narrower than one sample with no grid point inside.
                return (1, Some(0));
            }
            Some(h as usize)
        } else {
            None
        };
        (lo, hi)
    }

    /// Absolute index window `[start, end]` for evaluation at `k`, clipped to
    /// the signal; `None` when empty.
    fn window(&self, k: usize, n: usize, dt: f64) -> Option<(usize, usize)> {
        let (lo, hi) = self.offsets(dt);
        if let Some(h) = hi {
            if h < lo {
                return None;
            }
        }
        let start = k.checked_add(lo)?;
        if start >= n {
            return None;
        }
        let end = match hi {
            Some(h) => k.saturating_add(h).min(n - 1),
            None => n - 1,
        };
        Some((start, end))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Formula {
    True,
    /// `coeffs · x - c >= 0`.
    Predicate { coeffs: Vec<f64>, c: f64 },
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Eventually(Interval, Box<Formula>),
    Always(Interval, Box<Formula>),
    /// `lhs U_I rhs`: some `t'` in `t + I` satisfies `rhs` and `lhs` holds on `[t, t')`.
    Until(Interval, Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn pred(coeffs: Vec<f64>, c: f64) -> Self {
        Formula::Predicate { coeffs, c }
    }

    /// `x[i] >= c` in a `dim`-dimensional signal.
    pub fn ge(dim: usize, i: usize, c: f64) -> Self {
        let mut coeffs = vec![0.0; dim];
        coeffs[i] = 1.0;
        Formula::pred(coeffs, c)
    }

    /// `x[i] <= c` in a `dim`-dimensional signal.
    pub fn le(dim: usize, i: usize, c: f64) -> Self {
        let mut coeffs = vec![0.0; dim];
        coeffs[i] = -1.0;
        Formula::pred(coeffs, -c)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        Formula::Not(Box::new(self))
    }

    pub fn and(self, other: Formula) -> Self {
        Formula::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Formula) -> Self {
        Formula::Or(Box::new(self), Box::new(other))
    }

    pub fn eventually(i: Interval, f: Formula) -> Self {
        Formula::Eventually(i, Box::new(f))
    }

    pub fn always(i: Interval, f: Formula) -> Self {
        Formula::Always(i, Box::new(f))
    }

    pub fn until(i: Interval, lhs: Formula, rhs: Formula) -> Self {
        Formula::Until(i, Box::new(lhs), Box::new(rhs))
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        match self {
            Formula::True => Ok(()),
            Formula::Predicate { coeffs, .. } => {
                if coeffs.len() == dim {
                    Ok(())
                } else {
                    Err(Error::DimensionMismatch { expected: dim, got: coeffs.len() })
                }
            }
            Formula::Not(f) | Formula::Eventually(_, f) | Formula::Always(_, f) => f.check_dim(dim),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(_, a, b) => {
                a.check_dim(dim)?;
                b.check_dim(dim)
            }
        }
    }
}

/// Semiring-like interface so one traversal serves both semantics.
trait Domain: Copy {
    const TOP: Self;
    const BOTTOM: Self;
    fn atom(margin: f64) -> Self;
    fn neg(self) -> Self;
    fn meet(self, o: Self) -> Self;
    fn join(self, o: Self) -> Self;
}

impl Domain for bool {
    const TOP: bool = true;
    const BOTTOM: bool = false;
    fn atom(margin: f64) -> bool {
        margin >= 0.0
    }
    fn neg(self) -> bool {
        !self
    }
    fn meet(self, o: bool) -> bool {
        self && o
    }
    fn join(self, o: bool) -> bool {
        self || o
    }
}

impl Domain for f64 {
    const TOP: f64 = f64::MAX;
    const BOTTOM: f64 = f64::MIN;
    fn atom(margin: f64) -> f64 {
        margin
    }
    fn neg(self) -> f64 {
        -self
    }
    fn meet(self, o: f64) -> f64 {
        self.min(o)
    }
    fn join(self, o: f64) -> f64 {
        self.max(o)
    }
}

fn trace<D: Domain>(f: &Formula, sig: &Signal) -> Vec<D> {
    let n = sig.len();
    let dt = sig.dt;
    match f {
        Formula::True => vec![D::TOP; n],
        Formula::Predicate { coeffs, c } => sig
            .values
            .iter()
            .map(|x| D::atom(coeffs.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - c))
            .collect(),
        Formula::Not(g) => trace::<D>(g, sig).into_iter().map(D::neg).collect(),
        Formula::And(a, b) => {
            let (ta, tb) = (trace::<D>(a, sig), trace::<D>(b, sig));
            ta.into_iter().zip(tb).map(|(x, y)| x.meet(y)).collect()
        }
        Formula::Or(a, b) => {
            let (ta, tb) = (trace::<D>(a, sig), trace::<D>(b, sig));
            ta.into_iter().zip(tb).map(|(x, y)| x.join(y)).collect()
        }
        Formula::Eventually(i, g) => {
            let tg = trace::<D>(g, sig);
            (0..n)
                .map(|k| match i.window(k, n, dt) {
                    Some((s, e)) => tg[s..=e].iter().fold(D::BOTTOM, |acc, &v| acc.join(v)),
                    None => D::BOTTOM,
                })
                .collect()
        }
        Formula::Always(i, g) => {
            let tg = trace::<D>(g, sig);
            (0..n)
                .map(|k| match i.window(k, n, dt) {
                    Some((s, e)) => tg[s..=e].iter().fold(D::TOP, |acc, &v| acc.meet(v)),
                    None => D::TOP,
                })
                .collect()
        }
        Formula::Until(i, lhs, rhs) => {
            let (tl, tr) = (trace::<D>(lhs, sig), trace::<D>(rhs, sig));
            (0..n)
                .map(|k| {
                    let Some((s, e)) = i.window(k, n, dt) else {
                        return D::BOTTOM;
                    };
                    // Running meet of lhs over [k, j).
                    let mut prefix = tl[k..s].iter().fold(D::TOP, |acc, &v| acc.meet(v));
                    let mut best = D::BOTTOM;
                    for j in s..=e {
                        best = best.join(tr[j].meet(prefix));
                        prefix = prefix.meet(tl[j]);
                    }
                    best
                })
                .collect()
        }
    }
}

/// Boolean satisfaction at every sample.
pub fn bool_trace(f: &Formula, sig: &Signal) -> Result<Vec<bool>> {
    f.check_dim(sig.dim())?;
    Ok(trace::<bool>(f, sig))
}

/// Robustness at every sample.
pub fn robustness_trace(f: &Formula, sig: &Signal) -> Result<Vec<f64>> {
    f.check_dim(sig.dim())?;
    Ok(trace::<f64>(f, sig))
}

pub fn eval_bool(f: &Formula, sig: &Signal, t: f64) -> Result<bool> {
    let k = sig.index_of(t)?;
    Ok(bool_trace(f, sig)?[k])
}

pub fn eval_robustness(f: &Formula, sig: &Signal, t: f64) -> Result<f64> {
    let k = sig.index_of(t)?;
    Ok(robustness_trace(f, sig)?[k])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResilienceSpec {
    /// Maximum recovery time.
    pub alpha: f64,
    /// Minimum durability time.
    pub beta: f64,
    pub inner: Formula,
}

impl ResilienceSpec {
    pub fn new(alpha: f64, beta: f64, inner: Formula) -> Result<Self> {
        if !(alpha >= 0.0 && beta >= 0.0) {
            return Err(invalid("alpha and beta must be non-negative"));
        }
        Ok(ResilienceSpec { alpha, beta, inner })
    }

    /// Whole samples allowed before recovery.
    fn recovery_steps(&self, dt: f64) -> usize {
        (self.alpha / dt + EPS).floor() as usize
    }

    /// Samples of compliance needed for durability (at least one).
    fn durable_samples(&self, dt: f64) -> usize {
        ((self.beta / dt - EPS).ceil().max(1.0)) as usize
    }

    /// The equivalent STL formula `¬φ U_[0,α] □_[0,β) φ` for sampling period `dt`.
    ///
    /// Durability covers the half-open window `[0, β)`, i.e. `ceil(β/dt)`
    /// samples, so `t_d >= β` and the formula agree on sample grids.
    pub fn formula(&self, dt: f64) -> Formula {
        let hold = (self.durable_samples(dt) - 1) as f64 * dt;
        let rec = self.recovery_steps(dt) as f64 * dt;
        Formula::until(
            Interval { lo: 0.0, hi: rec },
            self.inner.clone().not(),
            Formula::always(Interval { lo: 0.0, hi: hold }, self.inner.clone()),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResilienceOutcome {
    pub t_r: f64,
    pub t_d: f64,
    /// `(alpha - t_r, t_d - beta)`.
    pub pair: (f64, f64),
    /// Compliance was observed within the signal.
    pub recovered: bool,
    /// Compliance lasted to the final sample, so `t_d` is censored.
    pub censored: bool,
    pub satisfied: bool,
}

/// Recovery and durability times from `t`.
///
/// `satisfied` requires an observed recovery within `alpha`, followed by
/// at least `beta` of compliance or compliance through the end of the signal.
pub fn eval_resilience(spec: &ResilienceSpec, sig: &Signal, t: f64) -> Result<ResilienceOutcome> {
    let k = sig.index_of(t)?;
    let ok = bool_trace(&spec.inner, sig)?;
    Ok(resilience_from_trace(spec, &ok, k, sig.dt))
}

/// Same as [`eval_resilience`] on a precomputed satisfaction trace.
pub fn resilience_from_trace(spec: &ResilienceSpec, ok: &[bool], k: usize, dt: f64) -> ResilienceOutcome {
    let n = ok.len();
    let first = (k..n).find(|&j| ok[j]);
    let (rec_steps, recovered) = match first {
        Some(j) => (j - k, true),
        None => (n - k, false),
    };
    let start = k + rec_steps;
    let dur_steps = (start..n).find(|&j| !ok[j]).map_or(n - start, |j| j - start);
    let censored = recovered && start + dur_steps == n;
    let t_r = rec_steps as f64 * dt;
    let t_d = dur_steps as f64 * dt;
    let satisfied = recovered
        && rec_steps <= spec.recovery_steps(dt)
        && (dur_steps >= spec.durable_samples(dt) || censored);
    ResilienceOutcome {
        t_r,
        t_d,
        pair: (spec.alpha - t_r, t_d - spec.beta),
        recovered,
        censored,
        satisfied,
    }
}
