//! Wireless networked control: a scalar unstable plant observed over a
//! scheduled link, age-of-information driven estimation, energy-aware
//! schedule planning under an error budget and a chance constraint, and
//! chi-square detection of a change in process noise.

use crate::error::{invalid, Error, Result};
use crate::rng::{stream, Rng};
use crate::series::Series;
use crate::stats::norm_cdf;
use crate::stl::{eval_resilience, Formula, ResilienceSpec, Signal};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plant {
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
    pub x: f64,
}

impl Plant {
    /// `x ← a·x + b·u + σ·noise`; returns the new state.
    pub fn step(&mut self, u: f64, noise: f64) -> f64 {
        self.x = self.a * self.x + self.b * u + self.sigma * noise;
        self.x
    }

    pub fn step_rng(&mut self, u: f64, rng: &mut Rng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.step(u, z)
    }
}

/// Age of information after a step with or without a delivered update.
pub fn update_aoi(eta: u64, scheduled: bool) -> u64 {
    if scheduled {
        0
    } else {
        eta + 1
    }
}

/// `Σ_{i<η} a^{2i}`: variance gain of an estimate `η` steps stale.
pub fn variance_gain(eta: u64, a: f64) -> f64 {
    (0..eta).map(|i| a.powi(2 * i as i32)).sum()
}

/// Error budget of an estimate `η` steps stale, `Σ_{i<η} a^{2i}·σ`.
pub fn error_budget(eta: u64, a: f64, sigma: f64) -> f64 {
    variance_gain(eta, a) * sigma
}

/// Deadbeat control towards `target` from the estimate.
pub fn deadbeat(a: f64, b: f64, estimate: f64, target: f64) -> f64 {
    (target - a * estimate) / b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WncsParams {
    pub a: f64,
    pub b: f64,
    pub sigma_initial: f64,
    pub sigma_changed: f64,
    pub change_at: usize,
    pub steps: usize,
    pub target: f64,
    pub delta: f64,
    pub error_cap: f64,
    pub q: f64,
    pub power: f64,
    pub horizon: u64,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub significance: f64,
    pub window: usize,
    pub min_samples: usize,
    pub sigma_floor: f64,
    /// Extra transmission whenever `|x - target|` exceeds this.
    pub trigger: Option<f64>,
}

impl Default for WncsParams {
    fn default() -> Self {
        WncsParams {
            a: 1.1,
            b: -0.25,
            sigma_initial: 0.02,
            sigma_changed: 0.15,
            change_at: 200,
            steps: 500,
            target: 0.0,
            delta: 1.0,
            error_cap: 1.0,
            q: 1.0,
            power: 1.0,
            horizon: 20,
            alpha: 20.0,
            beta: 10.0,
            epsilon: 0.01,
            significance: 0.05,
            window: 30,
            min_samples: 10,
            sigma_floor: 1e-4,
            trigger: Some(1.0),
        }
    }
}

impl WncsParams {
    pub fn validate(&self) -> Result<()> {
        if self.b == 0.0 {
            return Err(invalid("b must be non-zero for deadbeat control"));
        }
        if !(self.sigma_initial > 0.0 && self.sigma_changed > 0.0 && self.sigma_floor > 0.0) {
            return Err(invalid("noise levels must be positive"));
        }
        if !(self.delta > 0.0 && self.error_cap > 0.0 && self.horizon >= 1) {
            return Err(invalid("delta, error cap and horizon must be positive"));
        }
        if !(0.0 < self.epsilon && self.epsilon < 1.0 && 0.0 < self.significance && self.significance < 1.0) {
            return Err(invalid("probabilities must lie in (0, 1)"));
        }
        if self.min_samples < 2 || self.window < self.min_samples {
            return Err(invalid("need 2 ≤ min_samples ≤ window"));
        }
        Ok(())
    }

    pub fn resilience_spec(&self) -> Result<ResilienceSpec> {
        ResilienceSpec::new(self.alpha, self.beta, Formula::le(1, 0, self.delta))
    }
}

/// Chosen transmission period and its per-step cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plan {
    pub period: u64,
    pub cost: f64,
    /// No period met the constraints; transmit every step.
    pub degraded: bool,
}

/// Probability that a zero-mean Gaussian deviation with the variance of
/// a `gap`-step-stale estimate exceeds `delta`.
pub fn tail_probability(gap: u64, a: f64, sigma: f64, delta: f64) -> f64 {
    let sd = sigma * variance_gain(gap, a).sqrt();
    if sd == 0.0 {
        return 0.0;
    }
    2.0 * (1.0 - norm_cdf(delta / sd))
}

/// Union bound on leaving the `delta` band somewhere in a window of
/// `window` steps under period `period`, maximised over phase.
pub fn window_violation_bound(period: u64, window: u64, a: f64, sigma: f64, delta: f64) -> f64 {
    let tails: Vec<f64> = (1..=period).map(|g| tail_probability(g, a, sigma, delta)).collect();
    (0..period).map(|phase| (0..window.max(1)).map(|k| tails[((phase + k) % period) as usize]).sum::<f64>()).fold(0.0, f64::max)
}

/// Whether a period meets the error budget and the chance constraint.
pub fn period_feasible(p: &WncsParams, period: u64, sigma: f64) -> bool {
    error_budget(period, p.a, sigma) <= p.error_cap
        && window_violation_bound(period, p.beta.ceil() as u64, p.a, sigma, p.delta) <= p.epsilon
}

/// Expected average cost per step of a period: one transmission plus the
/// deadbeat correction of an estimate that is `period` steps stale.
pub fn period_cost(p: &WncsParams, period: u64, sigma: f64) -> f64 {
    let gain = (p.a / p.b).powi(2);
    (p.power + p.q * gain * sigma * sigma * variance_gain(period, p.a)) / period as f64
}

/// Cheapest feasible period in `1..=horizon`; transmit-always if none.
pub fn plan(p: &WncsParams, sigma: f64) -> Plan {
    let mut best: Option<Plan> = None;
    for period in 1..=p.horizon {
        if !period_feasible(p, period, sigma) {
            continue;
        }
        let cost = period_cost(p, period, sigma);
        if best.is_none_or(|b| cost < b.cost - 1e-15) {
            best = Some(Plan { period, cost, degraded: false });
        }
    }
    best.unwrap_or(Plan { period: 1, cost: period_cost(p, 1, sigma), degraded: true })
}

/// A normalised innovation: `value` is the raw prediction error at a
/// delivery, `gain` its variance gain in units of σ².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub value: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Detection {
    Keep,
    Update(f64),
}

/// Variance ratio estimate `Σe²/Σw` of σ, floored.
pub fn ratio_estimate(residuals: &[Residual], floor: f64) -> f64 {
    let num: f64 = residuals.iter().map(|r| r.value * r.value).sum();
    let den: f64 = residuals.iter().map(|r| r.gain).sum();
    if den > 0.0 { (num / den).sqrt().max(floor) } else { floor }
}

/// Index of the most likely variance change: samples before it keep
/// `sigma0`, samples from it on get their own maximum-likelihood level.
pub fn change_point(residuals: &[Residual], sigma0: f64, floor: f64) -> usize {
    let z2: Vec<f64> = residuals.iter().map(|r| r.value * r.value / r.gain).collect();
    let v0 = sigma0 * sigma0;
    let ll0 = |z: &f64| -0.5 * (v0.ln() + z / v0);
    let mut best = (f64::NEG_INFINITY, 0);
    for m in 0..z2.len() {
        let tail = &z2[m..];
        let v = (tail.iter().sum::<f64>() / tail.len() as f64).max(floor * floor);
        let ll = z2[..m].iter().map(ll0).sum::<f64>() + tail.iter().map(|z| -0.5 * (v.ln() + z / v)).sum::<f64>();
        if ll > best.0 {
            best = (ll, m);
        }
    }
    best.1
}

fn chi_bounds(n: usize, significance: f64) -> Result<(f64, f64)> {
    let chi = ChiSquared::new(n as f64).map_err(|e| invalid(e.to_string()))?;
    Ok((chi.inverse_cdf(significance / 2.0), chi.inverse_cdf(1.0 - significance / 2.0)))
}

/// Two-sided chi-square test of `H0: σ = sigma0` on gain-normalised
/// residuals. On rejection, returns the ratio estimate over the samples
/// after the most likely change point.
pub fn detect_stressor(residuals: &[Residual], sigma0: f64, significance: f64, min_samples: usize, floor: f64) -> Result<Detection> {
    let n = residuals.len();
    if n < min_samples.max(1) {
        return Err(Error::InsufficientData(format!("{n} residuals, need {min_samples}")));
    }
    let stat: f64 = residuals.iter().map(|r| r.value * r.value / r.gain).sum::<f64>() / (sigma0 * sigma0);
    let (lo, hi) = chi_bounds(n, significance)?;
    if (lo..=hi).contains(&stat) {
        return Ok(Detection::Keep);
    }
    let m = change_point(residuals, sigma0, floor);
    Ok(Detection::Update(ratio_estimate(&residuals[m..], floor)))
}

/// Upper confidence bound on σ from `n` residuals with estimate `sigma`.
pub fn sigma_upper(sigma: f64, n: usize, significance: f64) -> Result<f64> {
    if n == 0 {
        return Ok(f64::INFINITY);
    }
    let (lo, _) = chi_bounds(n, significance)?;
    Ok(sigma * (n as f64 / lo).sqrt())
}

/// Controller state for one design.
#[derive(Debug, Clone)]
pub struct Controller {
    pub estimate: f64,
    pub aoi: u64,
    pub sigma_hat: f64,
    pub plan: Plan,
    pub adaptive: bool,
    pub residuals: Vec<Residual>,
    /// Residuals gathered since the last detected change, if still fewer
    /// than the test needs.
    pub burn_in: Option<usize>,
    /// σ̂ comes from data rather than the initial belief.
    pub estimated: bool,
    last_u: f64,
}

impl Controller {
    pub fn new(p: &WncsParams, x0: f64, adaptive: bool) -> Self {
        Controller {
            estimate: x0,
            aoi: 0,
            sigma_hat: p.sigma_initial,
            plan: plan(p, p.sigma_initial),
            adaptive,
            residuals: Vec::new(),
            burn_in: None,
            estimated: false,
            last_u: 0.0,
        }
    }

    /// Decides whether the sensor transmits this step: when the age would
    /// reach the planned period, or the state has left the trigger band.
    pub fn wants_update(&self, p: &WncsParams, x: f64) -> bool {
        self.aoi + 1 >= self.plan.period || p.trigger.is_some_and(|th| (x - p.target).abs() > th)
    }

    fn adapt(&mut self, p: &WncsParams) {
        let n = self.residuals.len();
        if self.burn_in.is_some() {
            self.sigma_hat = ratio_estimate(&self.residuals, p.sigma_floor);
            self.burn_in = (n < p.min_samples).then_some(n);
        } else if n >= p.min_samples {
            if let Ok(Detection::Update(_)) = detect_stressor(&self.residuals, self.sigma_hat, p.significance, p.min_samples, p.sigma_floor) {
                let m = change_point(&self.residuals, self.sigma_hat, p.sigma_floor);
                self.residuals.drain(..m);
                self.sigma_hat = ratio_estimate(&self.residuals, p.sigma_floor);
                self.burn_in = (self.residuals.len() < p.min_samples).then_some(self.residuals.len());
                self.estimated = true;
            }
        }
        if self.estimated {
            // Plan against the upper confidence bound of the estimate.
            let sigma = sigma_upper(self.sigma_hat, self.residuals.len(), p.significance).unwrap_or(f64::INFINITY);
            self.plan = plan(p, sigma);
        }
    }

    /// One control cycle given the true plant state. Returns the control
    /// and whether an update was delivered.
    pub fn cycle(&mut self, p: &WncsParams, x: f64) -> (f64, bool) {
        // Propagate the estimate with the model, then maybe correct it.
        let predicted = p.a * self.estimate + p.b * self.last_u;
        let send = self.wants_update(p, x);
        if send {
            let gap = self.aoi + 1;
            self.residuals.push(Residual { value: x - predicted, gain: variance_gain(gap, p.a) });
            if self.residuals.len() > p.window {
                self.residuals.remove(0);
            }
            self.estimate = x;
            if self.adaptive {
                self.adapt(p);
            }
        } else {
            self.estimate = predicted;
        }
        self.aoi = update_aoi(self.aoi, send);
        let u = deadbeat(p.a, p.b, self.estimate, p.target);
        self.last_u = u;
        (u, send)
    }
}

/// Runs robust (fixed plan) and resilient (detect and re-plan) designs on
/// the same noise. Columns: t, abs_err_robust, abs_err_resilient,
/// scheduled_robust, scheduled_resilient, sigma_hat.
pub fn run_wncs_usecase(p: &WncsParams, seed: u64) -> Result<Series> {
    p.validate()?;
    let mut rng = stream(seed, "wncs/noise");
    let noise: Vec<f64> = (0..p.steps).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut plants = [Plant { a: p.a, b: p.b, sigma: p.sigma_initial, x: p.target }; 2];
    let mut ctrls = [Controller::new(p, p.target, false), Controller::new(p, p.target, true)];
    let mut out = Series::new(&["t", "abs_err_robust", "abs_err_resilient", "scheduled_robust", "scheduled_resilient", "sigma_hat"]);
    for (t, &z) in noise.iter().enumerate() {
        let mut row = vec![t as f64, 0.0, 0.0, 0.0, 0.0, 0.0];
        for d in 0..2 {
            let (u, sent) = ctrls[d].cycle(p, plants[d].x);
            row[1 + d] = (plants[d].x - p.target).abs();
            row[3 + d] = sent as u8 as f64;
            plants[d].sigma = if t >= p.change_at { p.sigma_changed } else { p.sigma_initial };
            plants[d].step(u, z);
        }
        row[5] = ctrls[1].sigma_hat;
        out.push(row);
    }
    Ok(out)
}

/// Checks the resilience requirement on a deviation trace: every time
/// the band is left at or after `from`, the trace must return within α
/// and then stay inside for β (or until the end).
pub fn resilience_holds(p: &WncsParams, deviation: &[f64], from: usize) -> Result<bool> {
    let spec = p.resilience_spec()?;
    let sig = Signal::scalar(deviation);
    for k in from.max(1)..deviation.len() {
        let onset = deviation[k] > p.delta && deviation[k - 1] <= p.delta;
        if onset && !eval_resilience(&spec, &sig, k as f64)?.satisfied {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plant_examples() {
        let mut pl = Plant { a: 1.1, b: -0.25, sigma: 0.0, x: 1.0 };
        assert!((pl.step(0.0, 0.3) - 1.1).abs() < 1e-15);
        let u = deadbeat(1.1, -0.25, pl.x, 0.5);
        assert!((pl.step(u, 0.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn aoi_examples() {
        assert_eq!(update_aoi(7, true), 0);
        assert_eq!(update_aoi(0, false), 1);
        assert_eq!(update_aoi(3, false), 4);
        for eta in 0..20 {
            assert_eq!(update_aoi(update_aoi(eta, false), false), eta + 2);
        }
    }

    #[test]
    fn budget_examples() {
        assert_eq!(error_budget(0, 1.1, 0.02), 0.0);
        assert!((error_budget(1, 1.1, 0.02) - 0.02).abs() < 1e-15);
        assert!((error_budget(3, 1.1, 0.02) - 0.073482).abs() < 1e-12);
        for eta in 0..30 {
            assert!(error_budget(eta + 1, 1.1, 0.02) > error_budget(eta, 1.1, 0.02));
        }
    }

    #[test]
    fn plan_examples() {
        let p = WncsParams::default();
        let chosen = plan(&p, 0.02);
        let largest = (1..=p.horizon).filter(|&e| error_budget(e, p.a, 0.02) <= p.error_cap).max().unwrap();
        assert_eq!((chosen.period, largest), (12, 12));
        assert!(!chosen.degraded);
        // The chance constraint binds before the budget does.
        assert_eq!(plan(&p, 0.15).period, 3);
        assert!(error_budget(4, p.a, 0.15) <= p.error_cap);
        // Tiny noise: the sparsest schedule.
        assert_eq!(plan(&p, 1e-9).period, p.horizon);
        // η = 1 already breaks the budget.
        let d = plan(&p, 1.5);
        assert!(d.degraded && d.period == 1);
    }

    #[test]
    fn detection_examples() {
        let zeros = vec![Residual { value: 0.0, gain: 1.0 }; 12];
        assert_eq!(detect_stressor(&zeros, 0.02, 0.05, 10, 1e-4).unwrap(), Detection::Update(1e-4));
        assert!(detect_stressor(&zeros[..5], 0.02, 0.05, 10, 1e-4).is_err());
    }

    #[test]
    fn no_change_keeps_designs_identical() {
        let p = WncsParams { sigma_changed: 0.02, ..Default::default() };
        let s = run_wncs_usecase(&p, 3).unwrap();
        let (r, a) = (s.column("abs_err_robust").unwrap(), s.column("abs_err_resilient").unwrap());
        let same = r.iter().zip(&a).filter(|(x, y)| x == y).count();
        assert!(same as f64 >= 0.9 * r.len() as f64);
    }
}
