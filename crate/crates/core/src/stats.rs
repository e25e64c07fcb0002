//! Small descriptive-statistics helpers shared by the simulations.

use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::{erf, gamma::ln_gamma};
use std::f64::consts::{PI, SQRT_2};

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal quantile, polished with Halley steps on [`norm_cdf`].
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let mut x = -SQRT_2 * erf::erfc_inv(2.0 * p);
    for _ in 0..2 {
        let e = norm_cdf(x) - p;
        let u = e / norm_pdf(x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// Student t with integer degrees of freedom; the CDF uses the exact
/// finite trigonometric series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntStudentT {
    pub nu: u32,
}

impl IntStudentT {
    pub fn new(nu: u32) -> Self {
        assert!(nu >= 1, "degrees of freedom must be positive");
        IntStudentT { nu }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t.is_infinite() {
            return if t > 0.0 { 1.0 } else { 0.0 };
        }
        let n = self.nu as f64;
        let theta = (t / n.sqrt()).atan();
        let (s, c) = theta.sin_cos();
        let c2 = c * c;
        // a = P(|T| < |t|) with the sign of t.
        let a = if self.nu % 2 == 1 {
            let mut sum = 0.0;
            if self.nu > 1 {
                let mut term = 1.0;
                sum = 1.0;
                for k in 1..=(self.nu - 3) / 2 {
                    term *= c2 * (2 * k) as f64 / (2 * k + 1) as f64;
                    sum += term;
                }
            }
            2.0 / PI * (theta + s * c * sum)
        } else {
            let mut term = 1.0;
            let mut sum = 1.0;
            for k in 1..=(self.nu - 2) / 2 {
                term *= c2 * (2 * k - 1) as f64 / (2 * k) as f64;
                sum += term;
            }
            s * sum
        };
        0.5 * (1.0 + a)
    }

    pub fn ln_pdf(&self, t: f64) -> f64 {
        let n = self.nu as f64;
        ln_gamma((n + 1.0) / 2.0) - ln_gamma(n / 2.0) - 0.5 * (n * PI).ln() - (n + 1.0) / 2.0 * (1.0 + t * t / n).ln()
    }

    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if p >= 1.0 {
            return f64::INFINITY;
        }
        let mut x = StudentsT::new(0.0, 1.0, self.nu as f64).expect("valid t").inverse_cdf(p);
        if !x.is_finite() {
            x = 0.0;
        }
        for _ in 0..4 {
            let step = (self.cdf(x) - p) / self.ln_pdf(x).exp();
            if !step.is_finite() {
                break;
            }
            x -= step;
        }
        x
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// 1-based ranks with ties replaced by their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// Kendall's tau-a via an O(n log n) merge-sort inversion count.
/// Assumes no ties, which holds for continuous samples.
pub fn kendall_tau(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut seq: Vec<f64> = idx.iter().map(|&i| ys[i]).collect();
    let mut buf = seq.clone();
    let inversions = merge_count(&mut seq, &mut buf);
    let pairs = (n * (n - 1) / 2) as f64;
    (pairs - 2.0 * inversions as f64) / pairs
}

fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = merge_count(&mut v[..mid], &mut buf[..mid]) + merge_count(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[i] <= v[j] {
            buf[k] = v[i];
            i += 1;
        } else {
            buf[k] = v[j];
            inv += (mid - i) as u64;
            j += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    inv
}
