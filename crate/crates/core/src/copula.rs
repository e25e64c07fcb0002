//! Bivariate copula families, D-vine densities and a Gaussian-copula
//! failure sampler driven by a dependency matrix.

use crate::error::{invalid, Error, Result};
use crate::stats::{average_ranks, norm_cdf, norm_quantile, IntStudentT};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

const H_INV_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Bivariate {
    /// Independence.
    Pi,
    /// Comonotone upper bound.
    M,
    /// Countermonotone lower bound.
    W,
    Gaussian { rho: f64 },
    StudentT { rho: f64, nu: u32 },
    Clayton { theta: f64 },
    Gumbel { theta: f64 },
    /// `theta = 0` behaves as independence.
    Frank { theta: f64 },
}

fn check_unit(u: f64, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid(format!("({u}, {v}) outside the unit square")))
    }
}

fn t_dist(nu: u32) -> IntStudentT {
    IntStudentT::new(nu)
}

impl Bivariate {
    pub fn student_t(rho: f64) -> Self {
        Bivariate::StudentT { rho, nu: 4 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Bivariate::Pi | Bivariate::M | Bivariate::W => true,
            Bivariate::Gaussian { rho } => rho > -1.0 && rho < 1.0,
            Bivariate::StudentT { rho, nu } => rho > -1.0 && rho < 1.0 && nu > 2,
            Bivariate::Clayton { theta } => theta > 0.0 && theta.is_finite(),
            Bivariate::Gumbel { theta } => theta >= 1.0 && theta.is_finite(),
            Bivariate::Frank { theta } => theta.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid copula parameters {self:?}")))
        }
    }

    /// `C(u, v)`.
    pub fn cdf(&self, u: f64, v: f64) -> Result<f64> {
        check_unit(u, v)?;
        if u == 0.0 || v == 0.0 {
            return Ok(0.0);
        }
        if u == 1.0 {
            return Ok(v);
        }
        if v == 1.0 {
            return Ok(u);
        }
        Ok(match *self {
            Bivariate::Pi => u * v,
            Bivariate::M => u.min(v),
            Bivariate::W => (u + v - 1.0).max(0.0),
            Bivariate::Gaussian { rho } => bvn_lower(norm_quantile(u), norm_quantile(v), rho),
            Bivariate::StudentT { rho, nu } => {
                let t = t_dist(nu);
                bvt_lower(nu, t.quantile(u), t.quantile(v), rho)
            }
            Bivariate::Clayton { theta } => {
                (u.powf(-theta) + v.powf(-theta) - 1.0).powf(-1.0 / theta)
            }
            Bivariate::Gumbel { theta } => {
                let a = (-u.ln()).powf(theta) + (-v.ln()).powf(theta);
                (-a.powf(1.0 / theta)).exp()
            }
            Bivariate::Frank { theta } => {
                if theta == 0.0 {
                    u * v
                } else {
                    let num = (-theta * u).exp_m1() * (-theta * v).exp_m1();
                    -(num / (-theta).exp_m1()).ln_1p() / theta
                }
            }
        }
        .clamp((u + v - 1.0).max(0.0), u.min(v)))
    }

    /// Log density on the open unit square; `None` for the singular bounds.
    pub fn ln_density(&self, u: f64, v: f64) -> Option<f64> {
        Some(match *self {
            Bivariate::Pi => 0.0,
            Bivariate::M | Bivariate::W => return None,
            Bivariate::Gaussian { rho } => {
                let (x, y) = (norm_quantile(u), norm_quantile(v));
                let s = 1.0 - rho * rho;
                -(rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * s) - 0.5 * s.ln()
            }
            Bivariate::StudentT { rho, nu } => {
                let t = t_dist(nu);
                let n = nu as f64;
                let (x, y) = (t.quantile(u), t.quantile(v));
                let s = 1.0 - rho * rho;
                let joint = ln_gamma((n + 2.0) / 2.0) - ln_gamma(n / 2.0) - (n * PI).ln() - 0.5 * s.ln()
                    - (n + 2.0) / 2.0 * (1.0 + (x * x + y * y - 2.0 * rho * x * y) / (n * s)).ln();
                let marg = |z: f64| {
                    ln_gamma((n + 1.0) / 2.0) - ln_gamma(n / 2.0) - 0.5 * (n * PI).ln()
                        - (n + 1.0) / 2.0 * (1.0 + z * z / n).ln()
                };
                joint - marg(x) - marg(y)
            }
            Bivariate::Clayton { theta } => {
                let (lu, lv) = (u.ln(), v.ln());
                let s = (-theta * lu).exp() + (-theta * lv).exp() - 1.0;
                (1.0 + theta).ln() - (theta + 1.0) * (lu + lv) - (1.0 / theta + 2.0) * s.ln()
            }
            Bivariate::Gumbel { theta } => {
                let (x, y) = (-u.ln(), -v.ln());
                let (lx, ly) = (x.ln(), y.ln());
                let (ax, ay) = (theta * lx, theta * ly);
                let ln_a = ax.max(ay) + (-(ax - ay).abs()).exp().ln_1p();
                let a_root = (ln_a / theta).exp();
                -a_root + x + y + (theta - 1.0) * (lx + ly) + (1.0 / theta - 2.0) * ln_a
                    + (a_root + theta - 1.0).ln()
            }
            Bivariate::Frank { theta } => {
                if theta == 0.0 {
                    0.0
                } else {
                    let d = (-theta).exp_m1();
                    let den = d + (-theta * u).exp_m1() * (-theta * v).exp_m1();
                    (-theta * d).ln() - theta * (u + v) - 2.0 * den.abs().ln()
                }
            }
        })
    }

    pub fn density(&self, u: f64, v: f64) -> Option<f64> {
        self.ln_density(u, v).map(f64::exp)
    }

    /// Conditional CDF `P(X <= x | Y = y) = ∂C(x, y)/∂y`.
    /// All families here are exchangeable, so the other partial is `h(y, x)`.
    pub fn h(&self, x: f64, y: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        match *self {
            Bivariate::Pi => x,
            Bivariate::M => {
                if x >= y {
                    1.0
                } else {
                    0.0
                }
            }
            Bivariate::W => {
                if x >= 1.0 - y {
                    1.0
                } else {
                    0.0
                }
            }
            Bivariate::Gaussian { rho } => {
                norm_cdf((norm_quantile(x) - rho * norm_quantile(y)) / (1.0 - rho * rho).sqrt())
            }
            Bivariate::StudentT { rho, nu } => {
                let t = t_dist(nu);
                let n = nu as f64;
                let (a, b) = (t.quantile(x), t.quantile(y));
                let scale = ((n + b * b) * (1.0 - rho * rho) / (n + 1.0)).sqrt();
                t_dist(nu + 1).cdf((a - rho * b) / scale)
            }
            Bivariate::Clayton { theta } => {
                if y <= 0.0 {
                    return 1.0;
                }
                let s = x.powf(-theta) + y.powf(-theta) - 1.0;
                // y^{-θ-1} s^{-1/θ-1} in log space.
                ((-theta - 1.0) * y.ln() + (-1.0 / theta - 1.0) * s.ln()).exp()
            }
            Bivariate::Gumbel { theta } => {
                if y <= 0.0 {
                    return 1.0;
                }
                if y >= 1.0 {
                    return 0.0;
                }
                let (a, b) = (-x.ln(), -y.ln());
                let s = a.powf(theta) + b.powf(theta);
                let c = (-s.powf(1.0 / theta)).exp();
                c * s.powf(1.0 / theta - 1.0) * b.powf(theta - 1.0) / y
            }
            Bivariate::Frank { theta } => {
                if theta == 0.0 {
                    return x;
                }
                let ex = (-theta * x).exp_m1();
                let ey = (-theta * y).exp_m1();
                let num = (ey + 1.0) * ex;
                num / ((-theta).exp_m1() + ex * ey)
            }
        }
        .clamp(0.0, 1.0)
    }

    /// Inverse of `x ↦ h(x, y)` by bisection.
    pub fn h_inverse(&self, w: f64, y: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while hi - lo > H_INV_TOL {
            let mid = 0.5 * (lo + hi);
            if self.h(mid, y) < w {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Draws `n` pairs; the bounds and Gaussian are sampled directly,
    /// everything else by conditional inversion.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<(f64, f64)> {
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                match *self {
                    Bivariate::Pi => (u, rng.random()),
                    Bivariate::M => (u, u),
                    Bivariate::W => (u, 1.0 - u),
                    Bivariate::Gaussian { rho } => {
                        let z1: f64 = rng.sample(StandardNormal);
                        let g: f64 = rng.sample(StandardNormal);
                        let z2 = rho * z1 + (1.0 - rho * rho).sqrt() * g;
                        (norm_cdf(z1), norm_cdf(z2))
                    }
                    _ => {
                        let w: f64 = rng.random();
                        (u, self.h_inverse(w, u))
                    }
                }
            })
            .collect()
    }

    pub fn log_likelihood(&self, data: &[(f64, f64)]) -> f64 {
        data.iter().map(|&(u, v)| self.ln_density(u, v).unwrap_or(f64::NEG_INFINITY)).sum()
    }
}

/// `C(u, v)` on a box via inclusion–exclusion.
pub fn c_volume(c: &Bivariate, (a1, b1): (f64, f64), (a2, b2): (f64, f64)) -> Result<f64> {
    if a1 > b1 || a2 > b2 {
        return Err(invalid("box corners must satisfy a <= b"));
    }
    Ok(c.cdf(b1, b2)? - c.cdf(a1, b2)? - c.cdf(b1, a2)? + c.cdf(a1, a2)?)
}

// Gauss–Legendre nodes (negative half) and weights for 6, 12 and 20 points.
const GL: [&[(f64, f64)]; 3] = [
    &[
        (0.1713244923791705, -0.9324695142031522),
        (0.3607615730481384, -0.6612093864662647),
        (0.4679139345726904, -0.238_619_186_083_197),
    ],
    &[
        (0.04717533638651177, -0.9815606342467191),
        (0.1069393259953183, -0.904_117_256_370_475),
        (0.1600783285433464, -0.769_902_674_194_305),
        (0.2031674267230659, -0.5873179542866171),
        (0.2334925365383547, -0.3678314989981802),
        (0.2491470458134029, -0.1252334085114692),
    ],
    &[
        (0.01761400713915212, -0.9931285991850949),
        (0.04060142980038694, -0.9639719272779138),
        (0.06267204833410906, -0.912_234_428_251_326),
        (0.08327674157670475, -0.8391169718222188),
        (0.1019301198172404, -0.7463319064601508),
        (0.1181945319615184, -0.636_053_680_726_515),
        (0.1316886384491766, -0.5108670019508271),
        (0.1420961093183821, -0.3737060887154196),
        (0.1491729864726037, -0.2277858511416451),
        (0.1527533871307259, -0.07652652113349733),
    ],
];

/// Upper orthant `P(X > h, Y > k)` for a standard bivariate normal
/// (Drezner–Wesolowsky with Genz's refinements).
fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    let tp = 2.0 * PI;
    let nodes = if r.abs() < 0.3 {
        GL[0]
    } else if r.abs() < 0.75 {
        GL[1]
    } else {
        GL[2]
    };
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin();
        for &(w, x) in nodes {
            for sgn in [1.0, -1.0] {
                let sn = (asr * (sgn * x + 1.0) / 2.0).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        return bvn * asr / (2.0 * tp) + norm_cdf(-h) * norm_cdf(-k);
    }
    let mut k = k;
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    if r.abs() < 1.0 {
        let as_ = (1.0 - r) * (1.0 + r);
        let mut a = as_.sqrt();
        let bs = (h - k).powi(2);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        bvn = a
            * (-(bs / as_ + hk) / 2.0).exp()
            * (1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0);
        if hk > -160.0 {
            let b = bs.sqrt();
            bvn -= (-hk / 2.0).exp() * tp.sqrt() * norm_cdf(-b / a) * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a /= 2.0;
        for &(w, x) in nodes {
            let xs = (a * (x + 1.0)).powi(2);
            let rs = (1.0 - xs).sqrt();
            bvn += a * w * ((-bs / (2.0 * xs) - hk / (1.0 + rs)).exp() / rs
                - (-(bs / xs + hk) / 2.0).exp() * (1.0 + c * xs * (1.0 + d * xs)));
            let xs = as_ * (-x + 1.0).powi(2) / 4.0;
            let rs = (1.0 - xs).sqrt();
            bvn += a * w * (-(bs / xs + hk) / 2.0).exp()
                * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs - (1.0 + c * xs * (1.0 + d * xs)));
        }
        bvn = -bvn / tp;
    }
    if r > 0.0 {
        bvn + norm_cdf(-h.max(k))
    } else {
        -bvn + (norm_cdf(-h) - norm_cdf(-k)).max(0.0)
    }
}

/// `P(X <= h, Y <= k)` for a standard bivariate normal with correlation `r`.
pub fn bvn_lower(h: f64, k: f64, r: f64) -> f64 {
    bvn_upper(-h, -k, r)
}

/// `P(X <= h, Y <= k)` for a standard bivariate t with integer `nu`
/// (Dunnett–Sobel series as arranged by Genz).
pub fn bvt_lower(nu: u32, h: f64, k: f64, r: f64) -> f64 {
    let t = t_dist(nu);
    if 1.0 - r <= 1e-15 {
        return t.cdf(h.min(k));
    }
    if r + 1.0 <= 1e-15 {
        return if h > -k { t.cdf(h) - t.cdf(-k) } else { 0.0 };
    }
    let n = nu as f64;
    let snu = n.sqrt();
    let ors = 1.0 - r * r;
    let hrk = h - r * k;
    let krh = k - r * h;
    let (xnhk, xnkh) = if hrk.abs() + ors > 0.0 {
        (hrk * hrk / (hrk * hrk + ors * (n + k * k)), krh * krh / (krh * krh + ors * (n + h * h)))
    } else {
        (0.0, 0.0)
    };
    let hs = if hrk < 0.0 { -1.0 } else { 1.0 };
    let ks = if krh < 0.0 { -1.0 } else { 1.0 };
    let tp = 2.0 * PI;
    let mut bvt;
    if nu.is_multiple_of(2) {
        bvt = ors.sqrt().atan2(-r) / tp;
        let mut gmph = h / (16.0 * (n + h * h)).sqrt();
        let mut gmpk = k / (16.0 * (n + k * k)).sqrt();
        let mut btnckh = 2.0 * xnkh.sqrt().atan2((1.0 - xnkh).sqrt()) / PI;
        let mut btpdkh = 2.0 * (xnkh * (1.0 - xnkh)).sqrt() / PI;
        let mut btnchk = 2.0 * xnhk.sqrt().atan2((1.0 - xnhk).sqrt()) / PI;
        let mut btpdhk = 2.0 * (xnhk * (1.0 - xnhk)).sqrt() / PI;
        for j in 1..=nu / 2 {
            let j = j as f64;
            bvt += gmph * (1.0 + ks * btnckh);
            bvt += gmpk * (1.0 + hs * btnchk);
            btnckh += btpdkh;
            btpdkh = 2.0 * j * btpdkh * (1.0 - xnkh) / (2.0 * j + 1.0);
            btnchk += btpdhk;
            btpdhk = 2.0 * j * btpdhk * (1.0 - xnhk) / (2.0 * j + 1.0);
            gmph = gmph * (2.0 * j - 1.0) / (2.0 * j * (1.0 + h * h / n));
            gmpk = gmpk * (2.0 * j - 1.0) / (2.0 * j * (1.0 + k * k / n));
        }
    } else {
        let qhrk = (h * h + k * k - 2.0 * r * h * k + n * ors).sqrt();
        let hkrn = h * k + r * n;
        let hkn = h * k - n;
        let hpk = h + k;
        bvt = (-snu * (hkn * qhrk + hpk * hkrn)).atan2(hkn * hkrn - n * hpk * qhrk) / tp;
        if bvt < -1e-15 {
            bvt += 1.0;
        }
        let mut gmph = h / (tp * snu * (1.0 + h * h / n));
        let mut gmpk = k / (tp * snu * (1.0 + k * k / n));
        let mut btnckh = xnkh.sqrt();
        let mut btpdkh = btnckh;
        let mut btnchk = xnhk.sqrt();
        let mut btpdhk = btnchk;
        for j in 1..=(nu - 1) / 2 {
            let j = j as f64;
            bvt += gmph * (1.0 + ks * btnckh);
            bvt += gmpk * (1.0 + hs * btnchk);
            btpdkh = (2.0 * j - 1.0) * btpdkh * (1.0 - xnkh) / (2.0 * j);
            btnckh += btpdkh;
            btpdhk = (2.0 * j - 1.0) * btpdhk * (1.0 - xnhk) / (2.0 * j);
            btnchk += btpdhk;
            gmph = gmph * 2.0 * j / ((2.0 * j + 1.0) * (1.0 + h * h / n));
            gmpk = gmpk * 2.0 * j / ((2.0 * j + 1.0) * (1.0 + k * k / n));
        }
    }
    bvt
}

/// Rank transform per column: average rank over `n + 1`.
pub fn pseudo_observations(raw: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = raw.len();
    if n < 2 {
        return Err(Error::InsufficientData("pseudo-observations need at least 2 rows".into()));
    }
    let d = raw[0].len();
    if let Some(r) = raw.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: r.len() });
    }
    let mut out = vec![vec![0.0; d]; n];
    for j in 0..d {
        let col: Vec<f64> = raw.iter().map(|r| r[j]).collect();
        for (i, r) in average_ranks(&col).into_iter().enumerate() {
            out[i][j] = r / (n as f64 + 1.0);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFlag {
    /// Estimate sits on the lower end of the search range.
    LowerBound,
    /// Estimate sits on the upper end of the search range.
    UpperBound,
    /// Likelihood cannot distinguish the fit from independence.
    Independence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: Bivariate,
    pub log_likelihood: f64,
    pub flag: Option<FitFlag>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Gaussian,
    StudentT,
    Clayton,
    Gumbel,
    Frank,
}

impl FamilyKind {
    fn range(self) -> (f64, f64) {
        match self {
            FamilyKind::Gaussian | FamilyKind::StudentT => (-0.999, 0.999),
            FamilyKind::Clayton => (1e-4, 30.0),
            FamilyKind::Gumbel => (1.0, 20.0),
            FamilyKind::Frank => (-40.0, 40.0),
        }
    }

    fn build(self, p: f64) -> Bivariate {
        match self {
            FamilyKind::Gaussian => Bivariate::Gaussian { rho: p },
            FamilyKind::StudentT => Bivariate::student_t(p),
            FamilyKind::Clayton => Bivariate::Clayton { theta: p },
            FamilyKind::Gumbel => Bivariate::Gumbel { theta: p },
            FamilyKind::Frank => Bivariate::Frank { theta: p },
        }
    }
}

/// Golden-section maximisation on `[lo, hi]`.
fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Maximum-likelihood fit on pseudo-observations in `(0,1)²`.
pub fn fit_copula(data: &[(f64, f64)], family: FamilyKind) -> Result<FitResult> {
    if data.len() < 30 {
        return Err(Error::InsufficientData(format!("fit needs at least 30 observations, got {}", data.len())));
    }
    if data.iter().any(|&(u, v)| !(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0)) {
        return Err(invalid("pseudo-observations must lie in the open unit square"));
    }
    let distinct = |sel: fn(&(f64, f64)) -> f64| {
        let first = sel(&data[0]);
        data.iter().any(|p| sel(p) != first)
    };
    if !distinct(|p| p.0) || !distinct(|p| p.1) {
        return Err(invalid("degenerate data: a column has a single repeated value"));
    }
    let (lo, hi) = family.range();
    let ll = |p: f64| {
        let v = family.build(p).log_likelihood(data);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let tol = 1e-6 * (hi - lo);
    let p = golden_max(ll, lo, hi, tol);
    let model = family.build(p);
    let log_likelihood = ll(p);
    let flag = if p - lo <= 10.0 * tol {
        Some(FitFlag::LowerBound)
    } else if hi - p <= 10.0 * tol {
        Some(FitFlag::UpperBound)
    } else if family == FamilyKind::Frank && 2.0 * (log_likelihood - ll(0.0)) < 3.841 {
        // Frank excludes θ = 0; a likelihood-ratio test against it flags the
        // degenerate edge.
        Some(FitFlag::Independence)
    } else {
        None
    };
    Ok(FitResult { model, log_likelihood, flag })
}

/// D-vine on a fixed variable order. `trees[l][i]` couples `order[i]` and
/// `order[i + l + 1]` given the variables between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DVine {
    order: Vec<usize>,
    trees: Vec<Vec<Bivariate>>,
}

impl DVine {
    pub const MAX_DIM: usize = 5;

    pub fn new(order: Vec<usize>, trees: Vec<Vec<Bivariate>>) -> Result<Self> {
        let d = order.len();
        if !(2..=Self::MAX_DIM).contains(&d) {
            return Err(invalid(format!("vine dimension must be 2..={}, got {d}", Self::MAX_DIM)));
        }
        let mut seen = vec![false; d];
        for &o in &order {
            if o >= d || std::mem::replace(&mut seen[o], true) {
                return Err(invalid("vine order must be a permutation of 0..d"));
            }
        }
        if trees.len() != d - 1 || trees.iter().enumerate().any(|(l, t)| t.len() != d - 1 - l) {
            return Err(invalid("D-vine tree l must hold d-1-l pair copulas"));
        }
        for c in trees.iter().flatten() {
            c.validate()?;
            if matches!(c, Bivariate::M | Bivariate::W) {
                return Err(invalid("singular pair copulas have no density"));
            }
        }
        Ok(DVine { order, trees })
    }

    pub fn dim(&self) -> usize {
        self.order.len()
    }

    pub fn ln_density(&self, u: &[f64]) -> Result<f64> {
        let d = self.dim();
        if u.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: u.len() });
        }
        if u.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return Err(invalid("vine density needs a point strictly inside the cube"));
        }
        let x: Vec<f64> = self.order.iter().map(|&o| u[o]).collect();
        // fwd[i] = F(x_i | next l vars), bwd[i] = F(x_{i+l} | previous l vars).
        let mut fwd: Vec<f64> = x[..d - 1].to_vec();
        let mut bwd: Vec<f64> = x[1..].to_vec();
        let mut total = 0.0;
        for (l, tree) in self.trees.iter().enumerate() {
            let mut nf = Vec::with_capacity(tree.len());
            let mut nb = Vec::with_capacity(tree.len());
            for (i, c) in tree.iter().enumerate() {
                let (a, b) = if l == 0 { (x[i], x[i + 1]) } else { (fwd[i], bwd[i + 1]) };
                total += c.ln_density(a, b).expect("validated pair copula");
                nf.push(c.h(a, b));
                nb.push(c.h(b, a));
            }
            fwd = nf;
            bwd = nb;
        }
        Ok(total)
    }

    pub fn density(&self, u: &[f64]) -> Result<f64> {
        self.ln_density(u).map(f64::exp)
    }
}

/// Symmetric dependency strengths in `[0,1]`; the diagonal is ignored
/// when building correlations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencyMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DependencyMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in &rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        let m = DependencyMatrix { n, data };
        for i in 0..n {
            for j in 0..n {
                let g = m.get(i, j);
                if !(0.0..=1.0).contains(&g) {
                    return Err(invalid(format!("dependency ({i},{j}) = {g} outside [0,1]")));
                }
                if (g - m.get(j, i)).abs() > 1e-12 {
                    return Err(invalid(format!("dependency matrix not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        DependencyMatrix { n, data }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set_symmetric(&mut self, i: usize, j: usize, g: f64) {
        let g = g.clamp(0.0, 1.0);
        self.data[i * self.n + j] = g;
        self.data[j * self.n + i] = g;
    }

    /// Nearest valid correlation matrix: unit diagonal, eigenvalues clipped
    /// at `1e-8`, then rescaled back to unit diagonal.
    pub fn repaired_correlation(&self) -> Result<DMatrix<f64>> {
        let n = self.n;
        let raw = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { self.get(i, j) });
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(invalid("dependency matrix has non-finite entries"));
        }
        let eig = SymmetricEigen::new(raw);
        let clipped = eig.eigenvalues.map(|l| l.max(1e-8));
        let fixed = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
        let scale = DVector::from_iterator(n, (0..n).map(|i| 1.0 / fixed[(i, i)].sqrt()));
        let out = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                1.0
            } else {
                fixed[(i, j)] * scale[i] * scale[j]
            }
        });
        if out.iter().any(|x| !x.is_finite()) {
            return Err(invalid("dependency matrix could not be repaired"));
        }
        Ok(out)
    }
}

/// Gaussian-copula sampler for correlated Bernoulli failures.
#[derive(Debug, Clone)]
pub struct FailureSampler {
    factor: DMatrix<f64>,
}

impl FailureSampler {
    pub fn new(gamma: &DependencyMatrix) -> Result<Self> {
        let corr = gamma.repaired_correlation()?;
        let factor = match corr.clone().cholesky() {
            Some(ch) => ch.l(),
            None => {
                let eig = SymmetricEigen::new(corr);
                &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()))
            }
        };
        Ok(FailureSampler { factor })
    }

    /// Correlated uniforms.
    pub fn uniforms<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.factor.nrows();
        let g = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        (&self.factor * g).iter().map(|&z| norm_cdf(z)).collect()
    }

    /// Agent `i` fails when its uniform falls below `marginals[i]`.
    pub fn sample<R: Rng + ?Sized>(&self, marginals: &[f64], rng: &mut R) -> Result<Vec<bool>> {
        if marginals.len() != self.factor.nrows() {
            return Err(Error::DimensionMismatch { expected: self.factor.nrows(), got: marginals.len() });
        }
        Ok(self.uniforms(rng).into_iter().zip(marginals).map(|(u, &p)| u < p).collect())
    }
}

pub fn correlated_failures<R: Rng + ?Sized>(
    gamma: &DependencyMatrix,
    marginals: &[f64],
    rng: &mut R,
) -> Result<Vec<bool>> {
    FailureSampler::new(gamma)?.sample(marginals, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::stats::{kendall_tau, pearson};
    use approx::assert_relative_eq;

    fn families() -> Vec<Bivariate> {
        vec![
            Bivariate::Pi,
            Bivariate::M,
            Bivariate::W,
            Bivariate::Gaussian { rho: 0.6 },
            Bivariate::Gaussian { rho: -0.95 },
            Bivariate::student_t(0.4),
            Bivariate::StudentT { rho: -0.7, nu: 3 },
            Bivariate::Clayton { theta: 2.0 },
            Bivariate::Gumbel { theta: 1.7 },
            Bivariate::Frank { theta: -5.0 },
            Bivariate::Frank { theta: 8.0 },
        ]
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(Bivariate::M.cdf(0.3, 0.7).unwrap(), 0.3);
        assert_eq!(Bivariate::W.cdf(0.3, 0.5).unwrap(), 0.0);
        assert_eq!(Bivariate::Pi.cdf(0.5, 0.5).unwrap(), 0.25);
        assert_relative_eq!(
            Bivariate::Clayton { theta: 2.0 }.cdf(0.5, 0.5).unwrap(),
            0.37796447300922725,
            max_relative = 1e-14
        );
        assert!(Bivariate::Pi.cdf(1.2, 0.5).is_err());
    }

    #[test]
    fn gaussian_zero_is_independence() {
        let g = Bivariate::Gaussian { rho: 0.0 };
        for i in 1..20 {
            for j in 1..20 {
                let (u, v) = (i as f64 / 20.0, j as f64 / 20.0);
                assert!((g.cdf(u, v).unwrap() - u * v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bivariate_normal_matches_quadrature() {
        // Reference values from 30-digit adaptive quadrature.
        let cases = [
            (0.3, -0.5, 0.5, 0.25680746709367262843),
            (1.2, 0.7, -0.8, 0.64306275396154525596),
            (-1.0, -1.5, 0.95, 0.065411428617430165013),
            (0.5, 0.5, -0.95, 0.38295208420439835449),
            (2.0, -0.3, 0.2, 0.37719412940046158727),
        ];
        for (h, k, r, want) in cases {
            assert!((bvn_lower(h, k, r) - want).abs() < 1e-14, "{h} {k} {r}");
        }
    }

    #[test]
    fn bivariate_t_matches_quadrature() {
        let cases = [
            (0.3, -0.5, 0.5, 4, 0.26105234792707668727),
            (1.2, 0.7, -0.8, 3, 0.57840745946981869185),
            (-1.0, -1.5, 0.95, 5, 0.093176184296883866166),
            (0.5, 0.5, -0.3, 4, 0.42690811278109784382),
        ];
        for (h, k, r, nu, want) in cases {
            assert!((bvt_lower(nu, h, k, r) - want).abs() < 1e-13, "{h} {k} {r} {nu}");
        }
    }

    #[test]
    fn volumes() {
        for c in families() {
            assert!((c_volume(&c, (0.0, 1.0), (0.0, 1.0)).unwrap() - 1.0).abs() < 1e-12, "{c:?}");
        }
        assert_eq!(c_volume(&Bivariate::Pi, (0.0, 0.5), (0.0, 0.5)).unwrap(), 0.25);
        assert_eq!(c_volume(&Bivariate::M, (0.0, 0.3), (0.4, 1.0)).unwrap(), 0.0);
        assert!(c_volume(&Bivariate::Pi, (0.5, 0.2), (0.0, 1.0)).is_err());
    }

    #[test]
    fn grounding_margins_two_increasing_and_bounds() {
        let g = 25;
        for c in families() {
            for i in 0..=g {
                let u = i as f64 / g as f64;
                assert_eq!(c.cdf(u, 0.0).unwrap(), 0.0);
                assert_eq!(c.cdf(0.0, u).unwrap(), 0.0);
                assert!((c.cdf(u, 1.0).unwrap() - u).abs() < 1e-9);
                assert!((c.cdf(1.0, u).unwrap() - u).abs() < 1e-9);
                for j in 0..=g {
                    let v = j as f64 / g as f64;
                    let val = c.cdf(u, v).unwrap();
                    assert!(val >= (u + v - 1.0).max(0.0) - 1e-12 && val <= u.min(v) + 1e-12);
                    if i < g && j < g {
                        let step = 1.0 / g as f64;
                        let vol = c_volume(&c, (u, u + step), (v, v + step)).unwrap();
                        assert!(vol >= -1e-9, "{c:?} at ({u},{v}): {vol}");
                    }
                }
            }
        }
    }

    #[test]
    fn h_function_is_partial_derivative() {
        for c in families().into_iter().skip(3) {
            for &(x, y) in &[(0.2, 0.7), (0.6, 0.3), (0.5, 0.5), (0.9, 0.1)] {
                let e = 1e-6;
                let num = (c.cdf(x, y + e).unwrap() - c.cdf(x, y - e).unwrap()) / (2.0 * e);
                assert!((c.h(x, y) - num).abs() < 1e-6, "{c:?} {x} {y}: {} vs {num}", c.h(x, y));
                let w = c.h(x, y);
                assert!((c.h_inverse(w, y) - x).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn density_is_mixed_partial() {
        for c in families().into_iter().skip(3) {
            for &(x, y) in &[(0.2, 0.7), (0.6, 0.3), (0.45, 0.55)] {
                let e = 1e-5;
                let num = (c.h(x + e, y) - c.h(x - e, y)) / (2.0 * e);
                let d = c.density(x, y).unwrap();
                assert!((d - num).abs() < 1e-5 * d.max(1.0), "{c:?} {x} {y}: {d} vs {num}");
            }
        }
    }

    #[test]
    fn density_integrates_to_one() {
        let m = 200;
        for c in [Bivariate::Clayton { theta: 1.0 }, Bivariate::Frank { theta: 3.0 }, Bivariate::Gaussian { rho: 0.5 }] {
            let mut s = 0.0;
            for i in 0..m {
                for j in 0..m {
                    s += c.density((i as f64 + 0.5) / m as f64, (j as f64 + 0.5) / m as f64).unwrap();
                }
            }
            assert!((s / (m * m) as f64 - 1.0).abs() < 1e-2, "{c:?}");
        }
    }

    #[test]
    fn clayton_tau_oracle_and_sampling() {
        // τ = 1 + 4 ∫ φ/φ' for the Clayton generator, by Simpson's rule.
        let theta: f64 = 2.0;
        let ratio = |t: f64| -(t - t.powf(theta + 1.0)) / theta;
        let m = 1000;
        let h = 1.0 / m as f64;
        let mut integral = ratio(0.0) + ratio(1.0);
        for i in 1..m {
            integral += ratio(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let tau_oracle = 1.0 + 4.0 * integral * h / 3.0;
        assert!((tau_oracle - 0.5).abs() < 1e-10);

        let mut rng = stream(11, "clayton");
        let xs = Bivariate::Clayton { theta }.sample(20_000, &mut rng);
        let (u, v): (Vec<f64>, Vec<f64>) = xs.into_iter().unzip();
        assert!((kendall_tau(&u, &v) - tau_oracle).abs() < 0.03);
    }

    #[test]
    fn gaussian_sampling_correlation() {
        let mut rng = stream(3, "gauss");
        let xs = Bivariate::Gaussian { rho: 0.8 }.sample(20_000, &mut rng);
        let (a, b): (Vec<f64>, Vec<f64>) = xs.iter().map(|&(u, v)| (norm_quantile(u), norm_quantile(v))).unzip();
        assert!((pearson(&a, &b) - 0.8).abs() < 0.02);
    }

    #[test]
    fn comonotone_samples_on_diagonal() {
        let mut rng = stream(1, "m");
        assert!(Bivariate::M.sample(100, &mut rng).iter().all(|(u, v)| u == v));
    }

    #[test]
    fn sampled_ecdf_tracks_cdf() {
        let mut rng = stream(5, "ecdf");
        for c in [Bivariate::Gumbel { theta: 2.0 }, Bivariate::student_t(0.5), Bivariate::Frank { theta: -4.0 }] {
            let xs = c.sample(5000, &mut rng);
            let mut worst: f64 = 0.0;
            for i in 1..10 {
                for j in 1..10 {
                    let (u, v) = (i as f64 / 10.0, j as f64 / 10.0);
                    let emp = xs.iter().filter(|&&(a, b)| a <= u && b <= v).count() as f64 / xs.len() as f64;
                    worst = worst.max((emp - c.cdf(u, v).unwrap()).abs());
                }
            }
            assert!(worst < 0.025, "{c:?}: {worst}");
        }
    }

    #[test]
    fn pseudo_observation_examples() {
        let po = pseudo_observations(&[vec![10.0], vec![20.0], vec![30.0]]).unwrap();
        assert_eq!(po, vec![vec![0.25], vec![0.5], vec![0.75]]);
        let ties = pseudo_observations(&[vec![1.0], vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(ties, vec![vec![0.375], vec![0.375], vec![0.75]]);
        let mono = pseudo_observations(&[vec![1.0f64.exp()], vec![2.0f64.exp()], vec![3.0f64.exp()]]).unwrap();
        assert_eq!(mono, po);
    }

    #[test]
    fn fit_recovers_clayton() {
        let mut rng = stream(2, "fit");
        let raw: Vec<Vec<f64>> =
            Bivariate::Clayton { theta: 2.0 }.sample(5000, &mut rng).into_iter().map(|(u, v)| vec![u, v]).collect();
        let po: Vec<(f64, f64)> = pseudo_observations(&raw).unwrap().into_iter().map(|r| (r[0], r[1])).collect();
        let fit = fit_copula(&po, FamilyKind::Clayton).unwrap();
        let Bivariate::Clayton { theta } = fit.model else { panic!() };
        assert!((1.7..=2.3).contains(&theta), "{theta}");
        assert_eq!(fit.flag, None);
    }

    #[test]
    fn fit_flags() {
        let mut rng = stream(4, "indep");
        let raw: Vec<Vec<f64>> = (0..500).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        let po: Vec<(f64, f64)> = pseudo_observations(&raw).unwrap().into_iter().map(|r| (r[0], r[1])).collect();
        let fit = fit_copula(&po, FamilyKind::Frank).unwrap();
        assert_eq!(fit.flag, Some(FitFlag::Independence));

        let co: Vec<(f64, f64)> = (1..=100).map(|i| (i as f64 / 101.0, i as f64 / 101.0)).collect();
        let fit = fit_copula(&co, FamilyKind::Gumbel).unwrap();
        assert_eq!(fit.flag, Some(FitFlag::UpperBound));

        assert!(fit_copula(&co[..10], FamilyKind::Gumbel).is_err());
        let flat = vec![(0.5, 0.3); 40];
        assert!(fit_copula(&flat, FamilyKind::Clayton).is_err());
    }

    #[test]
    fn model_json_roundtrip() {
        for c in families() {
            let s = serde_json::to_string(&c).unwrap();
            assert_eq!(serde_json::from_str::<Bivariate>(&s).unwrap(), c);
        }
        assert_eq!(serde_json::to_string(&Bivariate::Clayton { theta: 2.0 }).unwrap(), r#"{"family":"clayton","theta":2.0}"#);
    }

    fn gaussian_vine3(r12: f64, r23: f64, r13: f64) -> DVine {
        let partial = (r13 - r12 * r23) / ((1.0 - r12 * r12) * (1.0 - r23 * r23)).sqrt();
        DVine::new(
            vec![0, 1, 2],
            vec![
                vec![Bivariate::Gaussian { rho: r12 }, Bivariate::Gaussian { rho: r23 }],
                vec![Bivariate::Gaussian { rho: partial }],
            ],
        )
        .unwrap()
    }

    fn gaussian_copula_density(corr: &DMatrix<f64>, u: &[f64]) -> f64 {
        let z = DVector::from_iterator(u.len(), u.iter().map(|&x| norm_quantile(x)));
        let inv = corr.clone().try_inverse().unwrap();
        let q = (z.transpose() * (inv - DMatrix::identity(u.len(), u.len())) * &z)[(0, 0)];
        corr.determinant().powf(-0.5) * (-0.5 * q).exp()
    }

    #[test]
    fn vine_matches_trivariate_gaussian() {
        let (r12, r23, r13) = (0.5, -0.3, 0.2);
        let vine = gaussian_vine3(r12, r23, r13);
        let corr = DMatrix::from_row_slice(3, 3, &[1.0, r12, r13, r12, 1.0, r23, r13, r23, 1.0]);
        let mut rng = stream(9, "vine");
        for _ in 0..100 {
            let u: Vec<f64> = (0..3).map(|_| rng.random_range(0.01..0.99)).collect();
            let want = gaussian_copula_density(&corr, &u);
            assert_relative_eq!(vine.density(&u).unwrap(), want, max_relative = 1e-6);
        }
    }

    #[test]
    fn vine_degenerate_cases() {
        let pi = DVine::new(vec![2, 0, 1], vec![vec![Bivariate::Pi; 2], vec![Bivariate::Pi]]).unwrap();
        assert_eq!(pi.density(&[0.2, 0.5, 0.9]).unwrap(), 1.0);
        let c = Bivariate::Frank { theta: 3.0 };
        let two = DVine::new(vec![0, 1], vec![vec![c]]).unwrap();
        assert_relative_eq!(two.density(&[0.3, 0.8]).unwrap(), c.density(0.3, 0.8).unwrap(), max_relative = 1e-14);
        assert!(pi.density(&[0.0, 0.5, 0.5]).is_err());
        assert!(DVine::new(vec![0, 1], vec![vec![Bivariate::M]]).is_err());
    }

    #[test]
    fn vine_integrates_to_one() {
        let vine = DVine::new(
            vec![0, 1, 2],
            vec![vec![Bivariate::Clayton { theta: 0.8 }, Bivariate::Frank { theta: 2.0 }], vec![Bivariate::Gaussian { rho: 0.3 }]],
        )
        .unwrap();
        let m = 40;
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let p = [(i as f64 + 0.5) / m as f64, (j as f64 + 0.5) / m as f64, (k as f64 + 0.5) / m as f64];
                    s += vine.density(&p).unwrap();
                }
            }
        }
        assert!((s / (m * m * m) as f64 - 1.0).abs() < 2e-2);
    }

    #[test]
    fn failures_independent_and_dependent() {
        let mut rng = stream(8, "fail");
        let sampler = FailureSampler::new(&DependencyMatrix::identity(2)).unwrap();
        let draws: Vec<Vec<bool>> = (0..20_000).map(|_| sampler.sample(&[0.3, 0.3], &mut rng).unwrap()).collect();
        let a: Vec<f64> = draws.iter().map(|d| d[0] as u8 as f64).collect();
        let b: Vec<f64> = draws.iter().map(|d| d[1] as u8 as f64).collect();
        assert!(pearson(&a, &b).abs() < 0.03);
        let rate = a.iter().sum::<f64>() / a.len() as f64;
        assert!((rate - 0.3).abs() < 0.015);

        let g = DependencyMatrix::new(vec![vec![1.0, 0.99], vec![0.99, 1.0]]).unwrap();
        let sampler = FailureSampler::new(&g).unwrap();
        let joint = (0..20_000).filter(|_| sampler.sample(&[0.2, 0.2], &mut rng).unwrap().iter().all(|&f| f)).count();
        assert!(joint as f64 / 20_000.0 > 0.15);

        assert!((0..1000).all(|_| !correlated_failures(&g, &[0.0, 0.0], &mut rng).unwrap().iter().any(|&f| f)));
    }

    #[test]
    fn repair_makes_psd_unit_diagonal() {
        // Pairwise-high but jointly inconsistent dependencies.
        let g = DependencyMatrix::new(vec![vec![0.2, 0.9, 0.0], vec![0.9, 0.2, 0.9], vec![0.0, 0.9, 0.2]]).unwrap();
        let r = g.repaired_correlation().unwrap();
        let eig = SymmetricEigen::new(r.clone());
        assert!(eig.eigenvalues.iter().all(|&l| l > -1e-12));
        for i in 0..3 {
            assert!((r[(i, i)] - 1.0).abs() < 1e-12);
        }
        assert!(DependencyMatrix::new(vec![vec![1.0, 0.3], vec![0.2, 1.0]]).is_err());
        assert!(DependencyMatrix::new(vec![vec![1.0, 1.3], vec![1.3, 1.0]]).is_err());
    }
}
