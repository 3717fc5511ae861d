//! Univariate laws with known tail shape.
//!
//! Each family supplies density, distribution function, survival function,
//! quantile and sampling, together with the tail descriptors consumed by the
//! saddle-point code.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use libm::erfc;
use statrs::function::gamma::{gamma_ur, ln_gamma};
use thiserror::Error;

use crate::numeric::bisect;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("{0} has no density")]
    UnsupportedForFamily(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Slowly varying factor `L(x)` of a regularly varying tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum SlowVary {
    Constant { c: f64 },
    /// `c (log x)^p` for `x > e`, and `c` below.
    LogPower { c: f64, p: f64 },
    /// Piecewise linear in `log x`; flat outside the table.
    Table { x: Vec<f64>, value: Vec<f64> },
}

impl Default for SlowVary {
    fn default() -> Self {
        SlowVary::Constant { c: 1.0 }
    }
}

impl SlowVary {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            SlowVary::Constant { c } => *c,
            SlowVary::LogPower { c, p } => {
                if x > std::f64::consts::E {
                    c * x.ln().powf(*p)
                } else {
                    *c
                }
            }
            SlowVary::Table { x: xs, value } => {
                let lx = x.ln();
                if lx <= xs[0].ln() {
                    return value[0];
                }
                let last = xs.len() - 1;
                if lx >= xs[last].ln() {
                    return value[last];
                }
                let i = xs.partition_point(|&t| t.ln() <= lx) - 1;
                let (a, b) = (xs[i].ln(), xs[i + 1].ln());
                value[i] + (value[i + 1] - value[i]) * (lx - a) / (b - a)
            }
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match self {
            SlowVary::Constant { .. } => 0.0,
            SlowVary::LogPower { c, p } => {
                if x > std::f64::consts::E {
                    c * p * x.ln().powf(p - 1.0) / x
                } else {
                    0.0
                }
            }
            SlowVary::Table { x: xs, value } => {
                let last = xs.len() - 1;
                if x <= xs[0] || x >= xs[last] {
                    return 0.0;
                }
                let i = xs.partition_point(|&t| t <= x) - 1;
                (value[i + 1] - value[i]) / (xs[i + 1].ln() - xs[i].ln()) / x
            }
        }
    }

    pub fn validate(&self) -> Result<(), DistError> {
        match self {
            SlowVary::Constant { c } | SlowVary::LogPower { c, .. } if !(*c > 0.0) => {
                Err(DistError::InvalidParameter("slow-varying constant must be positive".into()))
            }
            SlowVary::Table { x, value } => {
                if x.len() < 2 || x.len() != value.len() {
                    return Err(DistError::InvalidParameter("slow-varying table needs ≥ 2 matched points".into()));
                }
                if x.windows(2).any(|w| !(w[0] > 0.0 && w[1] > w[0])) || value.iter().any(|v| !(*v > 0.0)) {
                    return Err(DistError::InvalidParameter(
                        "slow-varying table must have increasing positive abscissae and positive values".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Univariate law tagged by tail class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TailFamily {
    /// Density `β exp(-ξ|x|^γ)` with `β = γ ξ^{1/γ} / (2Γ(1/γ))`.
    Gn { xi: f64, gamma: f64 },
    /// `P(|W| > x) = L(x) x^{-α}` for `x ≥ x_m`, uniform mass on `(-x_m, x_m)`.
    SymmetricRv {
        alpha: f64,
        x_m: f64,
        #[serde(default)]
        slow: SlowVary,
    },
    /// Support `[z0, ∞)`, `P(W > x) = (L(x)/L(z0)) (z0/x)^α`.
    LowerBoundedRv {
        alpha: f64,
        z0: f64,
        #[serde(default)]
        slow: SlowVary,
    },
    /// Mirror image `-V` of a lower-bounded law `V` on `[z0, ∞)`.
    ReflectedRv {
        alpha: f64,
        z0: f64,
        #[serde(default)]
        slow: SlowVary,
    },
    PointMass { kappa: f64 },
    /// Density `K |x|^p exp(-ξ|x|^m)`, symmetric.
    LogSmooth { xi: f64, m: f64, p: f64 },
}

impl TailFamily {
    pub fn standard_normal() -> Self {
        TailFamily::Gn { xi: 0.5, gamma: 2.0 }
    }

    pub fn pareto(z0: f64, alpha: f64) -> Self {
        TailFamily::LowerBoundedRv { alpha, z0, slow: SlowVary::default() }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TailFamily::Gn { .. } => "generalized normal",
            TailFamily::SymmetricRv { .. } => "symmetric regularly varying",
            TailFamily::LowerBoundedRv { .. } => "lower-bounded regularly varying",
            TailFamily::ReflectedRv { .. } => "reflected regularly varying",
            TailFamily::PointMass { .. } => "point mass",
            TailFamily::LogSmooth { .. } => "log-smooth",
        }
    }

    pub fn validate(&self) -> Result<(), DistError> {
        let bad = |m: &str| Err(DistError::InvalidParameter(m.to_string()));
        match self {
            TailFamily::Gn { xi, gamma } => {
                if !(*xi > 0.0) {
                    return bad("gn: xi must be positive");
                }
                if !(*gamma > 0.0 && *gamma <= 2.0) {
                    return bad("gn: gamma must lie in (0, 2]");
                }
                Ok(())
            }
            TailFamily::SymmetricRv { alpha, x_m, slow } => {
                slow.validate()?;
                if !(*alpha > 0.0) || !(*x_m > 0.0) {
                    return bad("symmetric_rv: alpha and x_m must be positive");
                }
                if slow.eval(*x_m) * x_m.powf(-alpha) > 1.0 + 1e-12 {
                    return bad("symmetric_rv: tail mass L(x_m) x_m^-alpha exceeds 1");
                }
                Ok(())
            }
            TailFamily::LowerBoundedRv { alpha, z0, slow } | TailFamily::ReflectedRv { alpha, z0, slow } => {
                slow.validate()?;
                if !(*alpha > 0.0) || !(*z0 > 0.0) {
                    return bad("bounded rv: alpha and z0 must be positive");
                }
                if alpha / z0 - slow.deriv(*z0) / slow.eval(*z0) <= 0.0 {
                    return bad("bounded rv: density must be positive at the endpoint");
                }
                Ok(())
            }
            TailFamily::PointMass { kappa } => {
                if kappa.is_finite() {
                    Ok(())
                } else {
                    bad("point_mass: kappa must be finite")
                }
            }
            TailFamily::LogSmooth { xi, m, p } => {
                if !(*xi > 0.0 && *m > 0.0 && *p > -1.0) {
                    return bad("log_smooth: need xi > 0, m > 0, p > -1");
                }
                Ok(())
            }
        }
    }

    /// Normalizing constant of the generalized normal density.
    pub fn gn_beta(xi: f64, gamma: f64) -> f64 {
        gamma * xi.powf(1.0 / gamma) / (2.0 * ln_gamma(1.0 / gamma).exp())
    }

    fn log_smooth_lognorm(xi: f64, m: f64, p: f64) -> f64 {
        let s = (p + 1.0) / m;
        m.ln() + s * xi.ln() - std::f64::consts::LN_2 - ln_gamma(s)
    }

    pub fn log_pdf(&self, x: f64) -> Result<f64, DistError> {
        Ok(match self {
            TailFamily::Gn { xi, gamma } => Self::gn_beta(*xi, *gamma).ln() - xi * x.abs().powf(*gamma),
            TailFamily::SymmetricRv { alpha, x_m, slow } => {
                let a = x.abs();
                if a < *x_m {
                    let t = slow.eval(*x_m) * x_m.powf(-alpha);
                    ((1.0 - t) / (2.0 * x_m)).ln()
                } else {
                    (0.5 * (alpha * slow.eval(a) / a - slow.deriv(a))).ln() - alpha * a.ln()
                }
            }
            TailFamily::LowerBoundedRv { alpha, z0, slow } => Self::bounded_log_pdf(*alpha, *z0, slow, x),
            TailFamily::ReflectedRv { alpha, z0, slow } => Self::bounded_log_pdf(*alpha, *z0, slow, -x),
            TailFamily::PointMass { .. } => return Err(DistError::UnsupportedForFamily("point mass")),
            TailFamily::LogSmooth { xi, m, p } => {
                let a = x.abs();
                Self::log_smooth_lognorm(*xi, *m, *p) + p * a.ln() - xi * a.powf(*m)
            }
        })
    }

    fn bounded_log_pdf(alpha: f64, z0: f64, slow: &SlowVary, x: f64) -> f64 {
        if x < z0 {
            return f64::NEG_INFINITY;
        }
        let l0 = slow.eval(z0);
        ((alpha * slow.eval(x) / x - slow.deriv(x)) / l0).ln() + alpha * (z0 / x).ln()
    }

    pub fn pdf(&self, x: f64) -> Result<f64, DistError> {
        self.log_pdf(x).map(f64::exp)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            TailFamily::Gn { .. } | TailFamily::SymmetricRv { .. } | TailFamily::LogSmooth { .. } => {
                if x <= 0.0 {
                    self.lower_half_tail(-x)
                } else {
                    1.0 - self.lower_half_tail(x)
                }
            }
            TailFamily::LowerBoundedRv { alpha, z0, slow } => 1.0 - Self::bounded_sf(*alpha, *z0, slow, x),
            TailFamily::ReflectedRv { alpha, z0, slow } => Self::bounded_sf(*alpha, *z0, slow, -x),
            TailFamily::PointMass { kappa } => {
                if x >= *kappa {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `P(W > x)`, accurate deep in the right tail.
    pub fn sf(&self, x: f64) -> f64 {
        match self {
            TailFamily::Gn { .. } | TailFamily::SymmetricRv { .. } | TailFamily::LogSmooth { .. } => {
                if x >= 0.0 {
                    self.lower_half_tail(x)
                } else {
                    1.0 - self.lower_half_tail(-x)
                }
            }
            TailFamily::LowerBoundedRv { alpha, z0, slow } => Self::bounded_sf(*alpha, *z0, slow, x),
            TailFamily::ReflectedRv { alpha, z0, slow } => {
                if -x <= *z0 {
                    return 0.0;
                }
                1.0 - Self::bounded_sf(*alpha, *z0, slow, -x)
            }
            TailFamily::PointMass { kappa } => {
                if x >= *kappa {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    /// `P(W > a)` for `a ≥ 0` of a symmetric family.
    fn lower_half_tail(&self, a: f64) -> f64 {
        match self {
            TailFamily::Gn { xi, gamma } => {
                if *gamma == 2.0 {
                    0.5 * erfc(xi.sqrt() * a)
                } else if a == 0.0 {
                    0.5
                } else {
                    0.5 * gamma_ur(1.0 / gamma, xi * a.powf(*gamma))
                }
            }
            TailFamily::LogSmooth { xi, m, p } => {
                if a == 0.0 {
                    0.5
                } else {
                    0.5 * gamma_ur((p + 1.0) / m, xi * a.powf(*m))
                }
            }
            TailFamily::SymmetricRv { alpha, x_m, slow } => {
                if a >= *x_m {
                    0.5 * slow.eval(a) * a.powf(-alpha)
                } else {
                    let t = slow.eval(*x_m) * x_m.powf(-alpha);
                    0.5 * t + 0.5 * (1.0 - t) * (1.0 - a / x_m)
                }
            }
            _ => unreachable!("only symmetric families"),
        }
    }

    fn bounded_sf(alpha: f64, z0: f64, slow: &SlowVary, x: f64) -> f64 {
        if x <= z0 {
            1.0
        } else {
            slow.eval(x) / slow.eval(z0) * (z0 / x).powf(alpha)
        }
    }

    /// Left endpoint of the support (`-∞` when unbounded below).
    pub fn ess_inf(&self) -> f64 {
        match self {
            TailFamily::LowerBoundedRv { z0, .. } => *z0,
            TailFamily::PointMass { kappa } => *kappa,
            _ => f64::NEG_INFINITY,
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            TailFamily::PointMass { kappa } => return *kappa,
            TailFamily::Gn { xi, gamma } if *gamma == 2.0 => {
                let sd = (0.5 / xi).sqrt();
                return sd * -std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * u);
            }
            TailFamily::LowerBoundedRv { alpha, z0, slow: SlowVary::Constant { .. } } => {
                return z0 * (1.0 - u).powf(-1.0 / alpha);
            }
            TailFamily::ReflectedRv { alpha, z0, slow: SlowVary::Constant { .. } } => {
                return -z0 * u.powf(-1.0 / alpha);
            }
            _ => {}
        }
        let (mut lo, mut hi) = (-1.0, 1.0);
        while self.cdf(lo) > u {
            lo *= 2.0;
        }
        while self.cdf(hi) < u {
            hi *= 2.0;
        }
        if u < 0.5 {
            bisect(|x| self.cdf(x) - u, lo, hi, 1e-15).unwrap_or(lo)
        } else {
            bisect(|x| (1.0 - u) - self.sf(x), lo, hi, 1e-15).unwrap_or(hi)
        }
    }

    /// One draw.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            TailFamily::Gn { xi, gamma } => {
                if *gamma == 2.0 {
                    let z: f64 = StandardNormal.sample(rng);
                    z * (0.5 / xi).sqrt()
                } else {
                    let g = Gamma::new(1.0 / gamma, 1.0).expect("valid shape").sample(rng);
                    let a = (g / xi).powf(1.0 / gamma);
                    if rng.random::<bool>() {
                        a
                    } else {
                        -a
                    }
                }
            }
            TailFamily::LogSmooth { xi, m, p } => {
                let g = Gamma::new((p + 1.0) / m, 1.0).expect("valid shape").sample(rng);
                let a = (g / xi).powf(1.0 / m);
                if rng.random::<bool>() {
                    a
                } else {
                    -a
                }
            }
            TailFamily::PointMass { kappa } => *kappa,
            _ => {
                let u: f64 = rng.random();
                self.quantile(u.max(f64::MIN_POSITIVE))
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        (0..count).map(|_| self.sample_one(rng)).collect()
    }

    /// `-d/dw log f(-w)`: the hazard of the left tail at `-w`.
    pub fn left_hazard(&self, w: f64) -> f64 {
        match self {
            TailFamily::Gn { xi, gamma } => xi * gamma * w.abs().powf(gamma - 1.0) * w.signum(),
            TailFamily::LogSmooth { xi, m, p } => xi * m * w.abs().powf(m - 1.0) * w.signum() - p / w,
            _ => {
                let h = 1e-5 * w.abs().max(1.0);
                let lf = |t: f64| self.log_pdf(-t).unwrap_or(f64::NEG_INFINITY);
                -(lf(w + h) - lf(w - h)) / (2.0 * h)
            }
        }
    }

    /// Tail index and one-sided slowly varying factor of the left tail:
    /// `P(W ≤ -w) = c(w) w^{-α}`.
    pub fn left_rv(&self, w: f64) -> Option<(f64, f64)> {
        match self {
            TailFamily::SymmetricRv { alpha, slow, .. } => Some((*alpha, 0.5 * slow.eval(w))),
            TailFamily::ReflectedRv { alpha, z0, slow } => Some((*alpha, slow.eval(w) / slow.eval(*z0) * z0.powf(*alpha))),
            _ => None,
        }
    }

    /// Tail index and one-sided slowly varying factor of the right tail.
    pub fn right_rv(&self, t: f64) -> Option<(f64, f64)> {
        match self {
            TailFamily::SymmetricRv { alpha, slow, .. } => Some((*alpha, 0.5 * slow.eval(t))),
            TailFamily::LowerBoundedRv { alpha, z0, slow } => Some((*alpha, slow.eval(t) / slow.eval(*z0) * z0.powf(*alpha))),
            _ => None,
        }
    }
}
