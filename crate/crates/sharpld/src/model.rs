//! Threshold factor portfolio: obligor `i` defaults when `Z + b ε_i ≤ v`
//! and then loses `U_i`; the portfolio loss is `L_n = Σ U_i X_i`.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{DistError, SlowVary, TailFamily};
use crate::numeric::log_sum_exp;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("model violates its assumptions: {0}")]
    Invalid(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// Loss given default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossLaw {
    Uniform01,
    BoundedGrid { values: Vec<f64>, probs: Vec<f64> },
    Exponential { rate: f64 },
}

/// `(Λ, Λ', Λ'')` of the log-mgf.
pub type Cgf3 = (f64, f64, f64);

impl LossLaw {
    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            LossLaw::Uniform01 => Ok(()),
            LossLaw::BoundedGrid { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(ModelError::Invalid("grid loss needs matching non-empty values/probs".into()));
                }
                if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) || probs.iter().any(|p| !(*p > 0.0)) {
                    return Err(ModelError::Invalid("grid loss needs values ≥ 0 and probs > 0".into()));
                }
                if (probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                    return Err(ModelError::Invalid("grid loss probabilities must sum to 1".into()));
                }
                Ok(())
            }
            LossLaw::Exponential { rate } => {
                if *rate > 0.0 {
                    Ok(())
                } else {
                    Err(ModelError::Invalid("exponential loss needs rate > 0".into()))
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            LossLaw::Uniform01 => 0.5,
            LossLaw::BoundedGrid { values, probs } => values.iter().zip(probs).map(|(v, p)| v * p).sum(),
            LossLaw::Exponential { rate } => 1.0 / rate,
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            LossLaw::Uniform01 => 1.0 / 12.0,
            LossLaw::BoundedGrid { values, probs } => {
                let m = self.mean();
                values.iter().zip(probs).map(|(v, p)| p * (v - m).powi(2)).sum()
            }
            LossLaw::Exponential { rate } => 1.0 / (rate * rate),
        }
    }

    /// Supremum of the mgf domain.
    pub fn theta0(&self) -> f64 {
        match self {
            LossLaw::Exponential { rate } => *rate,
            _ => f64::INFINITY,
        }
    }

    pub fn ess_sup(&self) -> f64 {
        match self {
            LossLaw::Uniform01 => 1.0,
            LossLaw::BoundedGrid { values, .. } => values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            LossLaw::Exponential { .. } => f64::INFINITY,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.ess_sup().is_finite()
    }

    /// Log-mgf and its first two derivatives.
    pub fn cgf(&self, t: f64) -> Cgf3 {
        match self {
            LossLaw::Uniform01 => uniform_cgf(t),
            LossLaw::BoundedGrid { values, probs } => {
                let logs: Vec<f64> = values.iter().zip(probs).map(|(v, p)| p.ln() + t * v).collect();
                let lam = log_sum_exp(&logs);
                let w: Vec<f64> = logs.iter().map(|l| (l - lam).exp()).collect();
                let m1: f64 = w.iter().zip(values).map(|(w, v)| w * v).sum();
                let m2: f64 = w.iter().zip(values).map(|(w, v)| w * (v - m1).powi(2)).sum();
                (lam, m1, m2)
            }
            LossLaw::Exponential { rate } => {
                if t >= *rate {
                    return (f64::INFINITY, f64::INFINITY, f64::INFINITY);
                }
                let d = rate - t;
                (-(-t / rate).ln_1p(), 1.0 / d, 1.0 / (d * d))
            }
        }
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample_tilted(rng, 0.0)
    }

    /// Draw from the exponential tilt `e^{θu} dP_U(u) / λ_U(θ)`.
    pub fn sample_tilted<R: Rng + ?Sized>(&self, rng: &mut R, t: f64) -> f64 {
        match self {
            LossLaw::Uniform01 => {
                let r: f64 = rng.random();
                uniform_tilted_quantile(t, r)
            }
            LossLaw::BoundedGrid { values, probs } => {
                let lam = self.cgf(t).0;
                let r: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += (p.ln() + t * v - lam).exp();
                    if r < acc {
                        return *v;
                    }
                }
                *values.last().unwrap()
            }
            LossLaw::Exponential { rate } => Exp::new(rate - t).expect("tilt below rate").sample(rng),
        }
    }

    /// Distribution function of the θ-tilted loss.
    pub fn tilted_cdf(&self, t: f64, u: f64) -> f64 {
        match self {
            LossLaw::Uniform01 => {
                if u <= 0.0 {
                    0.0
                } else if u >= 1.0 {
                    1.0
                } else if t.abs() < 1e-12 {
                    u
                } else if t > 0.0 {
                    (t * (u - 1.0)).exp() * (-t * u).exp_m1() / (-t).exp_m1()
                } else {
                    (t * u).exp_m1() / t.exp_m1()
                }
            }
            LossLaw::BoundedGrid { values, probs } => {
                let lam = self.cgf(t).0;
                values.iter().zip(probs).filter(|(v, _)| **v <= u).map(|(v, p)| (p.ln() + t * v - lam).exp()).sum()
            }
            LossLaw::Exponential { rate } => {
                if u <= 0.0 {
                    0.0
                } else {
                    -(-(rate - t) * u).exp_m1()
                }
            }
        }
    }
}

/// Inverse distribution function of the θ-tilted Uniform(0,1) law.
pub fn uniform_tilted_quantile(t: f64, r: f64) -> f64 {
    if t.abs() < 1e-12 {
        r
    } else if t > 0.0 {
        1.0 + (r + (1.0 - r) * (-t).exp()).ln() / t
    } else {
        (r * t.exp_m1()).ln_1p() / t
    }
}

fn uniform_cgf(t: f64) -> Cgf3 {
    if t.abs() < 0.1 {
        let t2 = t * t;
        let l = t / 2.0 + t2 / 24.0 - t2 * t2 / 2880.0 + t2 * t2 * t2 / 181_440.0 - t2 * t2 * t2 * t2 / 9_676_800.0;
        let d1 = 0.5 + t / 12.0 - t * t2 / 720.0 + t * t2 * t2 / 30_240.0 - t * t2 * t2 * t2 / 1_209_600.0;
        let d2 = 1.0 / 12.0 - t2 / 240.0 + t2 * t2 / 6048.0 - t2 * t2 * t2 / 172_800.0;
        return (l, d1, d2);
    }
    let l = if t > 0.0 { t + (-(-t).exp_m1()).ln() - t.ln() } else { (-t.exp_m1()).ln() - (-t).ln() };
    let d1 = if t > 0.0 { 1.0 / (-(-t).exp_m1()) - 1.0 / t } else { 1.0 + 1.0 / t.exp_m1() - 1.0 / t };
    let d2 = if t.abs() > 700.0 {
        1.0 / (t * t)
    } else {
        let s = (0.5 * t).sinh();
        1.0 / (t * t) - 1.0 / (4.0 * s * s)
    };
    (l, d1, d2)
}

/// The portfolio model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortfolioModel {
    /// Default threshold `v`.
    pub v: f64,
    /// Idiosyncratic weight `b`, used for every portfolio size.
    pub b: f64,
    /// Factor loadings; empty when `z` already describes the aggregate factor.
    #[serde(default)]
    pub weights: Vec<f64>,
    /// Factor law (per factor when `weights` is non-empty).
    pub z: TailFamily,
    /// Idiosyncratic noise law.
    pub eps: TailFamily,
    /// Loss given default.
    pub u: LossLaw,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `c · Σ |a_j|^α`: the left-tail constant of a weighted sum of i.i.d.
/// regularly varying factors.
pub fn effective_rv_constant(weights: &[f64], alpha_z: f64, c_z: f64) -> f64 {
    c_z * weights.iter().map(|a| a.abs().powf(alpha_z)).sum::<f64>()
}

impl PortfolioModel {
    pub fn validate(&self) -> ValidationReport {
        let mut rep = ValidationReport::default();
        if !(self.b > 0.0 && self.b < 1.0) {
            rep.violations.push(format!("b = {} must lie in (0, 1)", self.b));
        }
        if !self.v.is_finite() {
            rep.violations.push("v must be finite".into());
        }
        if !self.weights.is_empty() {
            if self.weights.iter().any(|a| !(*a >= 0.0 && *a < 1.0)) {
                rep.violations.push("weights must lie in [0, 1)".into());
            }
            let s: f64 = self.weights.iter().map(|a| a * a).sum::<f64>() + self.b * self.b;
            let gap = (s - 1.0).abs();
            if gap > 1e-4 {
                rep.violations.push(format!("Σa² + b² = {} but must equal 1", s));
            } else if gap > 1e-12 {
                rep.warnings.push(format!("Σa² + b² = {}; weights renormalized", s));
            }
        }
        if let Err(e) = self.z.validate() {
            rep.violations.push(format!("z: {}", e));
        }
        if let Err(e) = self.eps.validate() {
            rep.violations.push(format!("eps: {}", e));
        }
        if matches!(self.eps, TailFamily::PointMass { .. }) {
            rep.violations.push("eps: noise needs a density".into());
        }
        if let Err(e) = self.u.validate() {
            rep.violations.push(format!("u: {}", e));
        }
        rep
    }

    /// Law of the aggregate factor `Σ a_j Z_j`.
    pub fn factor_law(&self) -> Result<TailFamily, ModelError> {
        if self.weights.is_empty() {
            return Ok(self.z.clone());
        }
        let ss: f64 = self.weights.iter().map(|a| a * a).sum();
        let scale = ((1.0 - self.b * self.b) / ss).sqrt();
        let w: Vec<f64> = self.weights.iter().map(|a| a * scale).collect();
        let ss: f64 = w.iter().map(|a| a * a).sum();
        match &self.z {
            TailFamily::Gn { xi, gamma } if *gamma == 2.0 => Ok(TailFamily::Gn { xi: xi / ss, gamma: 2.0 }),
            TailFamily::PointMass { kappa } => Ok(TailFamily::PointMass { kappa: kappa * w.iter().sum::<f64>() }),
            TailFamily::SymmetricRv { alpha, x_m, slow: SlowVary::Constant { c } } => {
                let c_eff = effective_rv_constant(&w, *alpha, *c);
                let amax = w.iter().cloned().fold(0.0, f64::max);
                let x_m = (x_m * amax).max(c_eff.powf(1.0 / alpha));
                Ok(TailFamily::SymmetricRv { alpha: *alpha, x_m, slow: SlowVary::Constant { c: c_eff } })
            }
            other => Err(ModelError::Unsupported(format!("aggregation of weighted {} factors", other.name()))),
        }
    }

    /// Default probability `p(z) = F_ε((v - z)/b)`.
    pub fn p_default(&self, z: f64) -> f64 {
        self.eps.cdf((self.v - z) / self.b)
    }

    /// Survival probability `1 - p(z)`, accurate when `p(z)` is near 1.
    pub fn q_survive(&self, z: f64) -> f64 {
        self.eps.sf((self.v - z) / self.b)
    }

    /// `dp/dz = -f_ε((v - z)/b) / b`.
    pub fn dp_dz(&self, z: f64) -> f64 {
        -self.eps.pdf((self.v - z) / self.b).unwrap_or(0.0) / self.b
    }

    /// One exact draw of `(L_n, Z, number of defaults)`.
    pub fn simulate_loss<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<(f64, f64, usize), ModelError> {
        let zl = self.factor_law()?;
        let z = zl.sample_one(rng);
        let mut loss = 0.0;
        let mut k = 0;
        for _ in 0..n {
            let e = self.eps.sample_one(rng);
            if z + self.b * e <= self.v {
                k += 1;
                loss += self.u.sample_one(rng);
            }
        }
        Ok((loss, z, k))
    }
}
