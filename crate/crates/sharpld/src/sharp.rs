//! Regime classification and the sharp approximations to `P(L_n ≥ n x)`.
//!
//! All assembly happens in log space.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cgfcore::{drate_dz, uncond_tilt, CgfError, CondLaw, TiltSolution};
use crate::dist::TailFamily;
use crate::model::{ModelError, PortfolioModel};
use crate::saddle::{gn_saddle, logsmooth_saddle, mixed_saddle, rv_saddle, SaddleError, SaddleResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SharpError {
    #[error(transparent)]
    Saddle(#[from] SaddleError),
    #[error(transparent)]
    Cgf(#[from] CgfError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no regime covers this model: {0}")]
    RegimeUnsupported(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    UnboundedGN,
    UnboundedRV,
    Mixed,
    LogSmooth,
    BoundaryNondegenerate,
    BoundaryDegenerate,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::UnboundedGN => "UnboundedGN",
            Regime::UnboundedRV => "UnboundedRV",
            Regime::Mixed => "Mixed",
            Regime::LogSmooth => "LogSmooth",
            Regime::BoundaryNondegenerate => "BoundaryNondegenerate",
            Regime::BoundaryDegenerate => "BoundaryDegenerate",
        };
        f.write_str(s)
    }
}

impl Regime {
    pub fn is_boundary(&self) -> bool {
        matches!(self, Regime::BoundaryNondegenerate | Regime::BoundaryDegenerate)
    }
}

/// `log P = rate_term + power_term + polylog_term + constant_term`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Decomposition {
    /// `-n Λ*`.
    pub rate_term: f64,
    /// Every `c log n` contribution.
    pub power_term: f64,
    pub polylog_term: f64,
    pub constant_term: f64,
}

impl Decomposition {
    pub fn total(&self) -> f64 {
        self.rate_term + self.power_term + self.polylog_term + self.constant_term
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharpEstimate {
    pub regime: Regime,
    pub x: f64,
    pub n: usize,
    pub log_prob: f64,
    pub decomposition: Decomposition,
    pub saddle: Option<SaddleResult>,
    /// Unconditional tilt for unbounded regimes; the tilt at the
    /// endpoint for boundary regimes.
    pub tilt: TiltSolution,
    /// `log P` rebuilt purely from the limit constants, where available.
    pub closed_log_prob: Option<f64>,
    /// Relative gap between the analytic and finite-difference `∂zΛ*` at
    /// the endpoint (non-degenerate boundary only).
    pub boundary_fd_gap: Option<f64>,
    /// Size `n^{-1/2}` of the neglected relative remainder.
    pub remainder_band: f64,
}

impl SharpEstimate {
    pub fn prob(&self) -> f64 {
        self.log_prob.exp()
    }
}

/// Picks the regime from the factor support and the tail classes.
pub fn classify_regime(model: &PortfolioModel) -> Result<Regime, SharpError> {
    let z = model.factor_law()?;
    let e = &model.eps;
    let rv_left = z.left_rv(1.0).is_some();
    Ok(match (&z, e) {
        (TailFamily::PointMass { .. }, _) => Regime::BoundaryDegenerate,
        (TailFamily::LowerBoundedRv { z0, .. }, _) => {
            if !(z.pdf(*z0).map_or(false, |f| f > 0.0)) {
                return Err(SharpError::RegimeUnsupported("factor density vanishes at its endpoint".into()));
            }
            Regime::BoundaryNondegenerate
        }
        (TailFamily::Gn { gamma: gz, .. }, TailFamily::Gn { gamma: ge, .. }) if (gz - ge).abs() < 1e-12 => {
            Regime::UnboundedGN
        }
        (_, TailFamily::SymmetricRv { .. }) if rv_left => Regime::UnboundedRV,
        (_, TailFamily::Gn { gamma, .. }) if rv_left && *gamma == 2.0 => Regime::Mixed,
        (TailFamily::Gn { .. } | TailFamily::LogSmooth { .. } | TailFamily::SymmetricRv { .. } | TailFamily::ReflectedRv { .. },
         TailFamily::Gn { .. } | TailFamily::LogSmooth { .. }) => Regime::LogSmooth,
        _ => {
            return Err(SharpError::RegimeUnsupported(format!("factor {} with noise {}", z.name(), e.name())));
        }
    })
}

/// Sharp tail in the regime picked by [`classify_regime`].
pub fn sharp_tail(model: &PortfolioModel, x: f64, n: usize) -> Result<SharpEstimate, SharpError> {
    let regime = classify_regime(model)?;
    sharp_tail_in(model, x, n, regime)
}

fn check_model(model: &PortfolioModel) -> Result<(), SharpError> {
    let rep = model.validate();
    if !rep.is_ok() {
        return Err(SharpError::Model(ModelError::Invalid(rep.violations.join("; "))));
    }
    Ok(())
}

/// Sharp tail with the regime forced; the unbounded regimes share the
/// direct Laplace assembly and differ only in the saddle search.
pub fn sharp_tail_in(model: &PortfolioModel, x: f64, n: usize, regime: Regime) -> Result<SharpEstimate, SharpError> {
    check_model(model)?;
    if n == 0 {
        return Err(SharpError::Precondition("n must be positive".into()));
    }
    let nf = n as f64;
    let half_log_2pi = 0.5 * (2.0 * PI).ln();
    let band = nf.powf(-0.5);
    match regime {
        Regime::BoundaryDegenerate => {
            let kappa = model.factor_law()?.ess_inf();
            let law = CondLaw::at(model, kappa);
            if !(x > law.mean()) {
                return Err(SharpError::Precondition(format!("x = {} must exceed q_κ = {}", x, law.mean())));
            }
            let t = law.tilt(x)?;
            let dec = Decomposition {
                rate_term: -nf * t.rate,
                power_term: -0.5 * nf.ln(),
                polylog_term: 0.0,
                constant_term: -(t.theta * t.sigma).ln() - half_log_2pi,
            };
            Ok(SharpEstimate {
                regime,
                x,
                n,
                log_prob: dec.total(),
                decomposition: dec,
                saddle: None,
                tilt: t,
                closed_log_prob: Some(dec.total()),
                boundary_fd_gap: None,
                remainder_band: band,
            })
        }
        Regime::BoundaryNondegenerate => {
            let zl = model.factor_law()?;
            let z0 = zl.ess_inf();
            let law = CondLaw::at(model, z0);
            if !(x > law.mean()) {
                return Err(SharpError::Precondition(format!("x = {} must exceed the mean {} at the endpoint", x, law.mean())));
            }
            let t = law.tilt(x)?;
            let d = drate_dz(model, x, z0)?;
            let h = 1e-5 * z0.abs().max(1.0);
            let fd = (CondLaw::at(model, z0 + h).tilt(x)?.rate - CondLaw::at(model, z0 - h).tilt(x)?.rate) / (2.0 * h);
            let fz0 = zl.pdf(z0).map_err(ModelError::from)?;
            let c = fz0 / d;
            if !(c > 0.0 && c.is_finite()) {
                return Err(SharpError::Precondition(format!("endpoint constant C = {} is not positive and finite", c)));
            }
            let dec = Decomposition {
                rate_term: -nf * t.rate,
                power_term: -1.5 * nf.ln(),
                polylog_term: 0.0,
                constant_term: c.ln() - (t.theta * t.sigma).ln() - half_log_2pi,
            };
            Ok(SharpEstimate {
                regime,
                x,
                n,
                log_prob: dec.total(),
                decomposition: dec,
                saddle: None,
                tilt: t,
                closed_log_prob: Some(dec.total()),
                boundary_fd_gap: Some((fd / d - 1.0).abs()),
                remainder_band: band,
            })
        }
        _ => {
            if !(x > model.u.mean()) {
                return Err(SharpError::Precondition(format!("x = {} must exceed μ_U = {}", x, model.u.mean())));
            }
            let sad = match regime {
                Regime::UnboundedGN => gn_saddle(model, x, n)?,
                Regime::UnboundedRV => rv_saddle(model, x, n)?,
                Regime::Mixed => mixed_saddle(model, x, n)?,
                _ => logsmooth_saddle(model, x, n)?,
            };
            let t = uncond_tilt(&model.u, x)?;
            let log_psi = -(t.theta * t.sigma).ln();
            let rate_term = -nf * t.rate;
            let log_prob = rate_term - 0.5 * nf.ln() + sad.log_laplace + log_psi;
            let (dec, closed) = match sad.closed {
                Some(c) => {
                    let power_term = (c.n_power - 0.5) * nf.ln();
                    let dec = Decomposition {
                        rate_term,
                        power_term,
                        polylog_term: c.polylog,
                        constant_term: log_prob - rate_term - power_term - c.polylog,
                    };
                    (dec, Some(rate_term + power_term + c.polylog + c.constant + log_psi))
                }
                None => {
                    let dec = Decomposition {
                        rate_term,
                        power_term: -0.5 * nf.ln(),
                        polylog_term: sad.log_laplace,
                        constant_term: log_psi,
                    };
                    (dec, None)
                }
            };
            Ok(SharpEstimate {
                regime,
                x,
                n,
                log_prob,
                decomposition: dec,
                saddle: Some(sad),
                tilt: t,
                closed_log_prob: closed,
                boundary_fd_gap: None,
                remainder_band: band,
            })
        }
    }
}

/// Conditional Bahadur-Rao tail `log P(L_n > n x | Z = z)`.
pub fn conditional_br(model: &PortfolioModel, x: f64, n: usize, z: f64) -> Result<f64, SharpError> {
    let law = CondLaw::at(model, z);
    if !(x > law.mean()) {
        return Err(SharpError::Precondition(format!("x = {} must exceed the conditional mean {}", x, law.mean())));
    }
    let t = law.tilt(x)?;
    let nf = n as f64;
    Ok(-0.5 * nf.ln() - nf * t.rate - t.theta.ln() - t.sigma.ln() - 0.5 * (2.0 * PI).ln())
}
