//! Second-order VaR and ES of `L_n / n` from the sharp tail.
//!
//! The quantile solves
//! `x = m + sqrt(2 s² [−log(1−α) + c_n(x)] / n)`
//! where `c_n(x)` collects everything in `log P(L_n ≥ n x)` except the rate,
//! and `(m, s²)` are the mean and variance the rate is expanded around.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cgfcore::{uncond_tilt, CgfError, CondLaw};
use crate::model::PortfolioModel;
use crate::numeric::{illinois, sig17};
use crate::sharp::{classify_regime, sharp_tail_in, Regime, SharpError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiskError {
    #[error(transparent)]
    Sharp(#[from] SharpError),
    #[error(transparent)]
    Cgf(#[from] CgfError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("bracketed term is not positive at α = {alpha}, n = {n}: outside the large-deviation range")]
    NegativeDiscriminant { alpha: f64, n: usize },
}

/// Where the `(2π)^{-1/2}` goes in the unbounded regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailConstant {
    /// `log C` carries an extra `−½ log 2π`.
    #[default]
    Published,
    /// The bare constant of the sharp tail.
    Theorem,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RiskOptions {
    pub constant: TailConstant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskResult {
    pub alpha: f64,
    pub n: usize,
    pub var: f64,
    pub es: f64,
    /// Tilt used for the ES step.
    pub theta: f64,
    /// The bracketed term at the solution.
    pub bracket: f64,
    pub regime: Regime,
    pub inputs_echo: String,
    pub warning: Option<String>,
}

/// FNV-1a digest of the model's debug form.
pub fn model_digest(model: &PortfolioModel) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in format!("{:?}", model).bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{:016x}", h)
}

/// Expansion centre and variance.
fn centre(model: &PortfolioModel, regime: Regime) -> Result<(f64, f64), RiskError> {
    if regime == Regime::BoundaryDegenerate {
        // conditional moments at κ; the unconditional ones would centre
        // the expansion away from where the loss actually lives
        let kappa = model.factor_law().map_err(SharpError::from)?.ess_inf();
        let law = CondLaw::at(model, kappa);
        let s2 = law.cgf(0.0)?.0 .2;
        Ok((law.mean(), s2))
    } else {
        Ok((model.u.mean(), model.u.variance()))
    }
}

/// `log P(L_n ≥ n x)` without its rate term.
fn correction(model: &PortfolioModel, x: f64, n: usize, regime: Regime, opts: RiskOptions) -> Result<f64, RiskError> {
    let e = sharp_tail_in(model, x, n, regime)?;
    let extra = if opts.constant == TailConstant::Published && !regime.is_boundary() { 0.5 * (2.0 * PI).ln() } else { 0.0 };
    Ok(e.log_prob - e.decomposition.rate_term - extra)
}

const SCAN: usize = 16;

/// VaR and ES at one `(α, n)`.
pub fn risk_point(model: &PortfolioModel, alpha: f64, n: usize, opts: RiskOptions) -> Result<RiskResult, RiskError> {
    if !(0.9..1.0).contains(&alpha) {
        return Err(RiskError::Precondition(format!("α = {} must lie in [0.9, 1)", alpha)));
    }
    if n == 0 {
        return Err(RiskError::Precondition("n must be positive".into()));
    }
    let warning = (alpha < 0.95).then(|| format!("α = {} is below 0.95; the tail expansion may be loose", alpha));
    let regime = classify_regime(model)?;
    let (m, s2) = centre(model, regime)?;
    let sup = model.u.ess_sup();
    let hi = if sup.is_finite() { m + 0.98 * (sup - m) } else { m + 20.0 * s2.sqrt() };
    let lo = m + 1e-6 * (hi - m);
    let nf = n as f64;
    let tail = -(1.0 - alpha).ln();
    let bracket = |x: f64| -> Result<f64, RiskError> { Ok(tail + correction(model, x, n, regime, opts)?) };
    let g = |x: f64| -> Result<f64, RiskError> { Ok(x - m - (2.0 * s2 * bracket(x)?.max(0.0) / nf).sqrt()) };
    // denser near the centre, where the quantile sits for moderate n
    let grid: Vec<f64> = (0..=SCAN).map(|i| lo + (hi - lo) * (i as f64 / SCAN as f64).powi(2)).collect();
    let vals: Vec<f64> = grid.iter().map(|x| g(*x)).collect::<Result<_, _>>()?;
    let i = (0..SCAN).find(|i| vals[*i] < 0.0 && vals[i + 1] >= 0.0).ok_or(RiskError::NegativeDiscriminant { alpha, n })?;
    let gf = |x: f64| g(x).unwrap_or(f64::NAN);
    let var = illinois(gf, grid[i], grid[i + 1], 1e-12).map_err(|_| RiskError::NegativeDiscriminant { alpha, n })?;
    let br = bracket(var)?;
    if !(br > 0.0) {
        return Err(RiskError::NegativeDiscriminant { alpha, n });
    }
    let theta = if regime == Regime::BoundaryDegenerate {
        let kappa = model.factor_law().map_err(SharpError::from)?.ess_inf();
        CondLaw::at(model, kappa).tilt(var)?.theta
    } else {
        uncond_tilt(&model.u, var)?.theta
    };
    Ok(RiskResult {
        alpha,
        n,
        var,
        es: var + 1.0 / (nf * theta),
        theta,
        bracket: br,
        regime,
        inputs_echo: model_digest(model),
        warning,
    })
}

pub fn var_approx(model: &PortfolioModel, alpha: f64, n: usize) -> Result<f64, RiskError> {
    Ok(risk_point(model, alpha, n, RiskOptions::default())?.var)
}

pub fn es_approx(model: &PortfolioModel, alpha: f64, n: usize) -> Result<f64, RiskError> {
    Ok(risk_point(model, alpha, n, RiskOptions::default())?.es)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    VaR,
    ES,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskCell {
    pub measure: Measure,
    pub alpha: f64,
    pub n: usize,
    pub value: Option<f64>,
    pub regime: Option<Regime>,
    /// Set when the cell fell outside the large-deviation range or failed.
    pub flag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RiskTable {
    pub alphas: Vec<f64>,
    pub ns: Vec<usize>,
    /// VaR rows first, then ES rows; α-major within each.
    pub cells: Vec<RiskCell>,
}

impl RiskTable {
    pub fn get(&self, measure: Measure, alpha: f64, n: usize) -> Option<&RiskCell> {
        self.cells.iter().find(|c| c.measure == measure && c.alpha == alpha && c.n == n)
    }

    pub fn has_flags(&self) -> bool {
        self.cells.iter().any(|c| c.flag.is_some())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("measure,alpha,n,value,regime,fallback_flag\n");
        for c in &self.cells {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                match c.measure {
                    Measure::VaR => "VaR",
                    Measure::ES => "ES",
                },
                c.alpha,
                c.n,
                c.value.map_or(String::new(), sig17),
                c.regime.map_or(String::new(), |r| r.to_string()),
                c.flag.as_deref().unwrap_or("")
            );
        }
        s
    }

    /// Rows per (measure, α), one column per `n`, three decimals; flagged
    /// cells print as `CLT`.
    pub fn to_text(&self) -> String {
        let mut s = format!("{:<4} {:<10}", "", "");
        for n in &self.ns {
            let _ = write!(s, " {:>8}", format!("n={}", n));
        }
        s.push('\n');
        for (measure, name) in [(Measure::VaR, "VaR"), (Measure::ES, "ES")] {
            for a in &self.alphas {
                let _ = write!(s, "{:<4} {:<10}", name, format!("α={}", a));
                for n in &self.ns {
                    let txt = match self.get(measure, *a, *n).and_then(|c| c.value) {
                        Some(v) => format!("{:.3}", v),
                        None => "CLT".into(),
                    };
                    let _ = write!(s, " {:>8}", txt);
                }
                s.push('\n');
            }
        }
        s
    }
}

pub fn risk_table(model: &PortfolioModel, alphas: &[f64], ns: &[usize]) -> RiskTable {
    risk_table_with(model, alphas, ns, RiskOptions::default())
}

/// Cells are computed in parallel; each is independent of the others.
pub fn risk_table_with(model: &PortfolioModel, alphas: &[f64], ns: &[usize], opts: RiskOptions) -> RiskTable {
    let pairs: Vec<(f64, usize)> = alphas.iter().flat_map(|a| ns.iter().map(move |n| (*a, *n))).collect();
    let results: Vec<Result<RiskResult, RiskError>> = pairs.par_iter().map(|(a, n)| risk_point(model, *a, *n, opts)).collect();
    let mut cells = Vec::with_capacity(2 * pairs.len());
    for measure in [Measure::VaR, Measure::ES] {
        for ((a, n), r) in pairs.iter().zip(&results) {
            cells.push(match r {
                Ok(r) => RiskCell {
                    measure,
                    alpha: *a,
                    n: *n,
                    value: Some(if measure == Measure::VaR { r.var } else { r.es }),
                    regime: Some(r.regime),
                    flag: None,
                },
                Err(e) => RiskCell {
                    measure,
                    alpha: *a,
                    n: *n,
                    value: None,
                    regime: classify_regime(model).ok(),
                    flag: Some(match e {
                        RiskError::NegativeDiscriminant { .. } => "NegativeDiscriminant".into(),
                        other => other.to_string().replace(',', ";"),
                    }),
                },
            });
        }
    }
    RiskTable { alphas: alphas.to_vec(), ns: ns.to_vec(), cells }
}
