//! Conditional cumulant generating function of one obligor's loss given the
//! factor value, its partial derivatives, exponential tilts and Legendre
//! transforms.
//!
//! With `p = p(z)`, `q = 1 - p` and `Λ_U` the loss log-mgf,
//! `Λ(θ;z) = log(p e^{Λ_U(θ)} + q)`. Everything is evaluated through
//! `s = p + q e^{-Λ_U}` so that neither `p → 1` nor `p → 0` loses digits.

use thiserror::Error;

use crate::model::{Cgf3, LossLaw, PortfolioModel};
use crate::numeric::{newton_bisect, RootError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CgfError {
    #[error("θ = {theta} outside the mgf domain (θ_0 = {theta0})")]
    DomainError { theta: f64, theta0: f64 },
    #[error("x = {x} outside the attainable range ({lo}, {hi})")]
    NoRoot { x: f64, lo: f64, hi: f64 },
    #[error("tilt solver did not converge")]
    NonConvergence,
}

impl From<RootError> for CgfError {
    fn from(e: RootError) -> Self {
        match e {
            RootError::NoBracket { .. } => CgfError::NonConvergence,
            RootError::NonConvergence { .. } => CgfError::NonConvergence,
        }
    }
}

/// Solved exponential tilt `Λ'(θ) = x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltSolution {
    pub theta: f64,
    pub cgf_value: f64,
    pub deriv1: f64,
    pub deriv2: f64,
    /// `θx - Λ(θ)`.
    pub rate: f64,
    /// `√Λ''(θ)`.
    pub sigma: f64,
    pub residual: f64,
}

/// Partial derivatives of the conditional CGF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Partials {
    pub d_theta: f64,
    pub d_z: f64,
    pub d_theta_theta: f64,
    pub d_z_theta: f64,
}

/// The law of `U X` given the factor value, reduced to `(p, q)`.
#[derive(Debug, Clone, Copy)]
pub struct CondLaw<'a> {
    pub u: &'a LossLaw,
    pub p: f64,
    pub q: f64,
}

impl<'a> CondLaw<'a> {
    pub fn at(model: &'a PortfolioModel, z: f64) -> Self {
        CondLaw { u: &model.u, p: model.p_default(z), q: model.q_survive(z) }
    }

    pub fn from_p(u: &'a LossLaw, p: f64) -> Self {
        CondLaw { u, p, q: 1.0 - p }
    }

    pub fn mean(&self) -> f64 {
        self.p * self.u.mean()
    }

    fn check(&self, t: f64) -> Result<Cgf3, CgfError> {
        let t0 = self.u.theta0();
        if t >= t0 {
            return Err(CgfError::DomainError { theta: t, theta0: t0 });
        }
        Ok(self.u.cgf(t))
    }

    /// `(Λ, Λ', Λ'')` in θ, plus the tilted default weight `w = p e^{Λ_U}/e^{Λ}`.
    pub fn cgf(&self, t: f64) -> Result<(Cgf3, f64), CgfError> {
        let (lu, d1, d2) = self.check(t)?;
        let e = (-lu).exp();
        let s = self.p + self.q * e;
        let l = if s < 0.5 { lu + s.ln() } else { lu + (-self.q * -(-lu).exp_m1()).ln_1p() };
        let w = if s > 0.0 { self.p / s } else { 1.0 };
        let dt = w * d1;
        let dtt = w * d2 + w * (1.0 - w) * d1 * d1;
        Ok(((l, dt, dtt), w))
    }

    pub fn value(&self, t: f64) -> Result<f64, CgfError> {
        Ok(self.cgf(t)?.0 .0)
    }

    /// Exponential tilt with `Λ'(θ) = x`.
    pub fn tilt(&self, x: f64) -> Result<TiltSolution, CgfError> {
        let lo_x = self.mean();
        let hi_x = if self.p > 0.0 { self.u.ess_sup() } else { 0.0 };
        solve_tilt(|t| self.cgf(t).map(|c| c.0), x, lo_x, hi_x, self.u.theta0())
    }
}

/// Solves `Λ'(θ) = x` on `[0, θ_0)` for a convex `Λ` whose derivative runs
/// from `lo_x` at θ = 0 to `hi_x` as θ → θ_0.
pub fn solve_tilt<F>(cgf: F, x: f64, lo_x: f64, hi_x: f64, theta0: f64) -> Result<TiltSolution, CgfError>
where
    F: Fn(f64) -> Result<Cgf3, CgfError>,
{
    if (x - lo_x).abs() < 1e-9 {
        let (l, d1, d2) = cgf(0.0)?;
        return Ok(TiltSolution { theta: 0.0, cgf_value: l, deriv1: d1, deriv2: d2, rate: 0.0, sigma: d2.sqrt(), residual: 0.0 });
    }
    if !(x > lo_x && x < hi_x) {
        return Err(CgfError::NoRoot { x, lo: lo_x, hi: hi_x });
    }
    let lo = 1e-12;
    let mut hi = if theta0.is_finite() { 0.999 * theta0 } else { 1.0 };
    let slope = |t: f64| cgf(t).map(|c| c.1).unwrap_or(f64::INFINITY);
    let mut guard = 0;
    while slope(hi) <= x {
        if theta0.is_finite() {
            hi = theta0 - 0.5 * (theta0 - hi);
        } else {
            hi *= 2.0;
        }
        guard += 1;
        if guard > 2000 {
            return Err(CgfError::NonConvergence);
        }
    }
    let theta = if slope(lo) >= x {
        lo
    } else {
        newton_bisect(
            |t| match cgf(t) {
                Ok((_, d1, d2)) => (d1 - x, d2),
                Err(_) => (f64::INFINITY, f64::NAN),
            },
            lo,
            hi,
            1e-16,
            200,
        )?
    };
    let (l, d1, d2) = cgf(theta)?;
    Ok(TiltSolution {
        theta,
        cgf_value: l,
        deriv1: d1,
        deriv2: d2,
        rate: theta * x - l,
        sigma: d2.sqrt(),
        residual: (d1 - x).abs(),
    })
}

/// Tilt of the loss law itself, `Λ_U'(θ_x) = x`.
pub fn uncond_tilt(u: &LossLaw, x: f64) -> Result<TiltSolution, CgfError> {
    solve_tilt(|t| Ok(u.cgf(t)), x, u.mean(), u.ess_sup(), u.theta0())
}

/// `Λ(θ;z)`.
pub fn cond_cgf(model: &PortfolioModel, theta: f64, z: f64) -> Result<f64, CgfError> {
    CondLaw::at(model, z).value(theta)
}

/// The four closed-form partials `∂θΛ, ∂zΛ, ∂θθΛ, ∂zθΛ`.
pub fn cond_cgf_partials(model: &PortfolioModel, theta: f64, z: f64) -> Result<Partials, CgfError> {
    let law = CondLaw::at(model, z);
    let ((_, dt, dtt), _) = law.cgf(theta)?;
    let (lu, d1, _) = model.u.cgf(theta);
    let pz = model.dp_dz(z);
    let e = (-lu).exp();
    let s = law.p + law.q * e;
    let c = -(-lu).exp_m1();
    Ok(Partials { d_theta: dt, d_z: pz * c / s, d_theta_theta: dtt, d_z_theta: pz * d1 * e / (s * s) })
}

/// `C(θ) = (λ_U(θ) - 1)/λ_U(θ)`.
pub fn c_of(u: &LossLaw, theta: f64) -> f64 {
    -(-u.cgf(theta).0).exp_m1()
}

/// `Λ*(x;z)`, or `Λ*_U(x)` when `z` is `None`.
pub fn rate_fn(model: &PortfolioModel, x: f64, z: Option<f64>) -> Result<f64, CgfError> {
    match z {
        None => uncond_tilt(&model.u, x).map(|t| t.rate),
        Some(z) => CondLaw::at(model, z).tilt(x).map(|t| t.rate),
    }
}

/// Ingredients of the small-`q` expansion of `φ_n`; returns `(φ/q, q)`.
fn phi_scaled_small_q(u: &LossLaw, ux: &TiltSolution, q: f64) -> (f64, f64) {
    let (lu, d1, d2) = u.cgf(ux.theta);
    let e = (-lu).exp();
    let c = -(-lu).exp_m1();
    let c1 = d1 * e;
    let c2 = (d2 - d1 * d1) * e;
    let one = 1.0 - q * c;
    let g_over_q = if q > 0.0 { -(-q * c).ln_1p() / q } else { c };
    let g1_over_q = c1 / one;
    let g2 = q * c2 / one + (q * c1 / one).powi(2);
    (g_over_q + 0.5 * q * g1_over_q * g1_over_q / (d2 - g2), q)
}

/// `φ_n(z) = Λ*(x;z) - Λ*_U(x)`.
pub fn phi_n(model: &PortfolioModel, x: f64, z: f64) -> Result<f64, CgfError> {
    let ux = uncond_tilt(&model.u, x)?;
    phi_n_with(model, x, z, &ux)
}

/// `φ_n` reusing an already solved unconditional tilt.
pub fn phi_n_with(model: &PortfolioModel, x: f64, z: f64, ux: &TiltSolution) -> Result<f64, CgfError> {
    let q = model.q_survive(z);
    if q < 1e-6 {
        let (r, q) = phi_scaled_small_q(&model.u, ux, q);
        return Ok(r * q);
    }
    Ok(CondLaw::at(model, z).tilt(x)?.rate - ux.rate)
}

/// `φ_n(-M) / (g(M) C_x)` with `g(M) = 1 - F_ε((v+M)/b)`; stays finite when
/// `g(M)` underflows.
pub fn phi_expansion_ratio(model: &PortfolioModel, x: f64, m: f64) -> Result<f64, CgfError> {
    let ux = uncond_tilt(&model.u, x)?;
    let cx = c_of(&model.u, ux.theta);
    let q = model.q_survive(-m);
    if q < 1e-6 {
        let (r, _) = phi_scaled_small_q(&model.u, &ux, q);
        return Ok(r / cx);
    }
    Ok(phi_n_with(model, x, -m, &ux)? / (q * cx))
}

/// `ψ_∞ = 1/(θ_x √Λ_U''(θ_x))`.
pub fn psi_infty(model: &PortfolioModel, x: f64) -> Result<f64, CgfError> {
    let t = uncond_tilt(&model.u, x)?;
    Ok(1.0 / (t.theta * t.sigma))
}

/// `ψ_∞(z) = 1/(θ̄ √Λ''(θ̄;z))` with the conditional tilt.
pub fn psi_cond(model: &PortfolioModel, x: f64, z: f64) -> Result<f64, CgfError> {
    let t = CondLaw::at(model, z).tilt(x)?;
    Ok(1.0 / (t.theta * t.sigma))
}

/// Slope of the tilt path, `dθ/dz = -∂zθΛ / ∂θθΛ` at the tilt.
pub fn dtheta_dz(model: &PortfolioModel, x: f64, z: f64) -> Result<f64, CgfError> {
    let t = CondLaw::at(model, z).tilt(x)?;
    let pa = cond_cgf_partials(model, t.theta, z)?;
    Ok(-pa.d_z_theta / pa.d_theta_theta)
}

/// `dΛ*(x;z)/dz` by the chain rule through the tilt path:
/// `(x - ∂θΛ) dθ/dz - ∂zΛ`, where the first term vanishes at the tilt.
pub fn drate_dz(model: &PortfolioModel, x: f64, z: f64) -> Result<f64, CgfError> {
    let t = CondLaw::at(model, z).tilt(x)?;
    let pa = cond_cgf_partials(model, t.theta, z)?;
    let dth = -pa.d_z_theta / pa.d_theta_theta;
    Ok((x - pa.d_theta) * dth - pa.d_z)
}
