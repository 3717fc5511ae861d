//! Location of the dominating factor value and the Laplace evaluation of
//! `∫ e^{n h̃(z)} ψ(z) dz` with `n h̃(z) = -n φ_n(z) + log f_Z(z)`.
//!
//! Every regime is handled on a rescaled axis `z = z(t)`: linear,
//! `z = -t M`, for light tails and logarithmic, `z = -M^t`, for regularly
//! varying ones. The objective `g(t) = n h̃(z(t)) + log|z'(t)|` is maximized
//! directly; closed-form approximations, where the theory supplies them,
//! are carried alongside for comparison.

use thiserror::Error;

use crate::cgfcore::{c_of, cond_cgf_partials, phi_n_with, uncond_tilt, CgfError, CondLaw, TiltSolution};
use crate::dist::TailFamily;
use crate::model::{ModelError, PortfolioModel};
use crate::numeric::{bisect, d1_stencil, golden_max, integrate, integrate_to_inf, newton_bisect};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SaddleError {
    #[error(transparent)]
    Cgf(#[from] CgfError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("tail families do not fit this regime: {0}")]
    FamilyMismatch(String),
    #[error("balance equation has no sign change on [{lo}, {hi}]")]
    BalanceUnsolvable { lo: f64, hi: f64 },
    #[error("no interior maximum of the Laplace objective")]
    NoSaddle,
}

/// Rescaling of the factor axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scale {
    /// `z = -t M`.
    Linear { m: f64 },
    /// `z = -M^t`.
    Log { m: f64 },
}

impl Scale {
    pub fn m(&self) -> f64 {
        match *self {
            Scale::Linear { m } | Scale::Log { m } => m,
        }
    }

    pub fn z(&self, t: f64) -> f64 {
        match *self {
            Scale::Linear { m } => -t * m,
            Scale::Log { m } => -m.powf(t),
        }
    }

    pub fn t_of(&self, z: f64) -> f64 {
        match *self {
            Scale::Linear { m } => -z / m,
            Scale::Log { m } => (-z).ln() / m.ln(),
        }
    }

    /// `log|z'(t)|`.
    fn log_jac(&self, t: f64) -> f64 {
        match *self {
            Scale::Linear { m } => m.ln(),
            Scale::Log { m } => t * m.ln() + m.ln().ln(),
        }
    }

    /// The part of `log|z'(t)|` that is not folded into `n h_n(t)`.
    fn log_measure(&self) -> f64 {
        match *self {
            Scale::Linear { m } => m.ln(),
            Scale::Log { m } => m.ln().ln(),
        }
    }
}

/// Closed-form saddle quantities; any of them may be unavailable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForm {
    /// Refined root; `None` when the fixed point did not settle.
    pub t0: Option<f64>,
    pub exponent: Option<f64>,
    pub curvature: Option<f64>,
    /// `log(e^{-nφ_n} H_n^{-1})` predicted by the limit constants.
    pub log_laplace: f64,
    /// Power of `log n`-free `n` in `log(e^{-nφ_n} H_n^{-1})`.
    pub n_power: f64,
    /// The slowly growing part: `log log n` terms, slowly varying factors.
    pub polylog: f64,
    /// The limit constant.
    pub constant: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleResult {
    pub scale: Scale,
    /// First-order scale `M_n`.
    pub m_n: f64,
    pub t0: f64,
    /// `M̃_n`, the saddle sits at `z = -M̃_n`.
    pub m_tilde: f64,
    /// `n h_n(t0)`.
    pub exponent: f64,
    /// `n h_n''(t0)`.
    pub curvature: f64,
    /// `n h̃_n''(-M̃_n)`.
    pub curvature_z: f64,
    /// `log [H_n(-M̃_n)]^{-1}`.
    pub log_h_inv: f64,
    pub h_inv: f64,
    pub phi_at_saddle: f64,
    /// `log(e^{-nφ_n(-M̃_n)} [H_n(-M̃_n)]^{-1})`.
    pub log_laplace: f64,
    /// `|g'(t0)| / |g''(t0)|`.
    pub stationarity: f64,
    pub closed: Option<ClosedForm>,
}

/// The Laplace integrand for a given model, target and portfolio size.
pub struct Objective<'a> {
    pub model: &'a PortfolioModel,
    pub zlaw: TailFamily,
    pub x: f64,
    pub n: f64,
    pub ux: TiltSolution,
}

impl<'a> Objective<'a> {
    pub fn new(model: &'a PortfolioModel, x: f64, n: usize) -> Result<Self, SaddleError> {
        let zlaw = model.factor_law()?;
        let ux = uncond_tilt(&model.u, x)?;
        Ok(Objective { model, zlaw, x, n: n as f64, ux })
    }

    /// `n h̃(z)`.
    pub fn value(&self, z: f64) -> Result<f64, SaddleError> {
        let lf = self.zlaw.log_pdf(z).map_err(ModelError::from)?;
        Ok(-self.n * phi_n_with(self.model, self.x, z, &self.ux)? + lf)
    }

    /// `(n h̃)'(z) = n ∂zΛ(θ_z; z) + (log f_Z)'(z)`.
    pub fn grad(&self, z: f64) -> Result<f64, SaddleError> {
        let t = CondLaw::at(self.model, z).tilt(self.x)?;
        let pa = cond_cgf_partials(self.model, t.theta, z)?;
        Ok(self.n * pa.d_z + self.zlaw.left_hazard(-z))
    }

    /// `ψ_n(z) = 1/(θ(z) σ(z))`.
    pub fn psi(&self, z: f64) -> Result<f64, SaddleError> {
        let t = CondLaw::at(self.model, z).tilt(self.x)?;
        Ok(1.0 / (t.theta * t.sigma))
    }

    pub fn phi(&self, z: f64) -> Result<f64, SaddleError> {
        Ok(phi_n_with(self.model, self.x, z, &self.ux)?)
    }

    fn g(&self, s: &Scale, t: f64) -> f64 {
        self.value(s.z(t)).map(|v| v + s.log_jac(t)).unwrap_or(f64::NEG_INFINITY)
    }

    fn dg(&self, s: &Scale, t: f64) -> f64 {
        let z = s.z(t);
        let gz = match self.grad(z) {
            Ok(g) => g,
            Err(_) => return f64::NAN,
        };
        match *s {
            Scale::Linear { m } => -m * gz,
            Scale::Log { m } => m.ln() * (gz * z + 1.0),
        }
    }
}

/// `C_x = (λ_U(θ_x) - 1)/λ_U(θ_x)`.
pub fn c_x(model: &PortfolioModel, x: f64) -> Result<f64, SaddleError> {
    let t = uncond_tilt(&model.u, x)?;
    Ok(c_of(&model.u, t.theta))
}

/// Maximizes `g` on the given scale: golden section on `[0.5, 1.5]`,
/// widened while the maximum sits on an edge, then Newton on `g'`.
pub fn direct_saddle(obj: &Objective, scale: Scale) -> Result<SaddleResult, SaddleError> {
    let f = |t: f64| obj.g(&scale, t);
    let (mut a, mut b) = (0.5, 1.5);
    let mut t_star;
    let mut guard = 0;
    loop {
        let (t, _) = golden_max(f, a, b, 1e-5);
        t_star = t;
        let w = b - a;
        let near_lo = t - a < 1e-6 * w;
        let near_hi = b - t < 1e-6 * w;
        if !(near_lo || near_hi) {
            break;
        }
        guard += 1;
        if guard > 60 {
            return Err(SaddleError::NoSaddle);
        }
        if near_lo {
            // keep z strictly negative on the linear axis
            a = match scale {
                Scale::Linear { .. } => (a - w).max(0.5 * a),
                Scale::Log { .. } => a - w,
            };
            if a <= 1e-9 && matches!(scale, Scale::Linear { .. }) {
                return Err(SaddleError::NoSaddle);
            }
        } else {
            b += w;
        }
    }
    let dg = |t: f64| obj.dg(&scale, t);
    let h = 1e-4;
    let mut delta = 1e-3;
    let (mut lo, mut hi) = (t_star - delta, t_star + delta);
    let mut tries = 0;
    while !(dg(lo) > 0.0 && dg(hi) < 0.0) {
        delta *= 2.0;
        lo = t_star - delta;
        hi = t_star + delta;
        tries += 1;
        if tries > 12 {
            break;
        }
    }
    let t0 = if dg(lo) > 0.0 && dg(hi) < 0.0 {
        newton_bisect(|t| (dg(t), d1_stencil(&dg, t, h)), lo, hi, 1e-14, 200)
            .or_else(|_| bisect(dg, lo, hi, 1e-14))
            .unwrap_or(t_star)
    } else {
        t_star
    };
    let curvature_g = d1_stencil(&dg, t0, h);
    if !(curvature_g < 0.0) {
        return Err(SaddleError::NoSaddle);
    }
    let z = scale.z(t0);
    let m_tilde = -z;
    let phi = obj.phi(z)?;
    let gz = obj.value(z)?;
    let exponent = gz + scale.log_jac(t0) - scale.log_measure();
    let log_laplace = exponent + scale.log_measure() - 0.5 * (-curvature_g).ln();
    let hz = h * m_tilde.max(1.0);
    let grad = |zz: f64| obj.grad(zz).unwrap_or(f64::NAN);
    let curvature_z = d1_stencil(&grad, z, hz);
    let log_h_inv = log_laplace + obj.n * phi;
    Ok(SaddleResult {
        scale,
        m_n: scale.m(),
        t0,
        m_tilde,
        exponent,
        curvature: curvature_g,
        curvature_z,
        log_h_inv,
        h_inv: log_h_inv.exp(),
        phi_at_saddle: phi,
        log_laplace,
        stationarity: dg(t0).abs() / curvature_g.abs(),
        closed: None,
    })
}

fn gn_params(model: &PortfolioModel, zlaw: &TailFamily) -> Result<(f64, f64, f64), SaddleError> {
    match (&model.eps, zlaw) {
        (TailFamily::Gn { xi: xe, gamma: ge }, TailFamily::Gn { xi: xz, gamma: gz }) if (ge - gz).abs() < 1e-12 => {
            Ok((*xe, *xz, *ge))
        }
        _ => Err(SaddleError::FamilyMismatch("need generalized normal noise and factor with equal γ".into())),
    }
}

/// `M_n = b (log n / ξ_ε)^{1/γ}`.
pub fn gn_scale(b: f64, xi_eps: f64, gamma: f64, n: usize) -> f64 {
    b * ((n as f64).ln() / xi_eps).powf(1.0 / gamma)
}

/// `c_γ = b^γ ξ_Z / ξ_ε`.
pub fn c_gamma(b: f64, xi_eps: f64, xi_z: f64, gamma: f64) -> f64 {
    b.powf(gamma) * xi_z / xi_eps
}

/// Closed-form quantities for generalized normal noise and factor.
pub fn gn_closed(model: &PortfolioModel, x: f64, n: usize) -> Result<ClosedForm, SaddleError> {
    let zlaw = model.factor_law()?;
    let (xe, xz, g) = gn_params(model, &zlaw)?;
    let (b, v) = (model.b, model.v);
    let nf = n as f64;
    let m = gn_scale(b, xe, g, n);
    let cx = c_x(model, x)?;
    let be = TailFamily::gn_beta(xe, g);
    let bz = TailFamily::gn_beta(xz, g);
    let eta = if g == 2.0 { (-v * v * xz).exp() } else { 1.0 };
    let c = c_gamma(b, xe, xz, g);
    let lg = (cx * be / (xz * g * b)).ln();
    let bg = b.powf(g);
    let rhs = |t: f64| {
        1.0 + (1.0 - g) * bg / xe * m.ln() / m.powf(g) - v * g * t.powf(g - 1.0) / m
            + (bg / xe * lg - eta.ln() / xz) / m.powf(g)
    };
    let mut t = 1.0;
    let mut t0 = None;
    for _ in 0..200 {
        let r = rhs(t);
        if !(r > 0.0) {
            break;
        }
        let next = r.powf(1.0 / g);
        if (next - t).abs() < 1e-12 {
            t0 = Some(next);
            break;
        }
        t = next;
    }
    let delta = c * (1.0 + lg) - bz.ln();
    let exponent = -xz * m.powf(g) - (1.0 - g) * bg * xz / xe * m.ln() + v * g * xz * m.powf(g - 1.0) - (delta - eta.ln());
    let curvature = -xe * xz * (g * m).powi(2) * m.powf(2.0 * (g - 1.0)) / bg;
    let k = (bg / xe).powf(-(1.0 - g) * c / g) / g * (bg / (xe * xz)).sqrt() * b.powf(1.0 - g) * xe.powf((g - 1.0) / g);
    let log_r2 = (g - 1.0) / g * (1.0 - c) * nf.ln().ln();
    let log_r3 = -v * g * c / b * xe.powf(1.0 / g) * nf.ln().powf((g - 1.0) / g);
    let constant = k.ln() - delta + eta.ln();
    Ok(ClosedForm {
        t0,
        exponent: Some(exponent),
        curvature: Some(curvature),
        log_laplace: constant - c * nf.ln() - log_r2 - log_r3,
        n_power: -c,
        polylog: -log_r2 - log_r3,
        constant,
    })
}

/// Generalized normal noise and factor with a common exponent γ.
pub fn gn_saddle(model: &PortfolioModel, x: f64, n: usize) -> Result<SaddleResult, SaddleError> {
    let obj = Objective::new(model, x, n)?;
    let (xe, _, g) = gn_params(model, &obj.zlaw)?;
    let closed = gn_closed(model, x, n)?;
    let mut r = direct_saddle(&obj, Scale::Linear { m: gn_scale(model.b, xe, g, n) })?;
    r.closed = Some(closed);
    Ok(r)
}

fn rv_params(model: &PortfolioModel, zlaw: &TailFamily) -> Result<(f64, f64), SaddleError> {
    let ae = match &model.eps {
        TailFamily::SymmetricRv { alpha, .. } => *alpha,
        _ => return Err(SaddleError::FamilyMismatch("need regularly varying noise".into())),
    };
    match zlaw.left_rv(1.0) {
        Some((az, _)) => Ok((ae, az)),
        None => Err(SaddleError::FamilyMismatch("need a regularly varying left factor tail".into())),
    }
}

/// Closed-form quantities for regularly varying noise and factor.
pub fn rv_closed(model: &PortfolioModel, x: f64, n: usize) -> Result<ClosedForm, SaddleError> {
    let zlaw = model.factor_law()?;
    let (ae, az) = rv_params(model, &zlaw)?;
    let nf = n as f64;
    let m = nf.powf(1.0 / ae);
    let cx = c_x(model, x)?;
    let le = model.eps.right_rv(m).map(|r| r.1).unwrap_or(1.0);
    let lz = zlaw.left_rv(m).map(|r| r.1).unwrap_or(1.0);
    let lead = (cx * ae * model.b.powf(ae) / az).ln();
    let t0 = 1.0 + le.ln() / (ae * m.ln()) + lead / (ae * m.ln());
    let delta = az / ae * lead + az.ln() - az / ae;
    let ratio = az / ae;
    let exponent = -ratio * nf.ln() + lz.ln() + ratio * le.ln() + delta;
    let curvature = -m.ln().powi(2) * ae * az;
    let constant = delta - 0.5 * (ae * az).ln();
    Ok(ClosedForm {
        t0: Some(t0),
        exponent: Some(exponent),
        curvature: Some(curvature),
        log_laplace: constant - ratio * nf.ln() - ratio * le.ln() + lz.ln(),
        n_power: -ratio,
        polylog: -ratio * le.ln() + lz.ln(),
        constant,
    })
}

/// Regularly varying noise and factor; logarithmic axis `z = -M^t`.
pub fn rv_saddle(model: &PortfolioModel, x: f64, n: usize) -> Result<SaddleResult, SaddleError> {
    let obj = Objective::new(model, x, n)?;
    let (ae, _) = rv_params(model, &obj.zlaw)?;
    let closed = rv_closed(model, x, n)?;
    let mut r = direct_saddle(&obj, Scale::Log { m: (n as f64).powf(1.0 / ae) })?;
    r.closed = Some(closed);
    Ok(r)
}

/// `K_x = α_Z (2b²σ²)^{-(α_Z+1)/2} b σ (α_Z+1)^{-1/2}`.
pub fn mixed_constant(alpha_z: f64, b: f64, sigma_eps: f64) -> f64 {
    alpha_z * (2.0 * b * b * sigma_eps * sigma_eps).powf(-(alpha_z + 1.0) / 2.0) * b * sigma_eps / (alpha_z + 1.0).sqrt()
}

/// Gaussian noise, regularly varying factor.
pub fn mixed_saddle(model: &PortfolioModel, x: f64, n: usize) -> Result<SaddleResult, SaddleError> {
    let obj = Objective::new(model, x, n)?;
    let xe = match &model.eps {
        TailFamily::Gn { xi, gamma } if *gamma == 2.0 => *xi,
        _ => return Err(SaddleError::FamilyMismatch("need Gaussian noise".into())),
    };
    let nf = n as f64;
    let lnn = nf.ln();
    let az = match obj.zlaw.left_rv(lnn.sqrt()) {
        Some((a, _)) => a,
        None => return Err(SaddleError::FamilyMismatch("need a regularly varying left factor tail".into())),
    };
    let lz = obj.zlaw.left_rv(lnn.sqrt()).map(|r| r.1).unwrap_or(1.0);
    let sigma = (0.5 / xe).sqrt();
    let k = mixed_constant(az, model.b, sigma);
    let polylog = -(az + 1.0) / 2.0 * lnn.ln() + lz.ln();
    let closed = ClosedForm {
        t0: None,
        exponent: None,
        curvature: None,
        log_laplace: k.ln() + polylog,
        n_power: 0.0,
        polylog,
        constant: k.ln(),
    };
    let mut r = direct_saddle(&obj, Scale::Linear { m: gn_scale(model.b, xe, 2.0, n) })?;
    r.closed = Some(closed);
    Ok(r)
}

/// `log R_{1n}(M) = log(n C_x / b) + log f_ε((v+M)/b) - log r_Z(M)`.
pub fn log_balance(model: &PortfolioModel, zlaw: &TailFamily, cx: f64, n: usize, m: f64) -> f64 {
    let b = model.b;
    let lf = model.eps.log_pdf((model.v + m) / b).unwrap_or(f64::NEG_INFINITY);
    let r = zlaw.left_hazard(m);
    if !(r > 0.0) {
        return f64::INFINITY;
    }
    (n as f64 * cx / b).ln() + lf - r.ln()
}

/// Solves the balance equation `R_{1n}(M) = 1`.
pub fn balance_scale(model: &PortfolioModel, x: f64, n: usize) -> Result<f64, SaddleError> {
    let zlaw = model.factor_law()?;
    let cx = c_x(model, x)?;
    let f = |m: f64| log_balance(model, &zlaw, cx, n, m);
    let (lo0, hi0) = (1e-3, 1e8);
    let mut lo = lo0;
    while lo < hi0 {
        let hi = 2.0 * lo;
        if f(lo) > 0.0 && f(hi) <= 0.0 {
            return Ok(bisect(f, lo, hi, 1e-15).map_err(|_| SaddleError::BalanceUnsolvable { lo, hi })?);
        }
        lo = hi;
    }
    Err(SaddleError::BalanceUnsolvable { lo: lo0, hi: hi0 })
}

/// General log-smooth tails: `M_n` from the balance equation, then the
/// saddle by Newton on `(n h̃)'` started there.
pub fn logsmooth_saddle(model: &PortfolioModel, x: f64, n: usize) -> Result<SaddleResult, SaddleError> {
    let obj = Objective::new(model, x, n)?;
    let m = balance_scale(model, x, n)?;
    direct_saddle(&obj, Scale::Linear { m })
}

/// `J_1, J_2, J_3`: the Laplace integral over `(-∞, -(1+β)M]`,
/// `[-(1+β)M, -(1-β)M]` and `[-(1-β)M, z_0]`, each scaled by
/// `e^{-n h̃(-M̃)}`.
pub fn flank_integrals(
    model: &PortfolioModel,
    x: f64,
    n: usize,
    m: f64,
    m_tilde: f64,
    beta: f64,
    z0: f64,
) -> Result<(f64, f64, f64), SaddleError> {
    let obj = Objective::new(model, x, n)?;
    let peak = obj.value(-m_tilde)?;
    let integrand = |z: f64| match (obj.value(z), obj.psi(z)) {
        (Ok(v), Ok(p)) => {
            let r = (v - peak).exp() * p;
            if r.is_finite() {
                r
            } else {
                0.0
            }
        }
        _ => 0.0,
    };
    let a = -(1.0 + beta) * m;
    let c = -(1.0 - beta) * m;
    let tol = 1e-12;
    let j1 = integrate_to_inf(|s| integrand(a - s), 0.0, tol);
    let j2 = integrate(integrand, a, c, tol);
    let j3 = if z0 > c { integrate(integrand, c, z0, tol) } else { 0.0 };
    Ok((j1, j2, j3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::SlowVary;
    use crate::model::LossLaw;

    fn gg() -> PortfolioModel {
        PortfolioModel {
            v: 0.0,
            b: 0.5,
            weights: vec![],
            z: TailFamily::standard_normal(),
            eps: TailFamily::standard_normal(),
            u: LossLaw::Uniform01,
        }
    }

    fn rr() -> PortfolioModel {
        let s = TailFamily::SymmetricRv { alpha: 2.0, x_m: 1.0, slow: SlowVary::Constant { c: 1.0 } };
        PortfolioModel { v: 0.0, b: 0.5, weights: vec![], z: s.clone(), eps: s, u: LossLaw::Uniform01 }
    }

    fn mixed() -> PortfolioModel {
        let s = TailFamily::SymmetricRv { alpha: 2.0, x_m: 1.0, slow: SlowVary::Constant { c: 1.0 } };
        PortfolioModel { v: 0.0, b: 0.5, weights: vec![], z: s, eps: TailFamily::standard_normal(), u: LossLaw::Uniform01 }
    }

    #[test]
    fn gn_scale_arithmetic() {
        let m = gn_scale(0.5, 0.5, 2.0, 1000);
        assert!((m - 0.5 * (2.0 * 1000f64.ln()).sqrt()).abs() < 1e-14);
        assert!((m - 1.8585).abs() < 1e-4);
        assert!((c_gamma(0.5, 0.5, 0.5, 2.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn gn_scale_matches_golden_section_location() {
        let m = gg();
        let r = gn_saddle(&m, 0.6, 1000).unwrap();
        let obj = Objective::new(&m, 0.6, 1000).unwrap();
        let (z, _) = golden_max(|z| obj.value(z).unwrap(), -3.0 * r.m_n, -0.2 * r.m_n, 1e-9);
        assert!((-z - r.m_tilde).abs() < 1e-6);
        assert!((r.m_tilde / r.m_n - 1.0).abs() < 0.25);
    }

    #[test]
    fn gn_t0_tends_to_one() {
        let m = gg();
        let mut prev = f64::INFINITY;
        for n in [1_000usize, 10_000, 100_000, 1_000_000] {
            let t0 = gn_closed(&m, 0.6, n).unwrap().t0.unwrap();
            let gap = (t0 - 1.0).abs();
            assert!(gap < prev);
            prev = gap;
        }
    }

    #[test]
    fn saddle_is_a_stationary_maximum() {
        let m = gg();
        for n in [100usize, 10_000] {
            let r = gn_saddle(&m, 0.6, n).unwrap();
            assert!(r.curvature < 0.0 && r.curvature_z < 0.0);
            assert!(r.stationarity < 1e-8);
            let h_inv = m.z.pdf(-r.m_tilde).unwrap() / (-r.curvature_z).sqrt();
            assert!((h_inv / r.h_inv - 1.0).abs() < 1e-6, "{} {}", h_inv, r.h_inv);
        }
    }

    #[test]
    fn gn_closed_exponent_approaches_direct() {
        let m = gg();
        let mut prev = f64::INFINITY;
        for n in [10_000usize, 100_000, 1_000_000] {
            let r = gn_saddle(&m, 0.6, n).unwrap();
            let c = r.closed.unwrap().exponent.unwrap();
            let rel = (c / r.exponent - 1.0).abs();
            assert!(rel < prev);
            prev = rel;
        }
        assert!(prev < 0.05);
    }

    #[test]
    fn rv_scale_and_delta() {
        let m = rr();
        let r = rv_saddle(&m, 0.6, 10_000).unwrap();
        assert!((r.m_n - 100.0).abs() < 1e-9);
        let c = r.closed.unwrap();
        assert!(c.constant.is_finite());
        assert!(r.curvature < 0.0);
    }

    #[test]
    fn rv_curvature_ratio_tends_to_one() {
        let m = rr();
        let mut prev = f64::INFINITY;
        for n in [1_000usize, 100_000, 10_000_000] {
            let r = rv_saddle(&m, 0.6, n).unwrap();
            let gap = (r.curvature / r.closed.unwrap().curvature.unwrap() - 1.0).abs();
            assert!(gap < prev, "{} {}", n, gap);
            prev = gap;
        }
    }

    #[test]
    fn mixed_constant_arithmetic() {
        let k = mixed_constant(2.0, 0.5, 1.0);
        let direct = 2.0 * 0.5f64.powf(-1.5) * 0.5 / 3f64.sqrt();
        assert!((k - direct).abs() < 1e-14);
        assert!((k - 1.633).abs() < 1e-3);
        assert!((gn_scale(0.5, 0.5, 2.0, 10_000) - 2.1460).abs() < 1e-4);
    }

    #[test]
    fn mixed_saddle_ratio_tends_to_one() {
        let m = mixed();
        let mut prev = f64::INFINITY;
        for n in [1_000usize, 100_000, 10_000_000] {
            let r = mixed_saddle(&m, 0.6, n).unwrap();
            let gap = (r.m_tilde / r.m_n - 1.0).abs();
            assert!(gap < prev);
            prev = gap;
        }
    }

    #[test]
    fn balance_is_monotone_for_weibull_noise() {
        let mut m = gg();
        m.eps = TailFamily::LogSmooth { xi: 1.0, m: 1.5, p: 0.0 };
        m.z = TailFamily::LogSmooth { xi: 1.0, m: 1.5, p: 0.0 };
        let zl = m.factor_law().unwrap();
        let cx = c_x(&m, 0.6).unwrap();
        let mut prev = f64::INFINITY;
        for k in 1..200 {
            let v = log_balance(&m, &zl, cx, 10_000, 0.05 * k as f64);
            assert!(v < prev);
            prev = v;
        }
        assert!(balance_scale(&m, 0.6, 10_000).is_ok());
    }

    #[test]
    fn logsmooth_refinement_gap_shrinks() {
        let m = gg();
        let zl = m.factor_law().unwrap();
        let mut prev = f64::INFINITY;
        for n in [1_000usize, 100_000, 10_000_000] {
            let r = logsmooth_saddle(&m, 0.6, n).unwrap();
            let gap = (zl.left_hazard(r.m_tilde) * (r.m_tilde - r.m_n)).abs();
            assert!(gap < prev, "{} {}", n, gap);
            prev = gap;
        }
    }

    #[test]
    fn family_mismatch_is_reported() {
        assert!(matches!(gn_saddle(&rr(), 0.6, 100), Err(SaddleError::FamilyMismatch(_))));
        assert!(matches!(rv_saddle(&gg(), 0.6, 100), Err(SaddleError::FamilyMismatch(_))));
    }
}
