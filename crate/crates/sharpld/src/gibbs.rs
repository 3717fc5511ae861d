//! Conditional (Gibbs) limit laws of `(U_1, X_1)` given `L_n ≥ n x`, and
//! binned total-variation distances to them.

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::cgfcore::{uncond_tilt, CgfError, CondLaw};
use crate::dist::TailFamily;
use crate::mc::{cond_sum, McError};
use crate::model::{LossLaw, ModelError, PortfolioModel};
use crate::numeric::pairwise_sum;
use crate::rng::stream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GibbsError {
    #[error(transparent)]
    Cgf(#[from] CgfError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Mc(#[from] McError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("event too rare: {accepted} accepted out of {draws} draws")]
    TooRare { accepted: usize, draws: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GibbsCase {
    /// `X ≡ 1`, `U ~ P_θ`.
    UnboundedTilt { theta: f64 },
    /// `X ~ Bernoulli(p_tilted)`, `U | X=1 ~ P_θ̄`, `U | X=0 ~ P_U`.
    ///
    /// `p_tilted = p_κ λ_U(θ̄) / e^{Λ(θ̄;κ)}` is the default probability of
    /// the θ̄-tilt of `U X`; `p_kappa` is kept for reporting.
    BoundaryOneStep { p_kappa: f64, p_tilted: f64, theta_bar: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsLimitLaw {
    pub case: GibbsCase,
    pub u: LossLaw,
    pub x: f64,
}

impl GibbsLimitLaw {
    pub fn default_prob(&self) -> f64 {
        match self.case {
            GibbsCase::UnboundedTilt { .. } => 1.0,
            GibbsCase::BoundaryOneStep { p_tilted, .. } => p_tilted,
        }
    }

    pub fn theta(&self) -> f64 {
        match self.case {
            GibbsCase::UnboundedTilt { theta } => theta,
            GibbsCase::BoundaryOneStep { theta_bar, .. } => theta_bar,
        }
    }

    /// `P(X = defaulted, U ≤ u)`.
    pub fn joint_cdf(&self, defaulted: bool, u: f64) -> f64 {
        let pd = self.default_prob();
        if defaulted {
            pd * self.u.tilted_cdf(self.theta(), u)
        } else {
            (1.0 - pd) * self.u.tilted_cdf(0.0, u)
        }
    }

    /// Mean of `U X` under the limit law.
    pub fn mean_loss(&self) -> f64 {
        self.default_prob() * self.u.cgf(self.theta()).1
    }
}

/// Limit law of one coordinate; the boundary form is used whenever the
/// factor is bounded below.
pub fn limit_law(model: &PortfolioModel, x: f64) -> Result<GibbsLimitLaw, GibbsError> {
    let zl = model.factor_law()?;
    let kappa = zl.ess_inf();
    let case = if kappa.is_finite() {
        let law = CondLaw::at(model, kappa);
        if !(x > law.mean()) {
            return Err(GibbsError::Precondition(format!("x = {} must exceed q_κ = {}", x, law.mean())));
        }
        let t = law.tilt(x)?;
        let (_, w) = law.cgf(t.theta)?;
        GibbsCase::BoundaryOneStep { p_kappa: law.p, p_tilted: w, theta_bar: t.theta }
    } else {
        if !(x > model.u.mean()) {
            return Err(GibbsError::Precondition(format!("x = {} must exceed μ_U = {}", x, model.u.mean())));
        }
        GibbsCase::UnboundedTilt { theta: uncond_tilt(&model.u, x)?.theta }
    };
    Ok(GibbsLimitLaw { case, u: model.u.clone(), x })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditioning {
    Rejection,
    TiltedIS,
}

/// Weighted draws of the first `k` coordinates given the event.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    pub k: usize,
    /// Row-major, `k` entries per accepted replicate.
    pub u: Vec<f64>,
    pub x: Vec<bool>,
    pub w: Vec<f64>,
    pub accepted: usize,
    pub draws: usize,
    pub method: Conditioning,
}

impl WeightedSample {
    /// Kish effective sample size.
    pub fn ess(&self) -> f64 {
        let s = pairwise_sum(&self.w);
        let sq: Vec<f64> = self.w.iter().map(|w| w * w).collect();
        s * s / pairwise_sum(&sq)
    }

    /// Weighted `P(X_j = 1 | event)`.
    pub fn default_freq(&self, j: usize) -> f64 {
        let num: Vec<f64> = (0..self.accepted).map(|r| if self.x[r * self.k + j] { self.w[r] } else { 0.0 }).collect();
        pairwise_sum(&num) / pairwise_sum(&self.w)
    }

    /// Weighted correlation of `U_1 X_1` and `U_2 X_2`.
    pub fn pair_correlation(&self) -> f64 {
        assert!(self.k >= 2, "needs two coordinates");
        let y = |r: usize, j: usize| if self.x[r * self.k + j] { self.u[r * self.k + j] } else { 0.0 };
        let tot = pairwise_sum(&self.w);
        let wmean = |f: &dyn Fn(usize) -> f64| {
            let v: Vec<f64> = (0..self.accepted).map(|r| self.w[r] * f(r)).collect();
            pairwise_sum(&v) / tot
        };
        let m1 = wmean(&|r| y(r, 0));
        let m2 = wmean(&|r| y(r, 1));
        let c = wmean(&|r| (y(r, 0) - m1) * (y(r, 1) - m2));
        let v1 = wmean(&|r| (y(r, 0) - m1).powi(2));
        let v2 = wmean(&|r| (y(r, 1) - m2).powi(2));
        c / (v1 * v2).sqrt()
    }
}

/// Above this event probability conditioning is by rejection.
pub const REJECTION_THRESHOLD: f64 = 1e-2;
const PILOT: usize = 20_000;
const MAX_DRAWS: usize = 50_000_000;
const PILOT_STREAM: u64 = 0x05ee_d0f9_1bb5;

type Draw = Option<(Vec<f64>, Vec<bool>, f64)>;

/// `(θ, Λ(θ; z), tilted default probability)`, or `None` when the event is
/// impossible given `z`.
fn tilt_params(model: &PortfolioModel, z: f64, x: f64, tilt: bool) -> Result<Option<(f64, f64, f64)>, GibbsError> {
    let law = CondLaw::at(model, z);
    if !(tilt && law.p > 0.0 && law.mean() < x) {
        return Ok(Some((0.0, 0.0, law.p)));
    }
    match law.tilt(x) {
        Ok(t) => {
            let ((lam, _, _), w) = law.cgf(t.theta)?;
            Ok(Some((t.theta, lam, w)))
        }
        Err(CgfError::NoRoot { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn draw<R: Rng + ?Sized>(u: &LossLaw, params: Option<(f64, f64, f64)>, x: f64, n: usize, k: usize, rng: &mut R) -> Draw {
    let (theta, lam, w) = params?;
    let mut us = Vec::with_capacity(k);
    let mut xs = Vec::with_capacity(k);
    let mut s = 0.0;
    for _ in 0..k {
        let d = rng.random::<f64>() < w;
        let v = u.sample_tilted(rng, if d { theta } else { 0.0 });
        if d {
            s += v;
        }
        us.push(v);
        xs.push(d);
    }
    s += cond_sum(u, n - k, w, theta, rng);
    if s < n as f64 * x {
        return None;
    }
    let wt = if theta == 0.0 { 1.0 } else { (-theta * s + n as f64 * lam).exp() };
    Some((us, xs, wt))
}

/// When to stop drawing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Accepted(usize),
    /// Kish effective sample size of the weights.
    Ess(f64),
}

/// Draws until `target` replicates land in `{L_n ≥ n x}`.
pub fn conditional_sample(
    model: &PortfolioModel,
    x: f64,
    n: usize,
    k: usize,
    target: usize,
    seed: u64,
) -> Result<WeightedSample, GibbsError> {
    conditional_sample_until(model, x, n, k, Target::Accepted(target), seed)
}

/// A pilot of plain draws picks rejection when the event probability
/// exceeds [`REJECTION_THRESHOLD`], conditional tilting otherwise. Draws are
/// made in fixed-size batches and scanned in index order, so the result
/// does not depend on the thread count.
pub fn conditional_sample_until(
    model: &PortfolioModel,
    x: f64,
    n: usize,
    k: usize,
    target: Target,
    seed: u64,
) -> Result<WeightedSample, GibbsError> {
    if k == 0 || k > n {
        return Err(GibbsError::Precondition(format!("k = {} must lie in 1..=n = {}", k, n)));
    }
    let goal = match target {
        Target::Accepted(a) => a as f64,
        Target::Ess(e) => e,
    };
    if !(goal >= 1.0) {
        return Err(GibbsError::Precondition("target must be at least 1".into()));
    }
    let zl = model.factor_law()?;
    let fixed_z = match zl {
        TailFamily::PointMass { kappa } => Some(kappa),
        _ => None,
    };
    let plain_fixed = fixed_z.map(|z| tilt_params(model, z, x, false)).transpose()?;
    let pilot: Vec<bool> = (0..PILOT)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed ^ PILOT_STREAM, i as u64);
            let params = match plain_fixed {
                Some(p) => p,
                None => tilt_params(model, zl.sample_one(&mut rng), x, false)?,
            };
            Ok(draw(&model.u, params, x, n, 1, &mut rng).is_some())
        })
        .collect::<Result<_, GibbsError>>()?;
    let p_hat = pilot.iter().filter(|d| **d).count() as f64 / PILOT as f64;
    let method = if p_hat > REJECTION_THRESHOLD { Conditioning::Rejection } else { Conditioning::TiltedIS };
    let tilt = method == Conditioning::TiltedIS;
    let fixed = fixed_z.map(|z| tilt_params(model, z, x, tilt)).transpose()?;
    let per_batch = (goal as usize).clamp(1000, 200_000);
    let batch = if tilt { 2 * per_batch } else { ((2.0 * per_batch as f64 / p_hat) as usize).clamp(per_batch, 4_000_000) };
    let mut out = WeightedSample { k, u: vec![], x: vec![], w: vec![], accepted: 0, draws: 0, method };
    let (mut sw, mut sw2) = (0.0, 0.0);
    let done = |acc: usize, sw: f64, sw2: f64| match target {
        Target::Accepted(a) => acc >= a,
        Target::Ess(e) => sw2 > 0.0 && sw * sw / sw2 >= e,
    };
    loop {
        if out.draws >= MAX_DRAWS {
            return Err(GibbsError::TooRare { accepted: out.accepted, draws: out.draws });
        }
        let start = out.draws;
        let res: Vec<Draw> = (start..start + batch)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(seed, i as u64);
                let params = match fixed {
                    Some(p) => p,
                    None => tilt_params(model, zl.sample_one(&mut rng), x, tilt)?,
                };
                Ok(draw(&model.u, params, x, n, k, &mut rng))
            })
            .collect::<Result<_, GibbsError>>()?;
        for (j, d) in res.into_iter().enumerate() {
            if let Some((us, xs, w)) = d {
                out.u.extend(us);
                out.x.extend(xs);
                out.w.push(w);
                out.accepted += 1;
                sw += w;
                sw2 += w * w;
                if done(out.accepted, sw, sw2) {
                    out.draws = start + j + 1;
                    return Ok(out);
                }
            }
        }
        out.draws = start + batch;
    }
}

/// Upper end of the binned `U` range.
fn u_range(limit: &GibbsLimitLaw) -> f64 {
    match &limit.u {
        LossLaw::Exponential { rate } => 12.0 / (rate - limit.theta().max(0.0)),
        u => u.ess_sup(),
    }
}

/// `½ Σ |empirical − limit|` over `{X} × U-bins` for the first coordinate;
/// the last bin is open to the right. A lower bound on the true distance.
pub fn tv_distance(sample: &WeightedSample, limit: &GibbsLimitLaw, bins: usize) -> f64 {
    tv_distance_on(sample, limit, &uniform_edges(u_range(limit), bins.max(1)))
}

fn uniform_edges(hi: f64, bins: usize) -> Vec<f64> {
    (0..=bins).map(|j| hi * j as f64 / bins as f64).collect()
}

/// As [`tv_distance`] with explicit increasing bin edges starting at 0.
pub fn tv_distance_on(sample: &WeightedSample, limit: &GibbsLimitLaw, edges: &[f64]) -> f64 {
    let bins = edges.len() - 1;
    let mut emp = vec![0.0; 2 * bins];
    let tot = pairwise_sum(&sample.w);
    for r in 0..sample.accepted {
        let u = sample.u[r * sample.k];
        let j = edges[1..bins].partition_point(|e| *e < u);
        let c = if sample.x[r * sample.k] { bins + j } else { j };
        emp[c] += sample.w[r] / tot;
    }
    let mut diffs = Vec::with_capacity(2 * bins);
    for (d, off) in [(false, 0), (true, bins)] {
        for j in 0..bins {
            let lo = if j == 0 { 0.0 } else { limit.joint_cdf(d, edges[j]) };
            let hi = if j == bins - 1 { limit.joint_cdf(d, f64::INFINITY) } else { limit.joint_cdf(d, edges[j + 1]) };
            diffs.push((emp[off + j] - (hi - lo)).abs());
        }
    }
    0.5 * pairwise_sum(&diffs)
}
