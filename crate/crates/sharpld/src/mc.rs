//! Monte Carlo and convolution oracles for `P(L_n ≥ n x)`.
//!
//! Replicate `i` always draws from `rng::stream(seed, i)` and per-replicate
//! results are reduced in index order, so estimates are bit-identical for
//! any number of worker threads.

use std::fmt;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::cgfcore::{CgfError, CondLaw};
use crate::dist::TailFamily;
use crate::model::{LossLaw, ModelError, PortfolioModel};
use crate::numeric::{pairwise_sum, sig17};
use crate::rng::stream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error(transparent)]
    Cgf(#[from] CgfError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Plain,
    TiltedIS,
    Convolution,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Plain => "plain",
            Method::TiltedIS => "tilted_is",
            Method::Convolution => "convolution",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MCEstimate {
    pub value: f64,
    pub std_error: f64,
    pub replicates: usize,
    pub seed: u64,
    pub method: Method,
    /// Replicates that landed in the event.
    pub hits: usize,
}

impl MCEstimate {
    pub const CSV_HEADER: &'static str = "method,n,x,value,std_error,replicates,seed";

    /// `value ± 3 std_error`.
    pub fn band(&self) -> (f64, f64) {
        ((self.value - 3.0 * self.std_error).max(0.0), self.value + 3.0 * self.std_error)
    }

    pub fn overlaps(&self, other: &MCEstimate) -> bool {
        let (a, b) = self.band();
        let (c, d) = other.band();
        a <= d && c <= b
    }

    pub fn csv_row(&self, n: usize, x: f64) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.method,
            n,
            sig17(x),
            sig17(self.value),
            sig17(self.std_error),
            self.replicates,
            self.seed
        )
    }
}

/// `L_n` given the factor: the number of defaults is binomial, each
/// default draws a loss from `U` tilted at `theta`.
pub(crate) fn cond_sum<R: Rng + ?Sized>(u: &LossLaw, n: usize, p: f64, theta: f64, rng: &mut R) -> f64 {
    let k = Binomial::new(n as u64, p.clamp(0.0, 1.0)).expect("valid binomial").sample(rng);
    let mut s = 0.0;
    if matches!(u, LossLaw::Uniform01) && theta > 1e-12 {
        // inverse cdf of the tilt with e^{-θ} hoisted out of the loop
        let e = (-theta).exp();
        for _ in 0..k {
            let r: f64 = rng.random();
            s += 1.0 + (r + (1.0 - r) * e).ln() / theta;
        }
        return s;
    }
    for _ in 0..k {
        s += u.sample_tilted(rng, theta);
    }
    s
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let r = xs.len() as f64;
    let m = pairwise_sum(xs) / r;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    // rescaled so deep-tail weights do not underflow when squared
    let s = xs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if s == 0.0 {
        return (m, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|v| ((v - m) / s).powi(2)).collect();
    let var = pairwise_sum(&dev) / (r - 1.0);
    (m, s * (var / r).sqrt())
}

fn root_sum_sq(xs: &[f64]) -> f64 {
    let s = xs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if s == 0.0 {
        return 0.0;
    }
    let sq: Vec<f64> = xs.iter().map(|v| (v / s).powi(2)).collect();
    s * pairwise_sum(&sq).sqrt()
}

/// Fraction of exact replicates with `L_n ≥ n x`.
pub fn plain_tail(model: &PortfolioModel, x: f64, n: usize, replicates: usize, seed: u64) -> Result<MCEstimate, McError> {
    if replicates == 0 {
        return Err(McError::Precondition("replicates must be at least 1".into()));
    }
    let zl = model.factor_law()?;
    let thr = n as f64 * x;
    let hits: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let z = zl.sample_one(&mut rng);
            let l = cond_sum(&model.u, n, model.p_default(z), 0.0, &mut rng);
            if l >= thr {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let (value, std_error) = mean_and_se(&hits);
    Ok(MCEstimate { value, std_error, replicates, seed, method: Method::Plain, hits: hits.iter().filter(|h| **h > 0.0).count() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsOptions {
    /// Equal-probability factor strata; 1 turns stratification off.
    pub strata: usize,
}

impl Default for IsOptions {
    fn default() -> Self {
        IsOptions { strata: 32 }
    }
}

/// One replicate: `(weighted indicator, hit)`.
fn is_replicate<R: Rng + ?Sized>(model: &PortfolioModel, x: f64, n: usize, z: f64, rng: &mut R) -> Result<(f64, bool), McError> {
    let law = CondLaw::at(model, z);
    let thr = n as f64 * x;
    if law.p <= 0.0 {
        return Ok((if thr <= 0.0 { 1.0 } else { 0.0 }, thr <= 0.0));
    }
    if law.mean() >= x {
        let s = cond_sum(&model.u, n, law.p, 0.0, rng);
        return Ok(if s >= thr { (1.0, true) } else { (0.0, false) });
    }
    let t = match law.tilt(x) {
        Ok(t) => t,
        Err(CgfError::NoRoot { .. }) => return Ok((0.0, false)),
        Err(e) => return Err(e.into()),
    };
    let ((lam, _, _), w) = law.cgf(t.theta)?;
    let s = cond_sum(&model.u, n, w, t.theta, rng);
    if s >= thr {
        Ok(((-t.theta * s + n as f64 * lam).exp(), true))
    } else {
        Ok((0.0, false))
    }
}

/// Conditional exponential-tilt importance sampling with the default
/// factor stratification.
pub fn tilted_is_tail(model: &PortfolioModel, x: f64, n: usize, replicates: usize, seed: u64) -> Result<MCEstimate, McError> {
    tilted_is_tail_with(model, x, n, replicates, seed, IsOptions::default())
}

/// The factor is drawn from its own law (stratified into equal-probability
/// bins with proportional allocation); only the summands are tilted, at the
/// conditional tilt `θ*(z)` solving `∂θΛ_n(θ; z) = x`. The standard error is
/// the stratified one.
pub fn tilted_is_tail_with(
    model: &PortfolioModel,
    x: f64,
    n: usize,
    replicates: usize,
    seed: u64,
    opts: IsOptions,
) -> Result<MCEstimate, McError> {
    if replicates == 0 {
        return Err(McError::Precondition("replicates must be at least 1".into()));
    }
    if !x.is_finite() {
        return Err(McError::Precondition("x must be finite".into()));
    }
    let zl = model.factor_law()?;
    let strata = if matches!(zl, TailFamily::PointMass { .. }) { 1 } else { opts.strata.clamp(1, (replicates / 2).max(1)) };
    let draws: Vec<(f64, bool)> = (0..replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let b = i * strata / replicates;
            let z = if strata == 1 {
                zl.sample_one(&mut rng)
            } else {
                let u: f64 = rng.random();
                zl.quantile(((b as f64 + u) / strata as f64).clamp(1e-300, 1.0 - 1e-16))
            };
            is_replicate(model, x, n, z, &mut rng)
        })
        .collect::<Result<_, _>>()?;
    let vals: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let hits = draws.iter().filter(|d| d.1).count();
    let (value, std_error) = if strata == 1 {
        mean_and_se(&vals)
    } else {
        let mut means = Vec::with_capacity(strata);
        let mut ses = Vec::with_capacity(strata);
        let mut start = 0;
        for b in 0..strata {
            let end = ((b + 1) * replicates).div_ceil(strata);
            let (m, se) = mean_and_se(&vals[start..end]);
            means.push(m / strata as f64);
            ses.push(se / strata as f64);
            start = end;
        }
        (pairwise_sum(&means), root_sum_sq(&ses))
    };
    Ok(MCEstimate { value, std_error, replicates, seed, method: Method::TiltedIS, hits })
}

/// Tail of a lattice convolution, bracketed from both sides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvolutionTail {
    /// Every loss rounded down to the grid.
    pub lower: f64,
    /// Every loss rounded up to the grid.
    pub upper: f64,
    /// Cell mass split between the two neighbouring grid points so the mean is kept.
    pub estimate: f64,
    pub h: f64,
}

impl ConvolutionTail {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn as_estimate(&self) -> MCEstimate {
        MCEstimate { value: self.estimate, std_error: 0.0, replicates: 0, seed: 0, method: Method::Convolution, hits: 0 }
    }
}

/// Default grid step of the convolution oracle.
pub const CONV_STEP: f64 = 1e-4;

/// `P(L_n ≥ n x | Z = z)` for `n ≤ 64` by FFT convolution on a grid of step
/// [`CONV_STEP`].
pub fn exact_tail_convolution(model: &PortfolioModel, z: f64, x: f64, n: usize) -> Result<ConvolutionTail, McError> {
    convolution_tail(&model.u, model.p_default(z), x, n, CONV_STEP)
}

/// As [`exact_tail_convolution`] for a given default probability and step.
pub fn convolution_tail(u: &LossLaw, p: f64, x: f64, n: usize, h: f64) -> Result<ConvolutionTail, McError> {
    if n == 0 || n > 64 {
        return Err(McError::Precondition(format!("n = {} must lie in 1..=64", n)));
    }
    if !u.is_bounded() {
        return Err(McError::Unsupported("convolution oracle needs a bounded loss law".into()));
    }
    if !(h > 0.0) {
        return Err(McError::Precondition("grid step must be positive".into()));
    }
    let k = (u.ess_sup() / h - 1e-9).ceil() as usize;
    let mut lo = vec![0.0; k + 1];
    let mut up = vec![0.0; k + 1];
    let mut mid = vec![0.0; k + 1];
    lo[0] = 1.0 - p;
    up[0] = 1.0 - p;
    mid[0] = 1.0 - p;
    match u {
        LossLaw::BoundedGrid { values, probs } => {
            for (v, q) in values.iter().zip(probs) {
                let r = v / h;
                let (f, c) = ((r + 1e-9).floor(), (r - 1e-9).ceil());
                let (fi, ci) = (f as usize, (c as usize).min(k));
                lo[fi] += p * q;
                up[ci] += p * q;
                if ci == fi {
                    mid[fi] += p * q;
                } else {
                    let frac = (r - f).clamp(0.0, 1.0);
                    mid[fi] += p * q * (1.0 - frac);
                    mid[ci] += p * q * frac;
                }
            }
        }
        _ => {
            for j in 0..k {
                let m = p * (u.tilted_cdf(0.0, (j + 1) as f64 * h) - u.tilted_cdf(0.0, j as f64 * h));
                lo[j] += m;
                up[j + 1] += m;
                mid[j] += 0.5 * m;
                mid[j + 1] += 0.5 * m;
            }
        }
    }
    let kmin = ((n as f64 * x) / h - 1e-9).ceil().max(0.0) as usize;
    let tail = |pmf: &[f64], edge: f64| -> f64 {
        let dist = nfold(pmf, n);
        if kmin >= dist.len() {
            return 0.0;
        }
        let mut above: Vec<f64> = dist[kmin..].iter().map(|v| v.max(0.0)).collect();
        above[0] *= edge;
        pairwise_sum(&above).clamp(0.0, 1.0)
    };
    // A continuous sum puts no mass on the threshold itself, so only half
    // of the lattice atom sitting there belongs to the tail.
    let edge = if matches!(u, LossLaw::BoundedGrid { .. }) || kmin == 0 { 1.0 } else { 0.5 };
    Ok(ConvolutionTail { lower: tail(&lo, 1.0), upper: tail(&up, 1.0), estimate: tail(&mid, edge), h })
}

/// `n`-fold self-convolution of a pmf on `0, 1, 2, ...`.
fn nfold(pmf: &[f64], n: usize) -> Vec<f64> {
    let len = (pmf.len() - 1) * n + 1;
    let size = len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut buf: Vec<Complex<f64>> = (0..size).map(|i| Complex::new(if i < pmf.len() { pmf[i] } else { 0.0 }, 0.0)).collect();
    fwd.process(&mut buf);
    for c in buf.iter_mut() {
        *c = c.powu(n as u32);
    }
    inv.process(&mut buf);
    buf.truncate(len);
    buf.iter().map(|c| c.re / size as f64).collect()
}

/// Empirical VaR and ES of `L_n / n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileEstimate {
    pub alpha: f64,
    pub var: f64,
    /// Order statistics `±3` binomial standard deviations around the quantile.
    pub var_band: (f64, f64),
    pub es: f64,
}

/// Quantiles of `L_n / n` from `replicates` exact draws, one sample shared
/// by every level in `alphas`.
pub fn loss_quantiles(model: &PortfolioModel, n: usize, alphas: &[f64], replicates: usize, seed: u64) -> Result<Vec<QuantileEstimate>, McError> {
    if replicates < 2 {
        return Err(McError::Precondition("replicates must be at least 2".into()));
    }
    let zl = model.factor_law()?;
    let nf = n as f64;
    let mut v: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let z = zl.sample_one(&mut rng);
            cond_sum(&model.u, n, model.p_default(z), 0.0, &mut rng) / nf
        })
        .collect();
    v.sort_by(|a, b| a.total_cmp(b));
    let r = replicates as f64;
    let at = |k: f64| v[(k.ceil() as usize).clamp(1, replicates) - 1];
    Ok(alphas
        .iter()
        .map(|a| {
            let k = (a * r).ceil().max(1.0) as usize;
            let sd = (r * a * (1.0 - a)).sqrt();
            QuantileEstimate {
                alpha: *a,
                var: v[k - 1],
                var_band: (at(a * r - 3.0 * sd), at(a * r + 3.0 * sd)),
                es: pairwise_sum(&v[k - 1..]) / (replicates - k + 1) as f64,
            }
        })
        .collect())
}

/// `σ_{T_1|Z}` when the default probability is `f`.
pub fn sigma_t1(u: &LossLaw, f: f64) -> f64 {
    (u.variance() * f + u.mean() * u.mean() * f * (1.0 - f)).max(0.0).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CltReport {
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub ks: f64,
    /// `2 · 1.63 / √replicates`.
    pub critical: f64,
    pub passed: bool,
}

fn std_normal_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / std::f64::consts::SQRT_2)
}

/// KS distance between `(L_n − n μ_U F)/√n`, `F = p(Z)`, and the normal
/// mixture `E[Φ(t/σ_{T_1|Z})]`.
pub fn conditional_clt_check(model: &PortfolioModel, n: usize, replicates: usize, seed: u64) -> Result<CltReport, McError> {
    if replicates < 10_000 {
        return Err(McError::Precondition(format!("replicates = {} must be at least 10^4", replicates)));
    }
    let zl = model.factor_law()?;
    let nf = n as f64;
    let mu = model.u.mean();
    let mut t: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let z = zl.sample_one(&mut rng);
            let f = model.p_default(z);
            (cond_sum(&model.u, n, f, 0.0, &mut rng) - nf * mu * f) / nf.sqrt()
        })
        .collect();
    t.sort_by(|a, b| a.total_cmp(b));
    let nodes: Vec<f64> = if matches!(zl, TailFamily::PointMass { .. }) {
        vec![sigma_t1(&model.u, model.p_default(zl.ess_inf()))]
    } else {
        let q = 2000;
        (0..q).map(|j| sigma_t1(&model.u, model.p_default(zl.quantile((j as f64 + 0.5) / q as f64)))).collect()
    };
    let g = |v: f64| -> f64 {
        let s: Vec<f64> = nodes
            .iter()
            .map(|sig| if *sig > 0.0 { std_normal_cdf(v / sig) } else if v >= 0.0 { 1.0 } else { 0.0 })
            .collect();
        pairwise_sum(&s) / nodes.len() as f64
    };
    let r = replicates as f64;
    let ks = t
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let gv = g(*v);
            ((i + 1) as f64 / r - gv).max(gv - i as f64 / r)
        })
        .reduce(|| 0.0, f64::max);
    let critical = 2.0 * 1.63 / r.sqrt();
    Ok(CltReport { n, replicates, seed, ks, critical, passed: ks < critical })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn std_error_survives_tiny_weights() {
        let xs = [1e-250, 3e-250, 2e-250, 0.0];
        let (m, se) = mean_and_se(&xs);
        let (m1, se1) = mean_and_se(&[1.0, 3.0, 2.0, 0.0]);
        assert!((m / 1e-250 - m1).abs() < 1e-12 && (se / 1e-250 - se1).abs() < 1e-12, "{} {}", m, se);
        assert!((root_sum_sq(&[3e-200, 4e-200]) / 5e-200 - 1.0).abs() < 1e-14);
    }

    fn degenerate() -> PortfolioModel {
        PortfolioModel {
            v: 0.0,
            b: 0.5,
            weights: vec![],
            z: TailFamily::PointMass { kappa: 0.0 },
            eps: TailFamily::standard_normal(),
            u: LossLaw::Uniform01,
        }
    }

    fn binom_tail(n: usize, p: f64, k0: usize) -> f64 {
        let mut s = 0.0;
        for k in k0..=n {
            let lc = statrs::function::factorial::ln_binomial(n as u64, k as u64);
            s += (lc + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp();
        }
        s
    }

    /// `P(U_1 + ... + U_k ≥ t)` for i.i.d. Uniform(0,1).
    fn irwin_hall_sf(k: usize, t: f64) -> f64 {
        if k == 0 {
            return if t <= 0.0 { 1.0 } else { 0.0 };
        }
        if t <= 0.0 {
            return 1.0;
        }
        if t >= k as f64 {
            return 0.0;
        }
        let mut c = 0.0;
        let mut fact = 1.0;
        for i in 1..=k {
            fact *= i as f64;
        }
        for j in 0..=(t.floor() as usize) {
            let bin = statrs::function::factorial::binomial(k as u64, j as u64);
            let sgn = if j % 2 == 0 { 1.0 } else { -1.0 };
            c += sgn * bin * (t - j as f64).powi(k as i32);
        }
        1.0 - c / fact
    }

    #[test]
    fn trivial_plain_cases() {
        let m = degenerate();
        assert_eq!(plain_tail(&m, 0.0, 20, 100, 1).unwrap().value, 1.0);
        assert_eq!(plain_tail(&m, 1.01, 20, 100, 1).unwrap().value, 0.0);
        assert!(plain_tail(&m, 0.3, 20, 0, 1).is_err());
    }

    #[test]
    fn binomial_oracle() {
        let u = LossLaw::BoundedGrid { values: vec![1.0], probs: vec![1.0] };
        for (n, p, x) in [(10, 0.5, 0.35), (40, 0.3, 0.5), (64, 0.05, 0.2)] {
            let c = convolution_tail(&u, p, x, n, 0.125).unwrap();
            let k0 = (n as f64 * x).ceil() as usize;
            let b = binom_tail(n, p, k0);
            assert!((c.lower - b).abs() < 1e-12 && (c.upper - b).abs() < 1e-12, "{:?} vs {}", c, b);
        }
    }

    #[test]
    fn uniform_oracle_brackets_irwin_hall() {
        let (n, p, x) = (10usize, 0.5, 0.35);
        let mut exact = 0.0;
        for k in 0..=n {
            let lc = statrs::function::factorial::ln_binomial(n as u64, k as u64);
            exact += (lc + n as f64 * 0.5f64.ln()).exp() * irwin_hall_sf(k, n as f64 * x);
        }
        let c = convolution_tail(&LossLaw::Uniform01, p, x, n, 1e-4).unwrap();
        assert!(c.lower <= exact && exact <= c.upper, "{:?} {}", c, exact);
        assert!((c.estimate - exact).abs() < 1e-6, "{} {}", c.estimate, exact);
        assert!(c.width() < 1e-3);
    }

    #[test]
    fn single_summand() {
        let c = convolution_tail(&LossLaw::Uniform01, 0.4, 0.0, 1, 1e-3).unwrap();
        assert!((c.lower - 1.0).abs() < 1e-12);
        let c = convolution_tail(&LossLaw::Uniform01, 0.4, 0.3, 1, 1e-3).unwrap();
        assert!((c.estimate - 0.4 * 0.7).abs() < 1e-9);
    }

    #[test]
    fn convolution_rejects_unbounded_and_large_n() {
        assert!(matches!(convolution_tail(&LossLaw::Exponential { rate: 1.0 }, 0.5, 0.3, 10, 1e-3), Err(McError::Unsupported(_))));
        assert!(convolution_tail(&LossLaw::Uniform01, 0.5, 0.3, 65, 1e-3).is_err());
    }

    #[test]
    fn is_matches_plain_and_convolution() {
        let m = degenerate();
        let c = exact_tail_convolution(&m, 0.0, 0.3, 30).unwrap();
        let pl = plain_tail(&m, 0.3, 30, 200_000, 5).unwrap();
        let is = tilted_is_tail(&m, 0.3, 30, 50_000, 6).unwrap();
        assert!(pl.overlaps(&is), "{:?} {:?}", pl, is);
        assert!((is.value - c.estimate).abs() < 3.0 * is.std_error + c.width(), "{:?} {:?}", is, c);
        assert!((pl.value - c.estimate).abs() < 3.0 * pl.std_error + c.width());
    }

    #[test]
    fn is_reduces_variance_gaussian_factor() {
        let mut m = degenerate();
        m.z = TailFamily::standard_normal();
        let pl = plain_tail(&m, 0.6, 100, 200_000, 3).unwrap();
        let is = tilted_is_tail(&m, 0.6, 100, 200_000, 4).unwrap();
        assert!(pl.overlaps(&is), "{:?} {:?}", pl, is);
        assert!(is.std_error / pl.std_error < 0.1, "{} {}", is.std_error, pl.std_error);
        let pl = plain_tail(&m, 0.55, 40, 200_000, 3).unwrap();
        let is = tilted_is_tail(&m, 0.55, 40, 50_000, 4).unwrap();
        assert!(pl.hits >= 100);
        assert!(pl.overlaps(&is), "{:?} {:?}", pl, is);
    }

    #[test]
    fn reproducible_and_thread_independent() {
        let mut m = degenerate();
        m.z = TailFamily::standard_normal();
        let a = tilted_is_tail(&m, 0.6, 50, 4000, 11).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| tilted_is_tail(&m, 0.6, 50, 4000, 11).unwrap());
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }

    #[test]
    fn quantiles_of_degenerate_loss_match_clt_scale() {
        let m = degenerate();
        let q = loss_quantiles(&m, 400, &[0.5, 0.99], 40_000, 2).unwrap();
        assert!((q[0].var - 0.25).abs() < 0.005);
        let sd = (0.5f64 / 12.0 + 0.0625).sqrt() / 20.0;
        assert!((q[1].var - (0.25 + 2.326 * sd)).abs() < 0.01, "{:?}", q[1]);
        assert!(q[1].es > q[1].var && q[1].var_band.0 <= q[1].var && q[1].var <= q[1].var_band.1);
    }

    #[test]
    fn sigma_limits() {
        let u = LossLaw::Uniform01;
        assert_eq!(sigma_t1(&u, 0.0), 0.0);
        assert!((sigma_t1(&u, 1.0) - (1.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn clt_point_mass() {
        let r = conditional_clt_check(&degenerate(), 500, 20_000, 9).unwrap();
        assert!(r.passed, "{:?}", r);
        assert!(conditional_clt_check(&degenerate(), 500, 100, 9).is_err());
    }

    #[test]
    fn csv_row_has_seven_fields() {
        let e = MCEstimate { value: 0.25, std_error: 0.01, replicates: 10, seed: 3, method: Method::Plain, hits: 2 };
        assert_eq!(e.csv_row(5, 0.3).split(',').count(), 7);
        assert!(e.csv_row(5, 0.3).contains("2.5000000000000000e-1"));
    }
}
