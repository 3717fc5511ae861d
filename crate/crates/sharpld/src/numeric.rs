//! Scalar solvers, quadrature and finite-difference stencils.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError {
    #[error("no sign change on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
    #[error("no convergence after {iters} iterations")]
    NonConvergence { iters: usize },
}

/// Root of `f` on `[lo, hi]` by Newton steps kept inside a shrinking bracket.
///
/// `f` returns `(value, derivative)`. A Newton step that leaves the bracket,
/// or fails to halve it fast enough, is replaced by bisection.
pub fn newton_bisect<F>(f: F, lo: f64, hi: f64, xtol: f64, max_iter: usize) -> Result<f64, RootError>
where
    F: Fn(f64) -> (f64, f64),
{
    let (mut a, mut b) = (lo, hi);
    let (fa, _) = f(a);
    let (fb, _) = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(RootError::NoBracket { lo, hi });
    }
    let rising = fb > 0.0;
    let mut x = 0.5 * (a + b);
    let mut last_width = b - a;
    for _ in 0..max_iter {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx > 0.0) == rising {
            b = x;
        } else {
            a = x;
        }
        let width = b - a;
        let mid = 0.5 * (a + b);
        if width <= xtol * (1.0 + x.abs()) || mid <= a || mid >= b {
            return Ok(0.5 * (a + b));
        }
        let newton = x - fx / dfx;
        let step_ok = dfx.is_finite() && dfx != 0.0 && newton > a && newton < b && width < 0.75 * last_width;
        let next = if step_ok { newton } else { 0.5 * (a + b) };
        if step_ok && (next - x).abs() <= xtol * (1.0 + x.abs()) {
            return Ok(next);
        }
        last_width = width;
        x = next;
    }
    Err(RootError::NonConvergence { iters: max_iter })
}

/// Plain bisection; `f(lo)` and `f(hi)` must differ in sign.
pub fn bisect<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, xtol: f64) -> Result<f64, RootError> {
    let (mut a, mut b) = (lo, hi);
    let fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(RootError::NoBracket { lo, hi });
    }
    let neg_at_a = fa < 0.0;
    for _ in 0..400 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b || (b - a) <= xtol * (1.0 + m.abs()) {
            return Ok(m);
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm < 0.0) == neg_at_a {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Maximizer of a unimodal `f` on `[a, b]` by golden-section search.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, xtol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (a, b);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > xtol * (1.0 + c.abs()) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Five-point central first derivative.
pub fn d1_stencil<F: Fn(f64) -> f64>(f: &F, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

/// Five-point central second derivative.
pub fn d2_stencil<F: Fn(f64) -> f64>(f: &F, x: f64, h: f64) -> f64 {
    (-f(x - 2.0 * h) + 16.0 * f(x - h) - 30.0 * f(x) + 16.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h * h)
}

const GK_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WK[7] * fc;
    let mut g = GK_WG[3] * fc;
    for i in 0..7 {
        let dx = h * GK_X[i];
        let s = f(c - dx) + f(c + dx);
        k += GK_WK[i] * s;
        if i % 2 == 1 {
            g += GK_WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) quadrature of `f` over a finite interval.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let mut stack = vec![(a, b, 0usize)];
    let mut total = Vec::new();
    while let Some((lo, hi, depth)) = stack.pop() {
        let (val, err) = gk15(&f, lo, hi);
        let scale = tol.max(1e-15 * val.abs());
        if err <= scale * ((hi - lo) / (b - a)).max(1e-3) || depth >= 50 {
            total.push(val);
        } else {
            let m = 0.5 * (lo + hi);
            stack.push((lo, m, depth + 1));
            stack.push((m, hi, depth + 1));
        }
    }
    pairwise_sum(&total)
}

/// Integral of `f` over `[a, ∞)` through the map `x = a + t/(1-t)`.
pub fn integrate_to_inf<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> f64 {
    integrate(
        |t: f64| {
            if t >= 1.0 {
                return 0.0;
            }
            let s = 1.0 - t;
            let v = f(a + t / s) / (s * s);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// Summation by recursive halving; the result depends only on the slice order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let m = n / 2;
            pairwise_sum(&xs[..m]) + pairwise_sum(&xs[m..])
        }
    }
}

/// Root of `f` on a sign-changing bracket by the Illinois variant of
/// regula falsi.
pub fn illinois<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, xtol: f64) -> Result<f64, RootError> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(RootError::NoBracket { lo, hi });
    }
    let mut side = 0;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let c = if c > a.min(b) && c < a.max(b) { c } else { 0.5 * (a + b) };
        let fc = f(c);
        if fc == 0.0 || (b - a).abs() <= xtol * (1.0 + c.abs()) {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() <= xtol * (1.0 + c.abs()) {
            return Ok(if fa.abs() < fb.abs() { a } else { b });
        }
    }
    Err(RootError::NonConvergence { iters: 200 })
}

/// Scientific notation with 17 significant digits, enough to round-trip.
pub fn sig17(v: f64) -> String {
    if v.is_finite() {
        format!("{:.16e}", v)
    } else {
        format!("{}", v)
    }
}

/// log(Σ exp(x_i)) without overflow.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    #[test]
    fn illinois_finds_cubic_root() {
        let r = super::illinois(|x| x * x * x - 2.0, 0.0, 3.0, 1e-14).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-12);
        assert!(super::illinois(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }

    use super::*;

    #[test]
    fn newton_bisect_finds_sqrt2() {
        let r = newton_bisect(|x| (x * x - 2.0, 2.0 * x), 0.0, 2.0, 1e-15, 100).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn newton_bisect_survives_bad_derivative() {
        let r = newton_bisect(|x| (x.powi(3) - 0.001, 0.0), -1.0, 1.0, 1e-14, 200).unwrap();
        assert!((r - 0.1).abs() < 1e-12);
    }

    #[test]
    fn newton_bisect_reports_missing_bracket() {
        let e = newton_bisect(|x| (x * x + 1.0, 2.0 * x), -1.0, 1.0, 1e-12, 50).unwrap_err();
        assert!(matches!(e, RootError::NoBracket { .. }));
    }

    #[test]
    fn bisect_decreasing_function() {
        let r = bisect(|x| 1.0 - x, 0.0, 3.0, 1e-14).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn golden_max_parabola() {
        let (x, fx) = golden_max(|x| -(x - 0.3).powi(2) + 1.0, -2.0, 2.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
        assert!((fx - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stencils_on_exp() {
        let f = |x: f64| x.exp();
        assert!((d1_stencil(&f, 1.0, 1e-3) - 1f64.exp()).abs() < 1e-10);
        assert!((d2_stencil(&f, 1.0, 1e-3) - 1f64.exp()).abs() < 1e-7);
    }

    #[test]
    fn quadrature_gaussian_mass() {
        let v = integrate(|x| (-0.5 * x * x).exp(), -12.0, 12.0, 1e-13);
        assert!((v - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-11);
        let w = integrate_to_inf(|x| (-x).exp(), 0.0, 1e-12);
        assert!((w - 1.0).abs() < 1e-10);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500500.0);
    }

    #[test]
    fn log_sum_exp_large_inputs() {
        let v = log_sum_exp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
