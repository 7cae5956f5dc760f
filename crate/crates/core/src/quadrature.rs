//! Adaptive Gauss–Kronrod (7/15) quadrature for one-dimensional integrals.

use thiserror::Error;

/// Absolute tolerance used for collar integrals throughout the crate.
pub const COLLAR_QUAD_TOL: f64 = 1e-12;

const MAX_DEPTH: u32 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum QuadratureError {
    #[error("quadrature on [{a}, {b}] did not reach tolerance {tol:e} (estimated error {estimate:e})")]
    NonConvergence { a: f64, b: f64, tol: f64, estimate: f64 },
    #[error("integrand returned a non-finite value at x = {x}")]
    NonFinite { x: f64 },
}

// Kronrod nodes on [-1, 1] (positive half, centre last) and weights.
const XK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64), QuadratureError> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |x: f64| {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(QuadratureError::NonFinite { x })
        }
    };
    let fc = eval(centre)?;
    let mut kronrod = WK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (j, (&x, &w)) in XK.iter().zip(WK.iter()).take(7).enumerate() {
        let dx = half * x;
        let f1 = eval(centre - dx)?;
        let f2 = eval(centre + dx)?;
        kronrod += w * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    Ok((kronrod * half, ((kronrod - gauss) * half).abs()))
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol` by recursive bisection.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64, QuadratureError> {
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return integrate(f, b, a, tol).map(|v| -v);
    }
    let (value, err) = gk15(&f, a, b)?;
    refine(&f, a, b, value, err, tol, 0)
}

fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    value: f64,
    err: f64,
    tol: f64,
    depth: u32,
) -> Result<f64, QuadratureError> {
    // Round-off floor: once the error estimate is at machine precision of the
    // panel value there is nothing left to gain from splitting.
    if err <= tol || err <= 50.0 * f64::EPSILON * value.abs() {
        return Ok(value);
    }
    if depth >= MAX_DEPTH {
        return Err(QuadratureError::NonConvergence {
            a,
            b,
            tol,
            estimate: err,
        });
    }
    let mid = 0.5 * (a + b);
    let (left, el) = gk15(f, a, mid)?;
    let (right, er) = gk15(f, mid, b)?;
    let l = refine(f, a, mid, left, el, 0.5 * tol, depth + 1)?;
    let r = refine(f, mid, b, right, er, 0.5 * tol, depth + 1)?;
    Ok(l + r)
}

/// Integrates over `[a, b]` after splitting at the given interior breakpoints.
///
/// Used for integrands with kinks (absolute values of polynomials), where the
/// kink locations are known.
pub fn integrate_split<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: f64,
) -> Result<f64, QuadratureError> {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    pts.sort_by(|x, y| x.total_cmp(y));
    let mut nodes = Vec::with_capacity(pts.len() + 2);
    nodes.push(a);
    nodes.extend(pts);
    nodes.push(b);
    let share = tol / (nodes.len() - 1) as f64;
    let mut total = 0.0;
    for w in nodes.windows(2) {
        total += integrate(&f, w[0], w[1], share)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomials_are_exact() {
        let v = integrate(|x| x.powi(5) - 3.0 * x * x + 1.0, -1.0, 2.0, 1e-14).unwrap();
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0) + 3.0;
        assert!((v - exact).abs() < 1e-13, "{v} vs {exact}");
    }

    #[test]
    fn smooth_transcendental() {
        let v = integrate(|x| x.sin(), 0.0, PI, 1e-13).unwrap();
        assert!((v - 2.0).abs() < 1e-13);
        let v = integrate(|x| 1.0 / (1.0 + x * x), 0.0, 50.0, 1e-13).unwrap();
        assert!((v - 50f64.atan()).abs() < 1e-12);
    }

    #[test]
    fn reversed_and_empty_intervals() {
        assert_eq!(integrate(|x| x, 1.0, 1.0, 1e-12).unwrap(), 0.0);
        let v = integrate(|x| x, 1.0, 0.0, 1e-12).unwrap();
        assert!((v + 0.5).abs() < 1e-15);
    }

    #[test]
    fn kink_with_breakpoint() {
        let v = integrate_split(|x: f64| (x - 0.3).abs(), 0.0, 1.0, &[0.3], 1e-14).unwrap();
        assert!((v - (0.045 + 0.245)).abs() < 1e-14);
    }

    #[test]
    fn non_finite_is_reported() {
        let e = integrate(|x| 1.0 / x, 0.0, 1.0, 1e-12);
        assert!(e.is_err());
    }
}
