//! Closed-form geometry of hyperbolic collars.
//!
//! A collar around a closed geodesic of length `ell` is the cylinder
//! `(-π²/ell, π²/ell) × S¹` with metric `ρ_ell(s)² (ds² + dθ²)`, where
//! `ρ_ell(s) = (ell/2π) / cos(ell·s/2π)`. The circle `{s} × S¹` has constant
//! geodesic curvature `sin(ell·s/2π)`, so a boundary curve of curvature `c`
//! sits at `s = Y(ell, c)`. Everything in this module is a pure function of
//! its arguments and serves as the exact reference for the mesh solver.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{self, QuadratureError, COLLAR_QUAD_TOL};

/// Largest curvature accepted by collar operations.
pub const MAX_CURVATURE: f64 = 1.0 - 1e-12;
/// Above this curvature a geometry is flagged as near-degenerate.
pub const NEAR_DEGENERATE_CURVATURE: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CollarError {
    #[error("geodesic length must be positive, got {0}")]
    NonPositiveLength(f64),
    #[error("curvature {0} outside [0, 1 - 1e-12]")]
    CurvatureOutOfRange(f64),
    #[error("momentum must be positive, got {0}")]
    NonPositiveMomentum(f64),
    #[error("coordinate s = {s} outside the collar |s| < π²/ell = {bound}")]
    OutsideCollar { s: f64, bound: f64 },
    #[error("boundary length {length} does not exceed momentum {momentum}")]
    InfeasibleLength { length: f64, momentum: f64 },
    #[error("conformal modulus must be positive, got {0}")]
    NonPositiveModulus(f64),
    #[error("a flat cylinder carries no hyperbolic metric with geodesic boundary (c = 0)")]
    GeodesicCylinder,
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

fn check_length(ell: f64) -> Result<(), CollarError> {
    if ell > 0.0 && ell.is_finite() {
        Ok(())
    } else {
        Err(CollarError::NonPositiveLength(ell))
    }
}

fn check_curvature(c: f64) -> Result<(), CollarError> {
    if (0.0..=MAX_CURVATURE).contains(&c) {
        Ok(())
    } else {
        Err(CollarError::CurvatureOutOfRange(c))
    }
}

fn check_inside(ell: f64, s: f64) -> Result<(), CollarError> {
    let bound = PI * PI / ell;
    if s.abs() < bound {
        Ok(())
    } else {
        Err(CollarError::OutsideCollar { s, bound })
    }
}

/// Conformal density `ρ_ell(s)` of the collar metric.
pub fn rho(ell: f64, s: f64) -> Result<f64, CollarError> {
    check_length(ell)?;
    check_inside(ell, s)?;
    Ok(ell / TAU / (ell * s / TAU).cos())
}

/// Conformal half-width `X(ell)` of the standard collar around a geodesic.
pub fn collar_halfwidth(ell: f64) -> Result<f64, CollarError> {
    check_length(ell)?;
    // π/2 − atan(x) = atan(1/x), without cancellation for large x
    Ok(TAU / ell * (ell / 2.0).sinh().recip().atan())
}

/// Conformal position `Y(ell, c)` of the boundary circle with curvature `c`.
pub fn boundary_offset(ell: f64, c: f64) -> Result<f64, CollarError> {
    check_length(ell)?;
    check_curvature(c)?;
    Ok(TAU / ell * c.asin())
}

/// Conformal width `X̄_d(ell)` of the half-collar between the geodesic and a
/// boundary curve of momentum `d`.
pub fn xbar_d(ell: f64, d: f64) -> Result<f64, CollarError> {
    check_length(ell)?;
    if !(d > 0.0 && d.is_finite()) {
        return Err(CollarError::NonPositiveMomentum(d));
    }
    Ok(TAU / ell * (d / ell).atan())
}

/// Geodesic curvature of the circle `{s} × S¹` in the collar of `ell`.
pub fn circle_curvature(ell: f64, s: f64) -> Result<f64, CollarError> {
    check_length(ell)?;
    check_inside(ell, s)?;
    Ok((ell * s / TAU).sin())
}

/// Area of the half-collar between the geodesic and the boundary circle of
/// curvature `c`, in closed form `c·ell / sqrt(1 - c²)`. It equals the
/// boundary momentum `d`.
pub fn halfcollar_area(ell: f64, c: f64) -> Result<f64, CollarError> {
    check_length(ell)?;
    check_curvature(c)?;
    Ok(c * ell / (1.0 - c * c).sqrt())
}

/// `2π ∫₀^Y ρ² ds`, evaluated by adaptive quadrature. Oracle for [`halfcollar_area`].
pub fn halfcollar_area_quadrature(ell: f64, c: f64) -> Result<f64, CollarError> {
    let y = boundary_offset(ell, c)?;
    let k = ell / TAU;
    let v = quadrature::integrate(
        |s| {
            let r = k / (k * s).cos();
            r * r
        },
        0.0,
        y,
        COLLAR_QUAD_TOL,
    )?;
    Ok(TAU * v)
}

/// Geodesic length, boundary curvature, momentum and boundary length of one
/// boundary collar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollarGeometry {
    pub ell: f64,
    pub c: f64,
    pub d: f64,
    pub boundary_length: f64,
    /// Set when `c` exceeds [`NEAR_DEGENERATE_CURVATURE`]: the boundary length
    /// blows up as `c → 1`.
    pub near_degenerate: bool,
}

impl CollarGeometry {
    /// Builds the collar data from the central geodesic length and the
    /// boundary curvature: `L = ell / sqrt(1 - c²)`, `d = c·L`.
    pub fn from_geodesic(ell: f64, c: f64) -> Result<Self, CollarError> {
        check_length(ell)?;
        check_curvature(c)?;
        let boundary_length = ell / (1.0 - c * c).sqrt();
        Ok(Self {
            ell,
            c,
            d: c * boundary_length,
            boundary_length,
            near_degenerate: c > NEAR_DEGENERATE_CURVATURE,
        })
    }

    /// Builds the collar data from boundary length and momentum.
    pub fn from_boundary(boundary_length: f64, d: f64) -> Result<Self, CollarError> {
        let ell = geodesic_from_boundary(boundary_length, d)?;
        let c = d / boundary_length;
        Ok(Self {
            ell,
            c,
            d,
            boundary_length,
            near_degenerate: c > NEAR_DEGENERATE_CURVATURE,
        })
    }

    /// `L² − ell² − d²`, zero up to round-off.
    pub fn length_identity_defect(&self) -> f64 {
        self.boundary_length.powi(2) - self.ell.powi(2) - self.d.powi(2)
    }
}

/// Length of the geodesic homotopic to a boundary curve of length `length`
/// and momentum `d`: `sqrt(L² − d²)`.
pub fn geodesic_from_boundary(length: f64, d: f64) -> Result<f64, CollarError> {
    if d < 0.0 || !d.is_finite() || !length.is_finite() || length <= d {
        return Err(CollarError::InfeasibleLength { length, momentum: d });
    }
    Ok(((length - d) * (length + d)).sqrt())
}

/// Rotationally symmetric hyperbolic metric `e^{2u(s)}(ds² + dθ²)` on the
/// flat cylinder `[0, T] × S¹` whose boundary circles both have curvature `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderSolution {
    pub modulus: f64,
    pub c: f64,
    pub ell: f64,
}

impl CylinderSolution {
    fn scale(&self) -> f64 {
        self.ell / TAU
    }

    /// `u(s) = log ρ_ell(s − T/2)`.
    pub fn u(&self, s: f64) -> f64 {
        let k = self.scale();
        (k / (k * (s - 0.5 * self.modulus)).cos()).ln()
    }

    pub fn du(&self, s: f64) -> f64 {
        let k = self.scale();
        k * (k * (s - 0.5 * self.modulus)).tan()
    }

    pub fn d2u(&self, s: f64) -> f64 {
        let k = self.scale();
        let sec = 1.0 / (k * (s - 0.5 * self.modulus)).cos();
        k * k * sec * sec
    }

    /// Length of either boundary circle.
    pub fn boundary_length(&self) -> f64 {
        TAU * self.u(0.0).exp()
    }

    pub fn geometry(&self) -> CollarGeometry {
        // c < 1 is guaranteed by construction.
        CollarGeometry::from_geodesic(self.ell, self.c).expect("valid cylinder data")
    }

    /// Hyperbolic area `2π ∫₀^T e^{2u} ds`, in closed form `2d`.
    pub fn area(&self) -> f64 {
        2.0 * self.geometry().d
    }
}

/// Exact hyperbolic metric on the flat cylinder of modulus `t` with both
/// boundary curvatures equal to `c`; the geodesic length is `(4π/T)·arcsin(c)`.
pub fn cylinder_solution(t: f64, c: f64) -> Result<CylinderSolution, CollarError> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(CollarError::NonPositiveModulus(t));
    }
    if c == 0.0 {
        return Err(CollarError::GeodesicCylinder);
    }
    check_curvature(c)?;
    Ok(CylinderSolution {
        modulus: t,
        c,
        ell: 2.0 * TAU / t * c.asin(),
    })
}

/// Radial test function given by polynomial coefficients in the collar
/// coordinate `s` (lowest degree first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialPolynomial {
    pub coeffs: Vec<f64>,
}

impl RadialPolynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn constant(v: f64) -> Self {
        Self { coeffs: vec![v] }
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &a| acc * s + a)
    }

    pub fn derivative(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &a)| k as f64 * a)
            .collect();
        Self { coeffs }
    }

    /// Sign changes of the polynomial on `[a, b]`, located by sampling and
    /// bisection. Used as quadrature breakpoints for `|w|`.
    pub fn sign_changes(&self, a: f64, b: f64) -> Vec<f64> {
        const SAMPLES: usize = 400;
        let mut roots = Vec::new();
        let mut x0 = a;
        let mut f0 = self.eval(a);
        for i in 1..=SAMPLES {
            let x1 = a + (b - a) * i as f64 / SAMPLES as f64;
            let f1 = self.eval(x1);
            if f0 == 0.0 {
                roots.push(x0);
            } else if f0 * f1 < 0.0 {
                let (mut lo, mut hi, mut flo) = (x0, x1, f0);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    let fm = self.eval(mid);
                    if fm * flo > 0.0 {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            x0 = x1;
            f0 = f1;
        }
        roots
    }
}

/// Both sides of the half-collar trace inequality
/// `c ∫_Γ |w| dS ≤ ∫_{C⁺} |w| dv + c ∫_{C⁺} |dw| dv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl TraceCheck {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// Evaluates both sides of the half-collar trace inequality for a radial test
/// function on the exact half-collar `[0, Y(ell, c)] × S¹`.
pub fn trace_inequality_check(ell: f64, c: f64, w: &RadialPolynomial) -> Result<TraceCheck, CollarError> {
    let y = boundary_offset(ell, c)?;
    let k = ell / TAU;
    let dw = w.derivative();
    let rho = |s: f64| k / (k * s).cos();

    let lhs = c * TAU * rho(y) * w.eval(y).abs();
    let breaks = w.sign_changes(0.0, y);
    let dbreaks = dw.sign_changes(0.0, y);
    let area_term =
        quadrature::integrate_split(|s| w.eval(s).abs() * rho(s).powi(2), 0.0, y, &breaks, COLLAR_QUAD_TOL)?;
    // |dw|_g dv_g = ρ⁻¹|∂_s w| · ρ² ds dθ
    let grad_term = quadrature::integrate_split(|s| dw.eval(s).abs() * rho(s), 0.0, y, &dbreaks, COLLAR_QUAD_TOL)?;
    Ok(TraceCheck {
        lhs,
        rhs: TAU * area_term + c * TAU * grad_term,
    })
}

/// Both sides of the trace inequality on the flat cylinder `[0, X] × S¹`
/// for a radial function:
/// `∫_{0×S¹} |w| dθ ≤ ∫∫ |∂_s w| + X⁻¹ ∫∫ |w|`.
pub fn flat_cylinder_trace_check(x: f64, w: &RadialPolynomial) -> Result<TraceCheck, CollarError> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(CollarError::NonPositiveModulus(x));
    }
    let dw = w.derivative();
    let lhs = TAU * w.eval(0.0).abs();
    let grad = quadrature::integrate_split(|s| dw.eval(s).abs(), 0.0, x, &dw.sign_changes(0.0, x), COLLAR_QUAD_TOL)?;
    let mass = quadrature::integrate_split(|s| w.eval(s).abs(), 0.0, x, &w.sign_changes(0.0, x), COLLAR_QUAD_TOL)?;
    Ok(TraceCheck {
        lhs,
        rhs: TAU * grad + TAU * mass / x,
    })
}

/// Number of θ nodes used by [`horizontal_variation_derivative`].
pub const THETA_NODES: usize = 512;

/// Rate of change of `L(Γ_s)² − L(γ)²` along the variation
/// `∂_t g = Re(Ω)`, `Ω = Σ_j b_j e^{j(s + iθ)} dz²`, where `Γ_s = {s} × S¹`
/// and `γ = {0} × S¹` in the collar of `ell`.
///
/// Each length derivative `d/dt L² = L ∫ (∂_t g)_θθ / sqrt(g_θθ) dθ` is
/// computed by the trapezoidal rule in θ. The result vanishes for every
/// finite coefficient list.
pub fn horizontal_variation_derivative(ell: f64, s: f64, coeffs: &[(i32, Complex64)]) -> Result<f64, CollarError> {
    let rho_s = rho(ell, s)?;
    let rho_0 = rho(ell, 0.0)?;
    let length_rate = |at: f64, density: f64| {
        let length = TAU * density;
        let h = TAU / THETA_NODES as f64;
        let integral: f64 = (0..THETA_NODES)
            .map(|n| {
                let theta = n as f64 * h;
                // (dz²)_θθ = i² = -1
                let omega_tt: Complex64 = coeffs
                    .iter()
                    .map(|&(j, b)| -b * Complex64::new(j as f64 * at, j as f64 * theta).exp())
                    .sum();
                omega_tt.re / density
            })
            .sum::<f64>()
            * h;
        length * integral
    };
    Ok(length_rate(s, rho_s) - length_rate(0.0, rho_0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_values() {
        assert!((rho(TAU, 0.0).unwrap() - 1.0).abs() < 1e-15);
        let v = rho(PI, 1.0).unwrap();
        assert!((v - 0.5 / 0.5f64.cos()).abs() < 1e-15);
        assert!((v - 0.569_747).abs() < 1e-6);
        assert_eq!(rho(2.0, 0.7).unwrap(), rho(2.0, -0.7).unwrap());
    }

    #[test]
    fn rho_domain_error() {
        let ell = 2.0;
        let bound = PI * PI / ell;
        assert!(matches!(rho(ell, bound), Err(CollarError::OutsideCollar { .. })));
        assert!(matches!(rho(ell, -bound - 1.0), Err(CollarError::OutsideCollar { .. })));
        assert!(matches!(rho(0.0, 0.0), Err(CollarError::NonPositiveLength(_))));
    }

    #[test]
    fn halfwidth_limits() {
        let ell = 1e-7;
        assert!((collar_halfwidth(ell).unwrap() * ell - PI * PI).abs() < 1e-6);
        let ell = 2.0 * 1f64.asinh();
        let x = collar_halfwidth(ell).unwrap();
        assert!((x - PI * PI / (2.0 * ell)).abs() < 1e-12);
        assert!((x - 2.799_49).abs() < 1e-5);
        assert!(collar_halfwidth(-1.0).is_err());
    }

    #[test]
    fn halfwidth_decreasing() {
        let mut prev = f64::INFINITY;
        for i in 1..200 {
            let x = collar_halfwidth(0.05 * i as f64).unwrap();
            assert!(x < prev);
            prev = x;
        }
    }

    #[test]
    fn offset_values() {
        assert!((boundary_offset(PI, 0.5).unwrap() - PI / 3.0).abs() < 1e-15);
        assert_eq!(boundary_offset(3.0, 0.0).unwrap(), 0.0);
        let y = boundary_offset(1.3, 0.5).unwrap();
        assert!((circle_curvature(1.3, y).unwrap() - 0.5).abs() < 1e-15);
        assert!(boundary_offset(1.0, 1.0).is_err());
        assert!(boundary_offset(1.0, -0.1).is_err());
    }

    #[test]
    fn xbar_values() {
        let ell = 1.7;
        assert!((xbar_d(ell, ell).unwrap() - PI * PI / (2.0 * ell)).abs() < 1e-14);
        let ell = 1e4;
        let d = 0.8;
        let ratio = xbar_d(ell, d).unwrap() * ell * ell / (TAU * d);
        assert!((ratio - 1.0).abs() < 1e-6);
        assert!(xbar_d(1.0, 0.0).is_err());
        assert!(xbar_d(0.0, 1.0).is_err());
    }

    #[test]
    fn circle_curvature_matches_log_derivative() {
        // ρ⁻²∂_s ρ by central differences
        let (ell, s, h) = (2.0, 1.0, 1e-5);
        let fd = (rho(ell, s + h).unwrap() - rho(ell, s - h).unwrap()) / (2.0 * h);
        let k = fd / rho(ell, s).unwrap().powi(2);
        assert!((k - (1.0 / PI).sin()).abs() < 1e-8);
        assert_eq!(circle_curvature(ell, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn area_closed_form() {
        assert_eq!(halfcollar_area(1.0, 0.0).unwrap(), 0.0);
        assert!((halfcollar_area(4.0, 0.6).unwrap() - 3.0).abs() < 1e-14);
        let q = halfcollar_area_quadrature(2.0, 0.7).unwrap();
        assert!((q - halfcollar_area(2.0, 0.7).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn lengths() {
        assert!((geodesic_from_boundary(5.0, 3.0).unwrap() - 4.0).abs() < 1e-15);
        let g = CollarGeometry::from_geodesic(TAU / 3.0, 0.5).unwrap();
        assert!((g.boundary_length - 4.0 * PI / (3.0 * 3f64.sqrt())).abs() < 1e-14);
        assert!((g.boundary_length - 2.418_400).abs() < 1e-6);
        assert!((g.d - 1.209_200).abs() < 1e-6);
        let g0 = CollarGeometry::from_geodesic(1.5, 0.0).unwrap();
        assert_eq!(g0.boundary_length, 1.5);
        assert_eq!(g0.d, 0.0);
        assert!(matches!(
            geodesic_from_boundary(1.0, 1.0),
            Err(CollarError::InfeasibleLength { .. })
        ));
    }

    #[test]
    fn near_degenerate_flag() {
        assert!(!CollarGeometry::from_geodesic(1.0, 0.99).unwrap().near_degenerate);
        let g = CollarGeometry::from_geodesic(1.0, 1.0 - 1e-8).unwrap();
        assert!(g.near_degenerate);
        assert!(g.boundary_length > 1e3);
        assert!(CollarGeometry::from_geodesic(1.0, 1.0 - 1e-13).is_err());
    }

    #[test]
    fn cylinder_values() {
        let cyl = cylinder_solution(PI, 0.5).unwrap();
        assert!((cyl.ell - TAU / 3.0).abs() < 1e-14);
        assert!((cyl.boundary_length() - 2.418_400).abs() < 1e-6);
        let g = cyl.geometry();
        assert!((g.d - 1.209_200).abs() < 1e-6);
        assert!(g.length_identity_defect().abs() < 1e-9);
        // boundary condition u' = c e^u at s = T, -u' = c e^u at s = 0
        let t = cyl.modulus;
        assert!((cyl.du(t) - 0.5 * cyl.u(t).exp()).abs() < 1e-14);
        assert!((-cyl.du(0.0) - 0.5 * cyl.u(0.0).exp()).abs() < 1e-14);
        assert!(matches!(cylinder_solution(PI, 0.0), Err(CollarError::GeodesicCylinder)));
        assert!(cylinder_solution(-1.0, 0.5).is_err());
    }

    #[test]
    fn cylinder_ode_residual() {
        let cyl = cylinder_solution(PI, 0.5).unwrap();
        for i in 0..100 {
            let s = cyl.modulus * i as f64 / 99.0;
            let r = cyl.d2u(s) - (2.0 * cyl.u(s)).exp();
            assert!(r.abs() <= 1e-9, "residual {r} at {s}");
        }
    }

    #[test]
    fn trace_constant_is_equality() {
        let chk = trace_inequality_check(2.0, 0.5, &RadialPolynomial::constant(1.0)).unwrap();
        let g = CollarGeometry::from_geodesic(2.0, 0.5).unwrap();
        assert!((chk.lhs - g.d).abs() < 1e-12);
        assert!((chk.rhs - chk.lhs).abs() < 1e-10);
    }

    #[test]
    fn trace_linear_has_slack() {
        let chk = trace_inequality_check(2.0, 0.5, &RadialPolynomial::new(vec![0.0, 1.0])).unwrap();
        assert!(chk.lhs <= chk.rhs);
        assert!(chk.slack() > 0.0);
    }

    #[test]
    fn flat_cylinder_constant_is_equality() {
        let chk = flat_cylinder_trace_check(3.0, &RadialPolynomial::constant(-2.0)).unwrap();
        assert!((chk.lhs - chk.rhs).abs() < 1e-12);
    }

    #[test]
    fn horizontal_trivial_cases() {
        assert_eq!(horizontal_variation_derivative(1.0, 0.5, &[]).unwrap(), 0.0);
        let v = horizontal_variation_derivative(1.0, 0.5, &[(0, Complex64::new(1.0, 2.0))]).unwrap();
        assert!(v.abs() < 1e-13);
    }

    #[test]
    fn polynomial_roots() {
        let p = RadialPolynomial::new(vec![-0.25, 0.0, 1.0]);
        let r = p.sign_changes(-1.0, 1.0);
        assert_eq!(r.len(), 2);
        assert!((r[0] + 0.5).abs() < 1e-14 && (r[1] - 0.5).abs() < 1e-14);
        assert_eq!(p.derivative().coeffs, vec![0.0, 2.0]);
    }
}
