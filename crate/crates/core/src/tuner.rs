//! Boundary curvatures with prescribed momentum: find `c` such that
//! `c_i · L_i(c) = d` on every boundary loop.
//!
//! Outer Newton iteration on `G(c) = F(c) − d` with `F_i(c) = c_i L_i(c)`.
//! The Jacobian comes from the linearized problem: `dF(c)(b)_i = b_i L_i +
//! c_i ∫_{Γ_i} v` where `H v = b_i B e^u` on `Γ_i`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::LinalgError;
use crate::mesh::{BackgroundMetric, TriMesh};
use crate::solver::{
    boundary_length, boundary_weights, mesh_profile, newton_matrix, solve_u, ConformalFactor, CurvatureSpec,
    SolveReport, SolverConfig, SolverError,
};
use crate::verify::{conformal_modulus, VerifyError};

/// Clamp window for the outer iteration.
pub const C_MIN: f64 = 1e-8;
pub const C_MAX: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TunerError {
    #[error("momentum d must be positive and finite, got {0}")]
    InvalidMomentum(f64),
    #[error("{got} values given for a mesh with {expected} boundary loops")]
    LoopCountMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("linearized system is not positive definite: {0}")]
    Linearized(LinalgError),
    #[error("momentum Jacobian is singular at c = {c:?}")]
    SingularJacobian { c: Vec<f64> },
    #[error("initial guess failed: {0}")]
    InitialGuess(#[from] VerifyError),
    #[error("outer Newton did not reach |c_i L_i − d| ≤ {tol:e} in {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        tol: f64,
        history: Vec<TuneIterate>,
    },
}

/// Common boundary momentum `d > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct MomentumTarget(f64);

impl MomentumTarget {
    pub fn new(d: f64) -> Result<Self, TunerError> {
        if d > 0.0 && d.is_finite() {
            Ok(Self(d))
        } else {
            Err(TunerError::InvalidMomentum(d))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for MomentumTarget {
    type Error = TunerError;
    fn try_from(d: f64) -> Result<Self, TunerError> {
        Self::new(d)
    }
}

impl From<MomentumTarget> for f64 {
    fn from(d: MomentumTarget) -> f64 {
        d.0
    }
}

/// Discrete derivative `v = du_c/dc · b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedResponse {
    pub v: Vec<f64>,
}

fn check_loops(mesh: &TriMesh, n: usize) -> Result<(), TunerError> {
    if n != mesh.loop_count() {
        return Err(TunerError::LoopCountMismatch {
            expected: mesh.loop_count(),
            got: n,
        });
    }
    Ok(())
}

/// `rhs_v = b_i B_v e^{u_v}` on loop `i`, zero inside.
fn linearized_rhs(mesh: &TriMesh, bg: &BackgroundMetric, u: &[f64], b: &[f64]) -> Vec<f64> {
    (0..mesh.vertex_count())
        .map(|v| {
            mesh.loop_of_vertex(v)
                .map_or(0.0, |i| b[i] * bg.boundary_mass[v] * u[v].exp())
        })
        .collect()
}

/// Solves `H v = rhs` for the perturbation `b` of the boundary curvatures.
pub fn linearized_solve(
    mesh: &TriMesh,
    bg: &BackgroundMetric,
    u_c: &ConformalFactor,
    c: &CurvatureSpec,
    b: &[f64],
) -> Result<LinearizedResponse, TunerError> {
    check_loops(mesh, c.len())?;
    check_loops(mesh, b.len())?;
    let profile = mesh_profile(mesh);
    let cb = boundary_weights(mesh, bg, c.values());
    let chol = newton_matrix(mesh, bg, &profile, &u_c.u, &cb, 0.0)
        .factor()
        .map_err(TunerError::Linearized)?;
    Ok(LinearizedResponse {
        v: chol.solve(&linearized_rhs(mesh, bg, &u_c.u, b)),
    })
}

/// `F_i(c) = c_i L_i(c)` together with the solution it came from.
pub fn momentum_map(
    mesh: &TriMesh,
    bg: &BackgroundMetric,
    c: &CurvatureSpec,
    config: &SolverConfig,
    warm_start: Option<&ConformalFactor>,
) -> Result<(Vec<f64>, ConformalFactor, SolveReport), TunerError> {
    let (u, report) = solve_u(mesh, bg, c, config, warm_start)?;
    let f = c.values().iter().zip(&report.lengths).map(|(ci, l)| ci * l).collect();
    Ok((f, u, report))
}

/// `J_ij = δ_ij L_i + c_i Σ_{v∈Γ_i} B_v e^{u_v} v_j(v)`, one factorization and
/// `k` solves.
pub fn jacobian(
    mesh: &TriMesh,
    bg: &BackgroundMetric,
    u_c: &ConformalFactor,
    c: &CurvatureSpec,
) -> Result<DMatrix<f64>, TunerError> {
    check_loops(mesh, c.len())?;
    let k = c.len();
    let profile = mesh_profile(mesh);
    let cb = boundary_weights(mesh, bg, c.values());
    let chol = newton_matrix(mesh, bg, &profile, &u_c.u, &cb, 0.0)
        .factor()
        .map_err(TunerError::Linearized)?;
    let lengths: Vec<f64> = (0..k).map(|i| boundary_length(mesh, bg, u_c, i)).collect();
    let mut jac = DMatrix::zeros(k, k);
    for j in 0..k {
        let mut b = vec![0.0; k];
        b[j] = 1.0;
        let v = chol.solve(&linearized_rhs(mesh, bg, &u_c.u, &b));
        for i in 0..k {
            let flux: f64 = mesh.loops()[i]
                .iter()
                .map(|&w| bg.boundary_mass[w] * u_c.u[w].exp() * v[w])
                .sum();
            jac[(i, j)] = c.values()[i] * flux + if i == j { lengths[i] } else { 0.0 };
        }
    }
    Ok(jac)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TunerConfig {
    /// relative tolerance: stop when max_i |c_i L_i − d| ≤ tol·d
    pub tol: f64,
    pub max_outer: usize,
    pub solver: SolverConfig,
}

impl Default for TunerConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_outer: 30,
            solver: SolverConfig::default(),
        }
    }
}

/// One row of the outer iteration table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneIterate {
    pub iteration: usize,
    pub c: Vec<f64>,
    pub momentum: Vec<f64>,
    /// max-norm of the step taken from this iterate (0 on the last row)
    pub step_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub c: CurvatureSpec,
    pub u: ConformalFactor,
    pub report: SolveReport,
    pub initial_guess: Vec<f64>,
    pub history: Vec<TuneIterate>,
}

impl TuneResult {
    /// Outer Newton steps taken.
    pub fn outer_iterations(&self) -> usize {
        self.history.len().saturating_sub(1)
    }

    pub fn history_csv(&self) -> String {
        history_csv(&self.history)
    }
}

pub fn history_csv(history: &[TuneIterate]) -> String {
    let k = history.first().map_or(0, |h| h.c.len());
    let mut s = String::from("iteration");
    for i in 0..k {
        write!(s, ",c_{i}").unwrap();
    }
    for i in 0..k {
        write!(s, ",F_{i}").unwrap();
    }
    s.push_str(",step_norm\n");
    for h in history {
        write!(s, "{}", h.iteration).unwrap();
        for x in h.c.iter().chain(&h.momentum) {
            write!(s, ",{x}").unwrap();
        }
        writeln!(s, ",{:e}", h.step_norm).unwrap();
    }
    s
}

/// Curvature `c` with `d = c·(4π/Z)·arcsin(c)/sqrt(1 − c²)`: the exact answer
/// on a round cylinder of conformal modulus `Z`. The right side increases
/// from 0 to ∞ on `[0, 1)`.
pub fn cylinder_curvature_for_momentum(z: f64, d: f64) -> f64 {
    let f = |c: f64| c * (2.0 * std::f64::consts::TAU / z) * c.asin() / ((1.0 - c) * (1.0 + c)).sqrt() - d;
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Starting curvatures. For χ < 0: `c_i = d / sqrt(L_i(0)² + d²)` from the
/// geodesic-boundary solve. The annulus has no `c = 0` solution, so there the
/// round-cylinder value for the discrete conformal modulus is used.
pub fn initial_guess(
    mesh: &TriMesh,
    bg: &BackgroundMetric,
    d: MomentumTarget,
    config: &SolverConfig,
) -> Result<(Vec<f64>, Option<ConformalFactor>), TunerError> {
    let d = d.value();
    let k = mesh.loop_count();
    if mesh.euler_characteristic() == 0 {
        let z = conformal_modulus(mesh, bg, 0)?;
        let c = cylinder_curvature_for_momentum(z, d).clamp(C_MIN, C_MAX);
        return Ok((vec![c; k], None));
    }
    let zero = CurvatureSpec::uniform(k, 0.0)?;
    let (u0, rep) = solve_u(mesh, bg, &zero, config, None)?;
    let c = rep
        .lengths
        .iter()
        .map(|l| (d / l.hypot(d)).clamp(C_MIN, C_MAX))
        .collect();
    Ok((c, Some(u0)))
}

/// Outer Newton iteration for `c_i L_i(c) = d`.
pub fn tune_d(
    mesh: &TriMesh,
    bg: &BackgroundMetric,
    d: MomentumTarget,
    config: &TunerConfig,
    start: Option<&[f64]>,
) -> Result<TuneResult, TunerError> {
    let dv = d.value();
    let k = mesh.loop_count();
    // inner residuals well below the outer tolerance keep the Newton model consistent
    let mut inner = config.solver;
    inner.residual_tol = inner.residual_tol.min(1e-2 * config.tol * dv);

    let (mut c, mut warm) = match start {
        Some(s) => {
            check_loops(mesh, s.len())?;
            (s.iter().map(|x| x.clamp(C_MIN, C_MAX)).collect(), None)
        }
        None => initial_guess(mesh, bg, d, &inner)?,
    };
    let initial = c.clone();

    let spec = CurvatureSpec::new(c.clone())?;
    let (mut f, mut u, mut report) = momentum_map(mesh, bg, &spec, &inner, warm.as_ref())?;
    let mut history = Vec::new();
    for iteration in 0..=config.max_outer {
        let g: Vec<f64> = f.iter().map(|x| x - dv).collect();
        let gmax = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        history.push(TuneIterate {
            iteration,
            c: c.clone(),
            momentum: f.clone(),
            step_norm: 0.0,
        });
        if gmax <= config.tol * dv {
            return Ok(TuneResult {
                c: CurvatureSpec::new(c)?,
                u,
                report,
                initial_guess: initial,
                history,
            });
        }
        if iteration == config.max_outer {
            break;
        }
        let jac = jacobian(mesh, bg, &u, &CurvatureSpec::new(c.clone())?)?;
        let step = jac
            .lu()
            .solve(&DVector::from_vec(g.clone()))
            .ok_or_else(|| TunerError::SingularJacobian { c: c.clone() })?;

        // halve the step until it stays inside the clamp window and the inner solve succeeds
        let mut alpha = 1.0;
        let mut halvings = 0;
        let next = loop {
            let trial: Vec<f64> = c.iter().zip(step.iter()).map(|(ci, s)| ci - alpha * s).collect();
            let inside = trial.iter().all(|&x| (C_MIN..=C_MAX).contains(&x));
            if inside {
                let spec = CurvatureSpec::new(trial.clone())?;
                warm = Some(u.clone());
                match momentum_map(mesh, bg, &spec, &inner, warm.as_ref()) {
                    Ok(out) => break Ok((trial, out)),
                    Err(e) if halvings >= 30 => break Err(e),
                    Err(_) => {}
                }
            } else if halvings >= 60 {
                let clamped: Vec<f64> = trial.iter().map(|x| x.clamp(C_MIN, C_MAX)).collect();
                let spec = CurvatureSpec::new(clamped.clone())?;
                break momentum_map(mesh, bg, &spec, &inner, Some(&u)).map(|out| (clamped, out));
            }
            alpha *= 0.5;
            halvings += 1;
        };
        let (trial, (f_new, u_new, rep_new)) = next?;
        history.last_mut().unwrap().step_norm = trial.iter().zip(&c).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        c = trial;
        f = f_new;
        u = u_new;
        report = rep_new;
    }
    debug_assert_eq!(c.len(), k);
    Err(TunerError::NonConvergence {
        iterations: config.max_outer,
        tol: config.tol * dv,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_background, generate_flat_annulus, generate_pants_domain};
    use std::f64::consts::PI;

    fn annulus(n: usize) -> (TriMesh, BackgroundMetric) {
        let m = generate_flat_annulus(PI, n, n).unwrap();
        let bg = build_background(&m).unwrap();
        (m, bg)
    }

    fn tight() -> SolverConfig {
        SolverConfig {
            residual_tol: 1e-13,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn momentum_validation() {
        assert!(MomentumTarget::new(0.0).is_err());
        assert!(MomentumTarget::new(f64::NAN).is_err());
        assert_eq!(MomentumTarget::new(1.5).unwrap().value(), 1.5);
    }

    #[test]
    fn zero_perturbation_gives_zero_response() {
        let (m, bg) = annulus(12);
        let c = CurvatureSpec::uniform(2, 0.5).unwrap();
        let (u, _) = solve_u(&m, &bg, &c, &tight(), None).unwrap();
        let v = linearized_solve(&m, &bg, &u, &c, &[0.0, 0.0]).unwrap();
        assert!(v.v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn symmetric_response_is_rotation_invariant() {
        let n = 16;
        let (m, bg) = annulus(n);
        let c = CurvatureSpec::uniform(2, 0.4).unwrap();
        let (u, _) = solve_u(&m, &bg, &c, &tight(), None).unwrap();
        let v = linearized_solve(&m, &bg, &u, &c, &[1.0, 1.0]).unwrap();
        for ring in v.v.chunks(n) {
            for x in ring {
                assert!((x - ring[0]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn response_matches_finite_difference() {
        let (m, bg) = annulus(16);
        let c = CurvatureSpec::new(vec![0.5, 0.4]).unwrap();
        let b = [0.3, -0.7];
        let eps = 1e-5;
        let (u, _) = solve_u(&m, &bg, &c, &tight(), None).unwrap();
        let cp = CurvatureSpec::new(vec![0.5 + eps * b[0], 0.4 + eps * b[1]]).unwrap();
        let (up, _) = solve_u(&m, &bg, &cp, &tight(), Some(&u)).unwrap();
        let v = linearized_solve(&m, &bg, &u, &c, &b).unwrap();
        let scale = v.v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        for i in 0..u.u.len() {
            let fd = (up.u[i] - u.u[i]) / eps;
            assert!((fd - v.v[i]).abs() <= 1e-3 * scale, "{fd} vs {}", v.v[i]);
        }
    }

    #[test]
    fn symmetric_annulus_jacobian() {
        let (m, bg) = annulus(16);
        let c = CurvatureSpec::uniform(2, 0.5).unwrap();
        let (u, _) = solve_u(&m, &bg, &c, &tight(), None).unwrap();
        let j = jacobian(&m, &bg, &u, &c).unwrap();
        assert!((j[(0, 0)] - j[(1, 1)]).abs() < 1e-9 * j[(0, 0)].abs());
        assert!((j[(0, 1)] - j[(1, 0)]).abs() < 1e-9 * j[(0, 0)].abs());
        assert!(j.determinant().abs() > 1e-6);
    }

    #[test]
    fn cylinder_curvature_inverts() {
        let c = cylinder_curvature_for_momentum(PI, 1.2092);
        assert!((c - 0.5).abs() < 1e-4);
        let z = 7.3;
        let c = 0.83;
        let d = c * (4.0 * PI / z) * c.asin() / (1.0 - c * c).sqrt();
        assert!((cylinder_curvature_for_momentum(z, d) - c).abs() < 1e-12);
    }

    #[test]
    fn annulus_round_trip() {
        let (m, bg) = annulus(24);
        let d = MomentumTarget::new(1.209200).unwrap();
        let r = tune_d(&m, &bg, d, &TunerConfig::default(), None).unwrap();
        for (ci, li) in r.c.values().iter().zip(&r.report.lengths) {
            assert!((ci - 0.5).abs() < 5e-3);
            assert!((ci * li - d.value()).abs() <= 1e-8 * d.value());
        }
        assert!(r.outer_iterations() <= 10);
        assert!(r.history_csv().starts_with("iteration,c_0,c_1,F_0,F_1,step_norm\n"));
    }

    #[test]
    fn pants_area_identity() {
        let m = generate_pants_domain(3.0, 0.8, 1.4, 40).unwrap();
        let bg = build_background(&m).unwrap();
        let d = MomentumTarget::new(1.0).unwrap();
        let r = tune_d(&m, &bg, d, &TunerConfig::default(), None).unwrap();
        assert!((r.report.area - (2.0 * PI + 3.0)).abs() < 1e-6 * r.report.area);
        for &l in &r.report.lengths {
            assert!(l > 1.0);
        }
    }
}
