//! Discrete prescribed-curvature problem: find `u` such that `e^{2u} g₀` has
//! Gauss curvature −1 and boundary loop `i` has geodesic curvature `c_i`.
//!
//! With cotan stiffness `L`, lumped area `A`, lumped boundary length `B` and
//! angle defects `Ω`, the discrete Euler–Lagrange system is
//!
//! ```text
//! R_v(u) = (L u)_v + Ω_v + A_v e^{2u_v} − c_i B_v e^{u_v} = 0      (v on loop i)
//! ```
//!
//! which is half the gradient of
//! `E(u) = uᵀLu + Σ (A_v e^{2u_v} + 2Ω_v u_v) − 2 Σ c_i B_v e^{u_v}`.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{Cholesky, LinalgError, Profile, SymMatrix};
use crate::mesh::{BackgroundMetric, TriMesh};

/// Exponentials are only evaluated for `u` below this cap.
pub const U_CAP: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("boundary curvature c[{index}] = {value} outside [0, 1)")]
    InvalidCurvature { index: usize, value: f64 },
    #[error("{got} curvature values given for a mesh with {expected} boundary loops")]
    LoopCountMismatch { expected: usize, got: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("no solution for χ = {chi}: {reason}")]
    InfeasibleTopology { chi: i64, reason: String },
    #[error("Newton did not converge (stage {stage}, iteration {iteration}, last residual {:e})", .history.last().copied().unwrap_or(f64::NAN))]
    NonConvergence {
        stage: usize,
        iteration: usize,
        /// max |R_v| before each Newton step of the failing stage
        history: Vec<f64>,
    },
    #[error("conformal factor reached the cap u = {U_CAP} (stage {stage})")]
    Diverged { stage: usize },
    #[error("Newton matrix stayed indefinite up to shift {shift:e}: {source}")]
    Singular { shift: f64, source: LinalgError },
}

/// Per-vertex logarithmic conformal factor `u`, `g = e^{2u} g₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalFactor {
    pub u: Vec<f64>,
}

impl ConformalFactor {
    pub fn constant(n: usize, t: f64) -> Self {
        Self { u: vec![t; n] }
    }

    pub fn zeros(n: usize) -> Self {
        Self::constant(n, 0.0)
    }

    pub fn max(&self) -> f64 {
        self.u.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Boundary curvatures, one per loop, each in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CurvatureSpec {
    c: Vec<f64>,
}

impl CurvatureSpec {
    pub fn new(c: Vec<f64>) -> Result<Self, SolverError> {
        for (index, &value) in c.iter().enumerate() {
            if !(0.0..1.0).contains(&value) {
                return Err(SolverError::InvalidCurvature { index, value });
            }
        }
        Ok(Self { c })
    }

    pub fn uniform(k: usize, c: f64) -> Result<Self, SolverError> {
        Self::new(vec![c; k])
    }

    pub fn values(&self) -> &[f64] {
        &self.c
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    fn check(&self, mesh: &TriMesh) -> Result<(), SolverError> {
        if self.c.len() != mesh.loop_count() {
            return Err(SolverError::LoopCountMismatch {
                expected: mesh.loop_count(),
                got: self.c.len(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for CurvatureSpec {
    type Error = SolverError;
    fn try_from(c: Vec<f64>) -> Result<Self, SolverError> {
        Self::new(c)
    }
}

impl From<CurvatureSpec> for Vec<f64> {
    fn from(s: CurvatureSpec) -> Self {
        s.c
    }
}

/// Levenberg shift `λ·diag(A)` used when the Newton matrix is indefinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevenbergSchedule {
    /// first nonzero shift
    pub initial: f64,
    /// factor applied after a failed factorization
    pub growth: f64,
    /// factor applied after a successful step; shifts below `initial` drop to 0
    pub shrink: f64,
    pub max: f64,
}

impl Default for LevenbergSchedule {
    fn default() -> Self {
        Self {
            initial: 1e-2,
            growth: 10.0,
            shrink: 0.5,
            max: 1e12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// convergence when max_v |R_v| ≤ residual_tol
    pub residual_tol: f64,
    /// Newton iterations allowed per continuation stage
    pub max_newton: usize,
    /// largest change of any c_i between continuation stages
    pub continuation_step: f64,
    pub damping: LevenbergSchedule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            residual_tol: 1e-10,
            max_newton: 50,
            continuation_step: 0.1,
            damping: LevenbergSchedule::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::InvalidConfig(m.into()));
        if !(self.residual_tol > 0.0) {
            return bad("residual_tol must be positive");
        }
        if self.max_newton == 0 {
            return bad("max_newton must be at least 1");
        }
        if !(self.continuation_step > 0.0 && self.continuation_step < 1.0) {
            return bad("continuation_step must lie in (0, 1)");
        }
        let d = &self.damping;
        if !(d.initial > 0.0 && d.growth > 1.0 && d.shrink > 0.0 && d.shrink < 1.0 && d.max >= d.initial) {
            return bad("damping schedule needs initial > 0, growth > 1, shrink in (0, 1), max ≥ initial");
        }
        Ok(())
    }
}

/// Summary of a converged solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub c: Vec<f64>,
    /// boundary lengths L_i
    pub lengths: Vec<f64>,
    /// geodesic lengths ℓ_i = sqrt(L_i² − (c_i L_i)²) of the collar model
    pub geodesic_lengths: Vec<f64>,
    pub area: f64,
    pub residual_norm: f64,
    pub gauss_bonnet_residual: f64,
    pub newton_iterations: usize,
    pub stages: usize,
    pub wall_time_s: f64,
}

impl SolveReport {
    /// `key = value` lines.
    pub fn to_key_value(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        writeln!(s, "c = {}", list(&self.c)).unwrap();
        writeln!(s, "boundary_lengths = {}", list(&self.lengths)).unwrap();
        writeln!(s, "geodesic_lengths = {}", list(&self.geodesic_lengths)).unwrap();
        writeln!(s, "area = {}", self.area).unwrap();
        writeln!(s, "residual_norm = {:e}", self.residual_norm).unwrap();
        writeln!(s, "gauss_bonnet_residual = {:e}", self.gauss_bonnet_residual).unwrap();
        writeln!(s, "newton_iterations = {}", self.newton_iterations).unwrap();
        writeln!(s, "stages = {}", self.stages).unwrap();
        writeln!(s, "wall_time_s = {:.6}", self.wall_time_s).unwrap();
        s
    }

    /// CSV header for `k` loops. Wall time is left out so tables are reproducible.
    pub fn csv_header(k: usize) -> String {
        let mut cols = Vec::new();
        for prefix in ["c", "L", "ell"] {
            cols.extend((0..k).map(|i| format!("{prefix}_{i}")));
        }
        cols.extend(["area", "residual_norm", "newton_iterations"].map(String::from));
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut cols: Vec<String> = Vec::new();
        for v in [&self.c, &self.lengths, &self.geodesic_lengths] {
            cols.extend(v.iter().map(|x| x.to_string()));
        }
        cols.push(self.area.to_string());
        cols.push(format!("{:e}", self.residual_norm));
        cols.push(self.newton_iterations.to_string());
        cols.join(",")
    }
}

/// `c_i B_v` on loop vertices, zero inside.
pub(crate) fn boundary_weights(mesh: &TriMesh, bg: &BackgroundMetric, c: &[f64]) -> Vec<f64> {
    (0..mesh.vertex_count())
        .map(|v| mesh.loop_of_vertex(v).map_or(0.0, |i| c[i] * bg.boundary_mass[v]))
        .collect()
}

fn residual_raw(mesh: &TriMesh, bg: &BackgroundMetric, u: &[f64], cb: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; u.len()];
    bg.apply_stiffness(mesh, u, &mut r);
    for v in 0..u.len() {
        let e = u[v].exp();
        r[v] += bg.integrated_curvature[v] + bg.vertex_area[v] * e * e - cb[v] * e;
    }
    r
}

fn energy_raw(mesh: &TriMesh, bg: &BackgroundMetric, u: &[f64], cb: &[f64]) -> Option<f64> {
    if u.iter().any(|&x| !(x <= U_CAP)) {
        return None;
    }
    let mut e = bg.dirichlet_form(mesh, u);
    for v in 0..u.len() {
        let x = u[v].exp();
        e += bg.vertex_area[v] * x * x + 2.0 * bg.integrated_curvature[v] * u[v] - 2.0 * cb[v] * x;
    }
    Some(e)
}

/// Per-vertex residual `R_v(u)`.
pub fn residual(mesh: &TriMesh, bg: &BackgroundMetric, u: &ConformalFactor, c: &CurvatureSpec) -> Vec<f64> {
    residual_raw(mesh, bg, &u.u, &boundary_weights(mesh, bg, c.values()))
}

/// Discrete energy `E(u)`; `None` when some `u_v` exceeds [`U_CAP`].
pub fn energy(mesh: &TriMesh, bg: &BackgroundMetric, u: &ConformalFactor, c: &CurvatureSpec) -> Option<f64> {
    energy_raw(mesh, bg, &u.u, &boundary_weights(mesh, bg, c.values()))
}

/// `L_i = Σ_{v∈Γ_i} B_v e^{u_v}`.
pub fn boundary_length(mesh: &TriMesh, bg: &BackgroundMetric, u: &ConformalFactor, i: usize) -> f64 {
    mesh.loops()[i]
        .iter()
        .map(|&v| bg.boundary_mass[v] * u.u[v].exp())
        .sum()
}

/// `Area = Σ_v A_v e^{2u_v}`.
pub fn area(bg: &BackgroundMetric, u: &ConformalFactor) -> f64 {
    bg.vertex_area.iter().zip(&u.u).map(|(a, x)| a * (2.0 * x).exp()).sum()
}

/// `|−Area + Σ c_i L_i − 2πχ|`, the discrete Gauss–Bonnet defect of `e^{2u}g₀`.
pub(crate) fn gauss_bonnet_defect(
    mesh: &TriMesh,
    bg: &BackgroundMetric,
    u: &ConformalFactor,
    c: &CurvatureSpec,
) -> f64 {
    let cl: f64 = (0..mesh.loop_count())
        .map(|i| c.values()[i] * boundary_length(mesh, bg, u, i))
        .sum();
    (-area(bg, u) + cl - TAU * mesh.euler_characteristic() as f64).abs()
}

/// Newton matrix `H = L + diag(2A e^{2u}) − diag(c B e^u) + shift·diag(A)`.
pub(crate) fn newton_matrix<'p>(
    mesh: &TriMesh,
    bg: &BackgroundMetric,
    profile: &'p Profile,
    u: &[f64],
    cb: &[f64],
    shift: f64,
) -> SymMatrix<'p> {
    let mut h = SymMatrix::zeros(profile);
    let mut diag = vec![0.0; u.len()];
    for (&[a, b], &w) in mesh.edges().iter().zip(&bg.cotan_weights) {
        h.add(a, b, -w);
        diag[a] += w;
        diag[b] += w;
    }
    for v in 0..u.len() {
        let e = u[v].exp();
        diag[v] += 2.0 * bg.vertex_area[v] * e * e - cb[v] * e + shift * bg.vertex_area[v];
    }
    h.add_diagonal(&diag);
    h
}

pub(crate) fn mesh_profile(mesh: &TriMesh) -> Profile {
    Profile::new(mesh.vertex_count(), mesh.edges())
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Newton<'a> {
    mesh: &'a TriMesh,
    bg: &'a BackgroundMetric,
    profile: &'a Profile,
    cfg: &'a SolverConfig,
    shift: f64,
    iterations: usize,
}

impl<'a> Newton<'a> {
    /// Factors the Newton matrix, raising the Levenberg shift until it is
    /// positive definite.
    fn factor(&mut self, u: &[f64], cb: &[f64]) -> Result<Cholesky<'a>, SolverError> {
        loop {
            match newton_matrix(self.mesh, self.bg, self.profile, u, cb, self.shift).factor() {
                Ok(ch) => return Ok(ch),
                Err(e) => {
                    let d = &self.cfg.damping;
                    self.shift = if self.shift == 0.0 {
                        d.initial
                    } else {
                        self.shift * d.growth
                    };
                    if self.shift > d.max {
                        return Err(SolverError::Singular {
                            shift: self.shift,
                            source: e,
                        });
                    }
                }
            }
        }
    }

    /// Damped Newton at fixed `c`, updating `u` in place.
    fn run(&mut self, u: &mut Vec<f64>, c: &[f64], stage: usize) -> Result<(), SolverError> {
        let cb = boundary_weights(self.mesh, self.bg, c);
        let mut history = Vec::new();
        let mut r = residual_raw(self.mesh, self.bg, u, &cb);
        let mut e0 = energy_raw(self.mesh, self.bg, u, &cb).ok_or(SolverError::Diverged { stage })?;
        for iteration in 0..=self.cfg.max_newton {
            let rn = max_abs(&r);
            history.push(rn);
            if rn <= self.cfg.residual_tol {
                return Ok(());
            }
            if iteration == self.cfg.max_newton {
                break;
            }
            self.iterations += 1;
            let chol = self.factor(u, &cb)?;
            let p: Vec<f64> = chol.solve(&r).into_iter().map(|x| -x).collect();
            let slope = 2.0 * r.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>();
            let noise = 1e-12 * (1.0 + e0.abs());

            let mut alpha = 1.0;
            let accepted = loop {
                let trial: Vec<f64> = u.iter().zip(&p).map(|(a, b)| a + alpha * b).collect();
                if let Some(et) = energy_raw(self.mesh, self.bg, &trial, &cb) {
                    let armijo = et <= e0 + 1e-4 * alpha * slope;
                    let rt = residual_raw(self.mesh, self.bg, &trial, &cb);
                    // near convergence E is flat to round-off; judge by the residual
                    let flat = et - e0 <= noise && max_abs(&rt) < rn;
                    if armijo || flat {
                        break Some((trial, rt, et));
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-10 {
                    break None;
                }
            };
            match accepted {
                Some((trial, rt, et)) => {
                    *u = trial;
                    r = rt;
                    e0 = et;
                    let d = &self.cfg.damping;
                    self.shift *= d.shrink;
                    if self.shift < d.initial {
                        self.shift = 0.0;
                    }
                }
                None => {
                    return Err(SolverError::NonConvergence {
                        stage,
                        iteration,
                        history,
                    })
                }
            }
        }
        Err(SolverError::NonConvergence {
            stage,
            iteration: self.cfg.max_newton,
            history,
        })
    }
}

/// Constant `u ≡ t` balancing the Gauss–Bonnet identity:
/// `A₀ e^{2t} − (Σ c_i L_i⁰) e^t + 2πχ = 0`.
pub fn balanced_constant(mesh: &TriMesh, bg: &BackgroundMetric, c: &[f64]) -> f64 {
    let a0 = bg.total_area();
    let s: f64 = (0..mesh.loop_count()).map(|i| c[i] * mesh.loop_length(i)).sum();
    let q = TAU * mesh.euler_characteristic() as f64;
    let x = (s + (s * s - 4.0 * a0 * q).sqrt()) / (2.0 * a0);
    x.ln()
}

/// Solves `R(u) = 0` for the given boundary curvatures.
///
/// Without a warm start the solve continues from `c = 0` in steps of at most
/// `continuation_step` (χ < 0), or starts at the target from the balanced
/// constant (annulus, where `c = 0` has no solution). A warm start is tried
/// directly at the target and falls back to continuation on failure.
pub fn solve_u(
    mesh: &TriMesh,
    bg: &BackgroundMetric,
    c: &CurvatureSpec,
    config: &SolverConfig,
    warm_start: Option<&ConformalFactor>,
) -> Result<(ConformalFactor, SolveReport), SolverError> {
    let start = Instant::now();
    config.validate()?;
    c.check(mesh)?;
    let chi = mesh.euler_characteristic();
    if chi == 0 && c.values().contains(&0.0) {
        return Err(SolverError::InfeasibleTopology {
            chi,
            reason: "on an annulus Gauss–Bonnet forces Σ c_i L_i = Area > 0, so every c_i must be positive".into(),
        });
    }
    let n = mesh.vertex_count();
    if let Some(w) = warm_start {
        if w.u.len() != n || w.u.iter().any(|x| !x.is_finite()) {
            return Err(SolverError::InvalidConfig(
                "warm start has wrong length or non-finite entries".into(),
            ));
        }
    }

    let profile = mesh_profile(mesh);
    let mut newton = Newton {
        mesh,
        bg,
        profile: &profile,
        cfg: config,
        shift: 0.0,
        iterations: 0,
    };
    let target = c.values();

    let mut stages = 0;
    let mut u = Vec::new();
    let mut done = false;
    if let Some(w) = warm_start {
        u = w.u.clone();
        stages = 1;
        done = newton.run(&mut u, target, 0).is_ok();
    }
    if !done {
        if chi == 0 {
            u = vec![balanced_constant(mesh, bg, target); n];
            stages += 1;
            newton.run(&mut u, target, 0)?;
        } else {
            let zero = vec![0.0; target.len()];
            u = vec![balanced_constant(mesh, bg, &zero); n];
            newton.run(&mut u, &zero, 0)?;
            let span = max_abs(target);
            let count = (span / config.continuation_step - 1e-9).ceil().max(0.0) as usize;
            for s in 1..=count {
                let t = s as f64 / count as f64;
                let cs: Vec<f64> = target.iter().map(|x| x * t).collect();
                newton.run(&mut u, &cs, s)?;
            }
            stages += count + 1;
        }
    }

    let factor = ConformalFactor { u };
    if factor.max() >= U_CAP {
        return Err(SolverError::Diverged { stage: stages });
    }
    let cb = boundary_weights(mesh, bg, target);
    let r = residual_raw(mesh, bg, &factor.u, &cb);
    let lengths: Vec<f64> = (0..mesh.loop_count())
        .map(|i| boundary_length(mesh, bg, &factor, i))
        .collect();
    let geodesic_lengths = lengths
        .iter()
        .zip(target)
        .map(|(l, ci)| l * ((1.0 - ci) * (1.0 + ci)).sqrt())
        .collect();
    let report = SolveReport {
        c: target.to_vec(),
        lengths,
        geodesic_lengths,
        area: area(bg, &factor),
        residual_norm: max_abs(&r),
        gauss_bonnet_residual: gauss_bonnet_defect(mesh, bg, &factor, c),
        newton_iterations: newton.iterations,
        stages,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((factor, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collar::cylinder_solution;
    use crate::mesh::{build_background, generate_flat_annulus, generate_pants_domain};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn annulus(n: usize) -> (TriMesh, BackgroundMetric) {
        let m = generate_flat_annulus(PI, n, n).unwrap();
        let bg = build_background(&m).unwrap();
        (m, bg)
    }

    fn pants() -> (TriMesh, BackgroundMetric) {
        let m = generate_pants_domain(3.0, 0.8, 1.4, 40).unwrap();
        let bg = build_background(&m).unwrap();
        (m, bg)
    }

    fn axial(m: &TriMesh) -> Vec<f64> {
        m.positions().unwrap().coords.iter().map(|p| p[0]).collect()
    }

    #[test]
    fn curvature_window() {
        assert!(CurvatureSpec::new(vec![0.0, 0.99]).is_ok());
        assert!(matches!(
            CurvatureSpec::new(vec![0.5, 1.0]),
            Err(SolverError::InvalidCurvature { index: 1, .. })
        ));
        assert!(CurvatureSpec::new(vec![-0.1]).is_err());
        assert!(serde_json::from_str::<CurvatureSpec>("[1.2, 0.5]").is_err());
    }

    #[test]
    fn flat_metric_residual_is_area() {
        let (m, bg) = annulus(6);
        let c = CurvatureSpec::uniform(2, 0.0).unwrap();
        let r = residual(&m, &bg, &ConformalFactor::zeros(m.vertex_count()), &c);
        for (rv, a) in r.iter().zip(&bg.vertex_area) {
            assert!((rv - a).abs() < 1e-14);
        }
    }

    #[test]
    fn residual_sum_identity() {
        let (m, bg) = pants();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = ConformalFactor {
            u: (0..m.vertex_count()).map(|_| rng.gen_range(-0.5..0.5)).collect(),
        };
        let c = CurvatureSpec::new(vec![0.2, 0.4, 0.7]).unwrap();
        let sum: f64 = residual(&m, &bg, &u, &c).iter().sum();
        let cl: f64 = (0..3).map(|i| c.values()[i] * boundary_length(&m, &bg, &u, i)).sum();
        let expect = -TAU + area(&bg, &u) - cl;
        assert!((sum - expect).abs() < 1e-10, "{sum} vs {expect}");
    }

    #[test]
    fn homothety() {
        let (m, bg) = pants();
        let n = m.vertex_count();
        let t = 0.3;
        let u = ConformalFactor::constant(n, t);
        let z = ConformalFactor::zeros(n);
        assert!((area(&bg, &z) - bg.total_area()).abs() < 1e-12);
        for i in 0..3 {
            assert!((boundary_length(&m, &bg, &z, i) - m.loop_length(i)).abs() < 1e-12);
            let ratio = boundary_length(&m, &bg, &u, i) / boundary_length(&m, &bg, &z, i);
            assert!((ratio - t.exp()).abs() < 1e-13);
        }
        assert!((area(&bg, &u) / area(&bg, &z) - (2.0 * t).exp()).abs() < 1e-13);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (m, bg) = pants();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = CurvatureSpec::new(vec![0.3, 0.6, 0.1]).unwrap();
        let u: Vec<f64> = (0..m.vertex_count()).map(|_| rng.gen_range(-0.4..0.4)).collect();
        let cb = boundary_weights(&m, &bg, c.values());
        let r = residual_raw(&m, &bg, &u, &cb);
        let h = 1e-5;
        for _ in 0..40 {
            let v = rng.gen_range(0..u.len());
            let mut up = u.clone();
            let mut um = u.clone();
            up[v] += h;
            um[v] -= h;
            let g = (energy_raw(&m, &bg, &up, &cb).unwrap() - energy_raw(&m, &bg, &um, &cb).unwrap()) / (2.0 * h);
            assert!(
                (g - 2.0 * r[v]).abs() <= 1e-6 * (1.0 + r[v].abs()),
                "v={v}: {g} vs {}",
                2.0 * r[v]
            );
        }
    }

    #[test]
    fn energy_convex_for_zero_curvature() {
        let (m, bg) = pants();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cb = vec![0.0; m.vertex_count()];
        for _ in 0..20 {
            let a: Vec<f64> = (0..m.vertex_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..m.vertex_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let ea = energy_raw(&m, &bg, &a, &cb).unwrap();
            let eb = energy_raw(&m, &bg, &b, &cb).unwrap();
            let em = energy_raw(&m, &bg, &mid, &cb).unwrap();
            assert!(em < 0.5 * (ea + eb));
        }
    }

    #[test]
    fn energy_capped() {
        let (m, bg) = annulus(4);
        let mut u = ConformalFactor::zeros(m.vertex_count());
        u.u[3] = 60.0;
        assert!(energy(&m, &bg, &u, &CurvatureSpec::uniform(2, 0.5).unwrap()).is_none());
    }

    #[test]
    fn cylinder_residual_is_second_order() {
        let cyl = cylinder_solution(PI, 0.5).unwrap();
        let c = CurvatureSpec::uniform(2, 0.5).unwrap();
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let (m, bg) = annulus(n);
            let u = ConformalFactor {
                u: axial(&m).iter().map(|&s| cyl.u(s)).collect(),
            };
            errs.push(max_abs(&residual(&m, &bg, &u, &c)));
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 1.8, "{errs:?}");
        }
    }

    #[test]
    fn annulus_matches_cylinder() {
        let (m, bg) = annulus(32);
        let c = CurvatureSpec::uniform(2, 0.5).unwrap();
        let (u, rep) = solve_u(&m, &bg, &c, &SolverConfig::default(), None).unwrap();
        let cyl = cylinder_solution(PI, 0.5).unwrap();
        let err = axial(&m)
            .iter()
            .zip(&u.u)
            .map(|(&s, x)| (x - cyl.u(s)).abs())
            .fold(0.0, f64::max);
        assert!(err < 5e-3, "{err}");
        assert!((rep.lengths[0] - rep.lengths[1]).abs() < 1e-10);
        assert!(rep.residual_norm <= 1e-10);
        assert!(rep.gauss_bonnet_residual <= m.vertex_count() as f64 * 1e-10);
    }

    #[test]
    fn zero_curvature_annulus_is_infeasible() {
        let (m, bg) = annulus(8);
        let c = CurvatureSpec::new(vec![0.0, 0.5]).unwrap();
        assert!(matches!(
            solve_u(&m, &bg, &c, &SolverConfig::default(), None),
            Err(SolverError::InfeasibleTopology { chi: 0, .. })
        ));
    }

    #[test]
    fn loop_count_checked() {
        let (m, bg) = annulus(8);
        let c = CurvatureSpec::uniform(3, 0.5).unwrap();
        assert!(matches!(
            solve_u(&m, &bg, &c, &SolverConfig::default(), None),
            Err(SolverError::LoopCountMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn pants_solve_and_gauss_bonnet() {
        let (m, bg) = pants();
        let c = CurvatureSpec::uniform(3, 0.3).unwrap();
        let (u, rep) = solve_u(&m, &bg, &c, &SolverConfig::default(), None).unwrap();
        assert_eq!(rep.stages, 4);
        let cl: f64 = rep.lengths.iter().map(|l| 0.3 * l).sum();
        assert!((-rep.area + cl + TAU).abs() < 1e-8);
        assert!(gauss_bonnet_defect(&m, &bg, &u, &c) < 1e-8);
    }

    #[test]
    fn conformal_covariance() {
        let (m, bg) = pants();
        let c = CurvatureSpec::new(vec![0.2, 0.4, 0.3]).unwrap();
        let cfg = SolverConfig {
            residual_tol: 1e-12,
            ..SolverConfig::default()
        };
        let (u, rep) = solve_u(&m, &bg, &c, &cfg, None).unwrap();
        let phi: f64 = 0.7;
        let ms = m.scaled(phi.exp());
        let bgs = build_background(&ms).unwrap();
        let warm = ConformalFactor {
            u: u.u.iter().map(|x| x - phi).collect(),
        };
        let (_, rep2) = solve_u(&ms, &bgs, &c, &cfg, Some(&warm)).unwrap();
        assert_eq!(rep2.stages, 1);
        for i in 0..3 {
            assert!((rep.lengths[i] - rep2.lengths[i]).abs() < 1e-9);
        }
        assert!((rep.area - rep2.area).abs() < 1e-9);
    }

    #[test]
    fn warm_starts_agree() {
        let (m, bg) = pants();
        let c = CurvatureSpec::new(vec![0.5, 0.2, 0.4]).unwrap();
        let cfg = SolverConfig {
            residual_tol: 1e-12,
            ..SolverConfig::default()
        };
        let (u1, _) = solve_u(&m, &bg, &c, &cfg, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = ConformalFactor {
            u: u1.u.iter().map(|x| x + rng.gen_range(-0.3..0.3)).collect(),
        };
        let (u2, _) = solve_u(&m, &bg, &c, &cfg, Some(&w)).unwrap();
        let diff = u1.u.iter().zip(&u2.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-8, "{diff}");
    }

    #[test]
    fn report_serialisation() {
        let (m, bg) = annulus(8);
        let c = CurvatureSpec::uniform(2, 0.5).unwrap();
        let (_, rep) = solve_u(&m, &bg, &c, &SolverConfig::default(), None).unwrap();
        let kv = rep.to_key_value();
        assert!(kv.contains("boundary_lengths = "));
        assert!(kv.contains("wall_time_s"));
        let header = SolveReport::csv_header(2);
        assert_eq!(
            header,
            "c_0,c_1,L_0,L_1,ell_0,ell_1,area,residual_norm,newton_iterations"
        );
        assert_eq!(rep.csv_row().split(',').count(), header.split(',').count());
        assert!(!rep.csv_row().contains(&rep.wall_time_s.to_string()) || rep.wall_time_s == 0.0);
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig {
            continuation_step: 1.5,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            residual_tol: 0.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
