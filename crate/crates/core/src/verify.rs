//! Cross-checks of the numerical solutions against exact identities, collar
//! formulas, degeneration sweeps and the conformal modulus of annular regions.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collar::{
    self, boundary_offset, collar_halfwidth, flat_cylinder_trace_check, halfcollar_area, halfcollar_area_quadrature,
    horizontal_variation_derivative, trace_inequality_check, xbar_d, CollarError, RadialPolynomial,
};
use crate::linalg::{LinalgError, Profile, SymMatrix};
use crate::mesh::{
    build_background, generate_flat_annulus, generate_pants_domain_with, BackgroundMetric, MeshError, PantsParams,
    TriMesh,
};
use crate::solver::{self, ConformalFactor, CurvatureSpec, SolveReport};
use crate::tuner::{tune_d, MomentumTarget, TunerConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("the conformal modulus needs at least two boundary loops, mesh has {0}")]
    SingleBoundary(usize),
    #[error("loop index {index} out of range ({loops} loops)")]
    LoopIndex { index: usize, loops: usize },
    #[error("harmonic problem is not positive definite: {0}")]
    Linear(#[from] LinalgError),
    #[error("loop {index}: boundary length {length} does not exceed d = {d}")]
    IdentityViolation { index: usize, length: f64, d: f64 },
    #[error(transparent)]
    Collar(#[from] CollarError),
    #[error("{count} trace inequality case(s) violated; worst slack {worst:e}")]
    TraceViolation { count: usize, worst: f64 },
}

/// `|−Area + Σ c_i L_i − 2πχ|`. At a converged solve it equals `|Σ_v R_v|`.
pub fn gauss_bonnet_residual(mesh: &TriMesh, bg: &BackgroundMetric, u: &ConformalFactor, c: &CurvatureSpec) -> f64 {
    solver::gauss_bonnet_defect(mesh, bg, u, c)
}

/// Collar data of one boundary loop derived from a solve with momentum `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MdRow {
    pub index: usize,
    pub boundary_length: f64,
    /// |c_i L_i − d|
    pub momentum_defect: f64,
    /// ℓ_i = sqrt(L_i² − d²)
    pub ell: f64,
    /// Y(ℓ_i, c_i)
    pub offset: f64,
    /// X̄_d(ℓ_i), zero when d = 0
    pub xbar: f64,
}

impl MdRow {
    /// `Y(ℓ, c) − X̄_d(ℓ)`.
    pub fn consistency(&self) -> f64 {
        self.offset - self.xbar
    }
}

/// Per-loop identities of a solve targeting momentum `d` (`d = 0` for a
/// geodesic-boundary solve).
pub fn md_identities(report: &SolveReport, d: f64) -> Result<Vec<MdRow>, VerifyError> {
    report
        .lengths
        .iter()
        .zip(&report.c)
        .enumerate()
        .map(|(index, (&length, &c))| {
            if d > 0.0 && length <= d {
                return Err(VerifyError::IdentityViolation { index, length, d });
            }
            let ell = collar::geodesic_from_boundary(length, d)?;
            let (offset, xbar) = if d > 0.0 {
                (boundary_offset(ell, c.min(collar::MAX_CURVATURE))?, xbar_d(ell, d)?)
            } else {
                (0.0, 0.0)
            };
            Ok(MdRow {
                index,
                boundary_length: length,
                momentum_defect: (c * length - d).abs(),
                ell,
                offset,
                xbar,
            })
        })
        .collect()
}

/// Conformal modulus of the annular region between loop `index` and the rest
/// of the boundary: `Z = π / E(h)` for the discrete harmonic `h` equal to 1 on
/// the loop and 0 on all other loops, `E(h) = ½ hᵀ L h`.
pub fn conformal_modulus(mesh: &TriMesh, bg: &BackgroundMetric, index: usize) -> Result<f64, VerifyError> {
    let k = mesh.loop_count();
    if k < 2 {
        return Err(VerifyError::SingleBoundary(k));
    }
    if index >= k {
        return Err(VerifyError::LoopIndex { index, loops: k });
    }
    let n = mesh.vertex_count();
    let fixed: Vec<Option<f64>> = (0..n)
        .map(|v| mesh.loop_of_vertex(v).map(|i| if i == index { 1.0 } else { 0.0 }))
        .collect();
    let profile = Profile::new(n, mesh.edges());
    let mut a = SymMatrix::zeros(&profile);
    let mut diag = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for (&[p, q], &w) in mesh.edges().iter().zip(&bg.cotan_weights) {
        diag[p] += w;
        diag[q] += w;
        match (fixed[p], fixed[q]) {
            (None, None) => a.add(p, q, -w),
            (None, Some(h)) => rhs[p] += w * h,
            (Some(h), None) => rhs[q] += w * h,
            (Some(_), Some(_)) => {}
        }
    }
    for v in 0..n {
        if let Some(h) = fixed[v] {
            diag[v] = 1.0;
            rhs[v] = h;
        }
    }
    a.add_diagonal(&diag);
    let h = a.factor()?.solve(&rhs);
    let energy = 0.5 * bg.dirichlet_form(mesh, &h);
    Ok(PI / energy)
}

/// A monotone family of conformal structures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepFamily {
    /// Flat cylinders `[0, T] × S¹` with `n_theta` angular cells and square-ish
    /// cells axially (`n_s = ⌈T n_theta / 2π⌉`, rounded up to even).
    Annulus { moduli: Vec<f64>, n_theta: usize },
    /// Pants domains whose first hole radius runs through `radii`.
    PantsPinch { base: PantsParams, radii: Vec<f64> },
}

impl SweepFamily {
    pub fn parameters(&self) -> &[f64] {
        match self {
            Self::Annulus { moduli, .. } => moduli,
            Self::PantsPinch { radii, .. } => radii,
        }
    }

    fn parameter_name(&self) -> &'static str {
        match self {
            Self::Annulus { .. } => "T",
            Self::PantsPinch { .. } => "hole_radius",
        }
    }

    fn loop_count(&self) -> usize {
        match self {
            Self::Annulus { .. } => 2,
            Self::PantsPinch { .. } => 3,
        }
    }

    pub fn member(&self, i: usize) -> Result<TriMesh, MeshError> {
        match self {
            Self::Annulus { moduli, n_theta } => {
                let t = moduli[i];
                let n_s = ((t * *n_theta as f64 / TAU).ceil() as usize).max(2);
                generate_flat_annulus(t, n_s + n_s % 2, *n_theta)
            }
            Self::PantsPinch { base, radii } => {
                let mut p = *base;
                p.hole_radii[0] = radii[i];
                generate_pants_domain_with(&p)
            }
        }
    }
}

/// Boundary condition imposed along a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// `c_i L_i = d` on every loop.
    Momentum(MomentumTarget),
    /// `c ≡ 0`: geodesic boundary.
    Geodesic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMember {
    pub c: Vec<f64>,
    pub lengths: Vec<f64>,
    /// ℓ_i = sqrt(L_i² − d²)
    pub ell: Vec<f64>,
    /// X(ℓ_i)
    pub collar_halfwidth: Vec<f64>,
    /// X̄_d(ℓ_i), zero for geodesic boundary
    pub xbar: Vec<f64>,
    pub area: f64,
    /// −2πχ + k·d
    pub area_expected: f64,
    pub outer_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: f64,
    pub outcome: Result<SweepMember, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub parameter_name: String,
    pub loops: usize,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Header row followed by one row per family member. Failed members keep
    /// their row with the error in `status` and empty numeric fields.
    pub fn to_csv(&self) -> String {
        let k = self.loops;
        let mut cols = vec![self.parameter_name.clone(), "status".into()];
        for prefix in ["c", "L", "ell", "X", "Xbar"] {
            cols.extend((0..k).map(|i| format!("{prefix}_{i}")));
        }
        cols.extend(["area", "area_expected", "outer_iterations"].map(String::from));
        let width = cols.len();
        let mut s = cols.join(",");
        s.push('\n');
        for row in &self.rows {
            write!(s, "{}", row.parameter).unwrap();
            match &row.outcome {
                Ok(m) => {
                    s.push_str(",ok");
                    for v in [&m.c, &m.lengths, &m.ell, &m.collar_halfwidth, &m.xbar] {
                        for x in v {
                            write!(s, ",{x}").unwrap();
                        }
                    }
                    writeln!(s, ",{},{},{}", m.area, m.area_expected, m.outer_iterations).unwrap();
                }
                Err(e) => {
                    let msg = e.replace([',', '\n'], ";");
                    write!(s, ",failed: {msg}").unwrap();
                    s.push_str(&",".repeat(width - 2));
                    s.push('\n');
                }
            }
        }
        s
    }

    pub fn successes(&self) -> impl Iterator<Item = (f64, &SweepMember)> {
        self.rows
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok().map(|m| (r.parameter, m)))
    }
}

fn sweep_member(family: &SweepFamily, i: usize, mode: SweepMode, config: &TunerConfig) -> Result<SweepMember, String> {
    let mesh = family.member(i).map_err(|e| e.to_string())?;
    let bg = build_background(&mesh).map_err(|e| e.to_string())?;
    let k = mesh.loop_count();
    let chi = mesh.euler_characteristic() as f64;
    let (report, d, outer) = match mode {
        SweepMode::Momentum(d) => {
            let r = tune_d(&mesh, &bg, d, config, None).map_err(|e| e.to_string())?;
            let outer = r.outer_iterations();
            (r.report, d.value(), outer)
        }
        SweepMode::Geodesic => {
            let c = CurvatureSpec::uniform(k, 0.0).map_err(|e| e.to_string())?;
            let (_, rep) = solver::solve_u(&mesh, &bg, &c, &config.solver, None).map_err(|e| e.to_string())?;
            (rep, 0.0, 0)
        }
    };
    let rows = md_identities(&report, d).map_err(|e| e.to_string())?;
    let ell: Vec<f64> = rows.iter().map(|r| r.ell).collect();
    let collar_halfwidth = ell
        .iter()
        .map(|&l| collar_halfwidth(l).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    Ok(SweepMember {
        c: report.c.clone(),
        lengths: report.lengths.clone(),
        ell,
        collar_halfwidth,
        xbar: rows.iter().map(|r| r.xbar).collect(),
        area: report.area,
        area_expected: -TAU * chi + k as f64 * d,
        outer_iterations: outer,
    })
}

/// Runs every member of the family (in parallel on the current rayon pool)
/// and collects one row per member in family order.
pub fn degeneration_sweep(family: &SweepFamily, mode: SweepMode, config: &TunerConfig) -> SweepTable {
    let rows = (0..family.parameters().len())
        .into_par_iter()
        .map(|i| SweepRow {
            parameter: family.parameters()[i],
            outcome: sweep_member(family, i, mode, config),
        })
        .collect();
    SweepTable {
        parameter_name: family.parameter_name().into(),
        loops: family.loop_count(),
        rows,
    }
}

/// Worst-case results of the randomized trace-inequality suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub cases: usize,
    /// min over cases of (rhs − lhs) / (1 + rhs) for the half-collar inequality
    pub worst_halfcollar_slack: f64,
    /// same for the flat-cylinder inequality
    pub worst_cylinder_slack: f64,
    /// max |rhs − lhs| for constant w on half-collars (equality case)
    pub constant_equality_defect: f64,
    /// max |slack − exact slack| for linear w on flat cylinders
    pub linear_profile_defect: f64,
    /// slack of the constant-w flat-cylinder case (equality)
    pub cylinder_constant_defect: f64,
}

/// Tolerance below zero tolerated for relative slacks (quadrature error).
pub const TRACE_SLACK_TOL: f64 = 1e-10;

fn random_profile(rng: &mut ChaCha8Rng, span: f64) -> RadialPolynomial {
    let degree = rng.gen_range(0..=3);
    // coefficients scaled so that each monomial is O(1) on [0, span]
    let coeffs = (0..=degree).map(|j| rng.gen_range(-1.0..1.0) / span.powi(j)).collect();
    RadialPolynomial::new(coeffs)
}

/// Randomized check of both trace inequalities (`samples` cases each) plus
/// their equality cases.
pub fn trace_suite(samples: usize, seed: u64) -> Result<TraceReport, VerifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_half = f64::INFINITY;
    let mut worst_cyl = f64::INFINITY;
    let mut eq_defect: f64 = 0.0;
    let mut lin_defect: f64 = 0.0;
    let mut cyl_const: f64 = 0.0;
    let mut violations = 0;
    for _ in 0..samples {
        let ell = rng.gen_range(0.05..8.0);
        let c = rng.gen_range(0.01..0.99);
        let y = boundary_offset(ell, c)?;
        let w = random_profile(&mut rng, y);
        let t = trace_inequality_check(ell, c, &w)?;
        let rel = t.slack() / (1.0 + t.rhs.abs());
        worst_half = worst_half.min(rel);
        violations += usize::from(rel < -TRACE_SLACK_TOL);

        let a = rng.gen_range(-2.0..2.0);
        let t = trace_inequality_check(ell, c, &RadialPolynomial::constant(a))?;
        eq_defect = eq_defect.max((t.rhs - t.lhs).abs());

        let x = rng.gen_range(0.1..10.0);
        let w = random_profile(&mut rng, x);
        let t = flat_cylinder_trace_check(x, &w)?;
        let rel = t.slack() / (1.0 + t.rhs.abs());
        worst_cyl = worst_cyl.min(rel);
        violations += usize::from(rel < -TRACE_SLACK_TOL);

        // linear w = a + b s without a sign change on [0, X]: |w| = |a| + sb·s
        // with sb = b·sgn(a), so the slack is exactly 2π(|b| X + sb X / 2)
        let a: f64 = rng.gen_range(0.5..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let b = rng.gen_range(-0.99..0.99) * a.abs() / x;
        let t = flat_cylinder_trace_check(x, &RadialPolynomial::new(vec![a, b]))?;
        let sb = b * a.signum();
        let exact = TAU * (sb.abs() * x + 0.5 * sb * x);
        lin_defect = lin_defect.max((t.slack() - exact).abs());
        let t = flat_cylinder_trace_check(x, &RadialPolynomial::constant(a))?;
        cyl_const = cyl_const.max(t.slack().abs());
    }
    let report = TraceReport {
        cases: samples,
        worst_halfcollar_slack: worst_half,
        worst_cylinder_slack: worst_cyl,
        constant_equality_defect: eq_defect,
        linear_profile_defect: lin_defect,
        cylinder_constant_defect: cyl_const,
    };
    if violations > 0 {
        return Err(VerifyError::TraceViolation {
            count: violations,
            worst: worst_half.min(worst_cyl),
        });
    }
    Ok(report)
}

/// Worst-case defects of the closed-form collar identities over random samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollarIdentityReport {
    pub samples: usize,
    /// max |closed-form half-collar area − quadrature|
    pub area_defect: f64,
    /// max |Y(ℓ, c) − X̄_d(ℓ)| with d = cℓ/sqrt(1 − c²)
    pub offset_defect: f64,
    /// max |L² − ℓ² − d²| / L²
    pub length_identity_defect: f64,
    /// range of X(ℓ)·ℓ·e^{ℓ/2} over ℓ ∈ [10, 40]
    pub halfwidth_scaled_min: f64,
    pub halfwidth_scaled_max: f64,
    /// max |d/dt (L(Γ_s)² − L(γ)²)| over random holomorphic variations
    pub horizontal_derivative: f64,
}

pub fn collar_identities(samples: usize, seed: u64) -> Result<CollarIdentityReport, VerifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut area_defect: f64 = 0.0;
    let mut offset_defect: f64 = 0.0;
    let mut length_defect: f64 = 0.0;
    let mut horizontal: f64 = 0.0;
    for _ in 0..samples {
        let ell = rng.gen_range(0.05..8.0);
        let c = rng.gen_range(0.0..0.99);
        let exact = halfcollar_area(ell, c)?;
        let quad = halfcollar_area_quadrature(ell, c)?;
        area_defect = area_defect.max((exact - quad).abs());

        let c = rng.gen_range(0.01..0.99);
        let g = collar::CollarGeometry::from_geodesic(ell, c)?;
        offset_defect = offset_defect.max((boundary_offset(ell, c)? - xbar_d(ell, g.d)?).abs());
        length_defect = length_defect.max(g.length_identity_defect().abs() / g.boundary_length.powi(2));

        let terms = rng.gen_range(1..=6);
        let coeffs: Vec<(i32, Complex64)> = (0..terms)
            .map(|_| {
                let j = rng.gen_range(-8..=8);
                (j, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            })
            .collect();
        // keep e^{js} moderate inside the collar
        let bound = (PI * PI / ell).min(1.0);
        let s = rng.gen_range(-0.99..0.99) * bound;
        horizontal = horizontal.max(horizontal_variation_derivative(ell, s, &coeffs)?.abs());
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..=300 {
        let ell = 10.0 + 30.0 * i as f64 / 300.0;
        let v = collar_halfwidth(ell)? * ell * (0.5 * ell).exp();
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok(CollarIdentityReport {
        samples,
        area_defect,
        offset_defect,
        length_identity_defect: length_defect,
        halfwidth_scaled_min: lo,
        halfwidth_scaled_max: hi,
        horizontal_derivative: horizontal,
    })
}
