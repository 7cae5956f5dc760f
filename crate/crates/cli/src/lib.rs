//! Command-line driver: mesh generation, solves, momentum tuning, sweeps,
//! conformal moduli and the verification suite.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use uniformize_core::mesh::{
    build_background, generate_flat_annulus, generate_pants_domain_with, read_mesh, write_mesh, BackgroundMetric,
    MeshError, PantsParams, TriMesh, DEFAULT_PANTS,
};
use uniformize_core::solver::{solve_u, CurvatureSpec, SolveReport, SolverConfig, SolverError};
use uniformize_core::tuner::{tune_d, MomentumTarget, TunerConfig, TunerError};
use uniformize_core::verify::{
    collar_identities, conformal_modulus, degeneration_sweep, gauss_bonnet_residual, md_identities, trace_suite,
    SweepFamily, SweepMode, SweepTable, VerifyError,
};

/// Environment variable overriding the sweep thread count.
pub const THREADS_ENV: &str = "UNIFORMIZE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "uniformize",
    version,
    about = "Hyperbolic metrics with constant-curvature boundary on triangle meshes"
)]
pub struct Cli {
    /// Run the configuration stored in this JSON file instead of a subcommand.
    #[arg(long, global = true, value_name = "FILE")]
    pub json_config: Option<PathBuf>,
    /// Write the configuration of this run as JSON before running it.
    #[arg(long, global = true, value_name = "FILE")]
    pub dump_config: Option<PathBuf>,
    /// Seed for randomized suites.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Option<Command>,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Generate a test mesh.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Solve for the metric with prescribed boundary curvatures.
    Solve(SolveArgs),
    /// Find boundary curvatures with c_i·L_i = d on every loop.
    Tune(TuneArgs),
    /// Run a degeneration family.
    #[command(subcommand)]
    Sweep(SweepCommand),
    /// Conformal modulus between one boundary loop and the others.
    Modulus(ModulusArgs),
    /// Run the identity and inequality suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenCommand {
    /// Flat cylinder [0, T] × S¹.
    Annulus {
        #[arg(long = "T")]
        t: f64,
        #[arg(long, default_value_t = 64)]
        ns: usize,
        #[arg(long, default_value_t = 64)]
        nth: usize,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Disk of radius R minus two disks of radius r at ±a.
    Pants {
        #[command(flatten)]
        #[serde(flatten)]
        params: PantsArgs,
        #[arg(short, long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Args, Serialize, Deserialize)]
pub struct PantsArgs {
    #[arg(long = "R", default_value_t = DEFAULT_PANTS.0)]
    pub outer_radius: f64,
    #[arg(long = "r", default_value_t = DEFAULT_PANTS.1)]
    pub hole_radius: f64,
    #[arg(long = "a", default_value_t = DEFAULT_PANTS.2)]
    pub hole_offset: f64,
    #[arg(long = "n", default_value_t = DEFAULT_PANTS.3)]
    pub resolution: usize,
}

impl PantsArgs {
    fn params(&self) -> PantsParams {
        PantsParams {
            outer_radius: self.outer_radius,
            hole_radii: [self.hole_radius; 2],
            hole_offset: self.hole_offset,
            resolution: self.resolution,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Args, Serialize, Deserialize)]
pub struct SolverArgs {
    /// Convergence threshold on max |R_v|.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 50)]
    pub max_newton: usize,
    /// Largest change of c between continuation stages.
    #[arg(long, default_value_t = 0.1)]
    pub step: f64,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            residual_tol: self.tol,
            max_newton: self.max_newton,
            continuation_step: self.step,
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Args, Serialize, Deserialize)]
pub struct TunerArgs {
    /// Relative tolerance on |c_i L_i − d| / d.
    #[arg(long, default_value_t = 1e-8)]
    pub outer_tol: f64,
    #[arg(long, default_value_t = 30)]
    pub max_outer: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
}

impl TunerArgs {
    fn config(&self) -> TunerConfig {
        TunerConfig {
            tol: self.outer_tol,
            max_outer: self.max_outer,
            solver: self.solver.config(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SolveArgs {
    pub mesh: PathBuf,
    /// Boundary curvatures, one per loop, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub c: Vec<f64>,
    /// Directory for report.txt, report.csv and u.csv.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TuneArgs {
    pub mesh: PathBuf,
    #[arg(long)]
    pub d: f64,
    /// Directory for history.csv, identities.csv, report.txt, report.csv and u.csv.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub tuner: TunerArgs,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepCommand {
    /// Flat cylinders of increasing modulus.
    Annulus {
        #[arg(long = "T", value_delimiter = ',', required = true)]
        t: Vec<f64>,
        /// Angular cells; axial cells follow T.
        #[arg(long, default_value_t = 64)]
        nth: usize,
        #[command(flatten)]
        #[serde(flatten)]
        common: SweepArgs,
    },
    /// Pants domains with a shrinking first hole.
    Pants {
        #[arg(long, value_delimiter = ',', required = true)]
        radii: Vec<f64>,
        #[command(flatten)]
        #[serde(flatten)]
        params: PantsArgs,
        #[command(flatten)]
        #[serde(flatten)]
        common: SweepArgs,
    },
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    /// Boundary momentum.
    #[arg(long, required_unless_present = "type_i")]
    pub d: Option<f64>,
    /// Geodesic boundary (c ≡ 0) instead of a momentum target.
    #[arg(long)]
    pub type_i: bool,
    /// CSV destination (stdout when omitted).
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub tuner: TunerArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ModulusArgs {
    pub mesh: PathBuf,
    #[arg(long = "loop", default_value_t = 0)]
    pub loop_index: usize,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct VerifyArgs {
    /// Randomized cases per suite.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    /// Angular resolution of the annulus used for mesh checks.
    #[arg(long, default_value_t = 32)]
    pub nth: usize,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

/// Failure classes with their exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad input: exit 2.
    Validation(String),
    /// Non-convergence or an infeasible problem: exit 3.
    Numerical(String),
    /// A verification check failed: exit 1.
    Check(String),
    /// File system or serialization failure: exit 1.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::Numerical(_) => 3,
            Self::Check(_) | Self::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Validation(m) => write!(f, "invalid input: {m}"),
            Self::Numerical(m) => write!(f, "numerical failure: {m}"),
            Self::Check(m) => write!(f, "verification failed: {m}"),
            Self::Io(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        match e {
            MeshError::Io(e) => Self::Io(e.to_string()),
            other => Self::Validation(other.to_string()),
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::InvalidCurvature { .. }
            | SolverError::LoopCountMismatch { .. }
            | SolverError::InvalidConfig(_) => Self::Validation(e.to_string()),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

impl From<TunerError> for CliError {
    fn from(e: TunerError) -> Self {
        match e {
            TunerError::Solver(s) => s.into(),
            TunerError::InvalidMomentum(_) | TunerError::LoopCountMismatch { .. } => Self::Validation(e.to_string()),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::SingleBoundary(_) | VerifyError::LoopIndex { .. } => Self::Validation(e.to_string()),
            VerifyError::Linear(_) => Self::Numerical(e.to_string()),
            _ => Self::Check(e.to_string()),
        }
    }
}

/// Resolves the command line into a run configuration. `--json-config`
/// replaces the subcommand and seed.
pub fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    match (&cli.json_config, &cli.command) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
        }
        (None, Some(cmd)) => Ok(RunConfig {
            seed: cli.seed,
            command: cmd.clone(),
        }),
        (None, None) => Err(CliError::Validation("a subcommand or --json-config is required".into())),
    }
}

pub fn dump_config(cfg: &RunConfig, path: &Path) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(cfg).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Executes one run. Data go to `out` (or to files named in the config),
/// human-readable summaries to `log`.
pub fn run(cfg: &RunConfig, out: &mut dyn Write, log: &mut dyn Write) -> Result<(), CliError> {
    match &cfg.command {
        Command::Gen(g) => cmd_gen(g, log),
        Command::Solve(a) => cmd_solve(a, out, log),
        Command::Tune(a) => cmd_tune(a, out, log),
        Command::Sweep(s) => cmd_sweep(s, out, log),
        Command::Modulus(a) => cmd_modulus(a, out, log),
        Command::Verify(a) => cmd_verify(a, cfg.seed, out, log),
    }
}

fn emit(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => out.write_all(text.as_bytes()).map_err(CliError::from),
    }
}

fn load(path: &Path) -> Result<(TriMesh, BackgroundMetric), CliError> {
    let mesh = read_mesh(path).map_err(|e| match e {
        MeshError::Io(io) => CliError::Io(format!("{}: {io}", path.display())),
        other => CliError::Validation(format!("{}: {other}", path.display())),
    })?;
    let bg = build_background(&mesh)?;
    Ok((mesh, bg))
}

fn mesh_summary(m: &TriMesh) -> String {
    format!(
        "chi = {}, loops = {}, V = {}, E = {}, F = {}",
        m.euler_characteristic(),
        m.loop_count(),
        m.vertex_count(),
        m.edge_count(),
        m.face_count()
    )
}

fn cmd_gen(g: &GenCommand, log: &mut dyn Write) -> Result<(), CliError> {
    let (mesh, out) = match g {
        GenCommand::Annulus { t, ns, nth, out } => (generate_flat_annulus(*t, *ns, *nth)?, out),
        GenCommand::Pants { params, out } => (generate_pants_domain_with(&params.params())?, out),
    };
    write_mesh(&mesh, out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    writeln!(log, "wrote {}: {}", out.display(), mesh_summary(&mesh))?;
    Ok(())
}

fn vertex_csv(u: &[f64]) -> String {
    let mut s = String::from("vertex,u\n");
    for (v, x) in u.iter().enumerate() {
        writeln!(s, "{v},{x}").unwrap();
    }
    s
}

fn report_csv(rep: &SolveReport) -> String {
    format!("{}\n{}\n", SolveReport::csv_header(rep.c.len()), rep.csv_row())
}

fn cmd_solve(a: &SolveArgs, out: &mut dyn Write, log: &mut dyn Write) -> Result<(), CliError> {
    let c = CurvatureSpec::new(a.c.clone())?;
    let (mesh, bg) = load(&a.mesh)?;
    let (u, rep) = solve_u(&mesh, &bg, &c, &a.solver.config(), None)?;
    match &a.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("report.txt"), rep.to_key_value())?;
            fs::write(dir.join("report.csv"), report_csv(&rep))?;
            fs::write(dir.join("u.csv"), vertex_csv(&u.u))?;
        }
        None => out.write_all(rep.to_key_value().as_bytes())?,
    }
    writeln!(
        log,
        "converged: {} Newton iterations, boundary lengths {:?}, area {}",
        rep.newton_iterations, rep.lengths, rep.area
    )?;
    Ok(())
}

fn cmd_tune(a: &TuneArgs, out: &mut dyn Write, log: &mut dyn Write) -> Result<(), CliError> {
    let d = MomentumTarget::new(a.d)?;
    let (mesh, bg) = load(&a.mesh)?;
    let r = tune_d(&mesh, &bg, d, &a.tuner.config(), None)?;
    let rows = md_identities(&r.report, a.d)?;
    let mut ident = String::from("loop,L,defect,ell,Y,Xbar\n");
    for row in &rows {
        writeln!(
            ident,
            "{},{},{:e},{},{},{}",
            row.index, row.boundary_length, row.momentum_defect, row.ell, row.offset, row.xbar
        )
        .unwrap();
    }
    match &a.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("history.csv"), r.history_csv())?;
            fs::write(dir.join("identities.csv"), &ident)?;
            fs::write(dir.join("report.txt"), r.report.to_key_value())?;
            fs::write(dir.join("report.csv"), report_csv(&r.report))?;
            fs::write(dir.join("u.csv"), vertex_csv(&r.u.u))?;
        }
        None => out.write_all(r.history_csv().as_bytes())?,
    }
    writeln!(
        log,
        "c* = {:?} after {} outer iterations",
        r.c.values(),
        r.outer_iterations()
    )?;
    write!(log, "{}", r.report.to_key_value())?;
    Ok(())
}

fn sweep_mode(a: &SweepArgs) -> Result<SweepMode, CliError> {
    match (a.type_i, a.d) {
        (true, None) => Ok(SweepMode::Geodesic),
        (false, Some(d)) => Ok(SweepMode::Momentum(MomentumTarget::new(d)?)),
        (true, Some(_)) => Err(CliError::Validation("--type-i and --d are exclusive".into())),
        (false, None) => Err(CliError::Validation("--d is required unless --type-i is given".into())),
    }
}

fn check_monotone(values: &[f64], what: &str) -> Result<(), CliError> {
    if values.is_empty() {
        return Err(CliError::Validation(format!("{what} list is empty")));
    }
    let inc = values.windows(2).all(|w| w[1] > w[0]);
    let dec = values.windows(2).all(|w| w[1] < w[0]);
    if !(inc || dec) {
        return Err(CliError::Validation(format!("{what} values must be strictly monotone")));
    }
    Ok(())
}

fn sweep_threads() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| CliError::Validation(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn cmd_sweep(s: &SweepCommand, out: &mut dyn Write, log: &mut dyn Write) -> Result<(), CliError> {
    let (family, common) = match s {
        SweepCommand::Annulus { t, nth, common } => {
            check_monotone(t, "T")?;
            if t.iter().any(|&x| !(x > 0.0)) {
                return Err(CliError::Validation("moduli must be positive".into()));
            }
            (
                SweepFamily::Annulus {
                    moduli: t.clone(),
                    n_theta: *nth,
                },
                common,
            )
        }
        SweepCommand::Pants { radii, params, common } => {
            check_monotone(radii, "radius")?;
            (
                SweepFamily::PantsPinch {
                    base: params.params(),
                    radii: radii.clone(),
                },
                common,
            )
        }
    };
    let mode = sweep_mode(common)?;
    let config = common.tuner.config();
    let run = || degeneration_sweep(&family, mode, &config);
    let table: SweepTable = match sweep_threads()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Io(e.to_string()))?
            .install(run),
        None => run(),
    };
    emit(common.out.as_deref(), &table.to_csv(), out)?;
    let ok = table.successes().count();
    writeln!(log, "{ok} of {} family members converged", table.rows.len())?;
    for (p, m) in table.successes() {
        writeln!(
            log,
            "  {} = {p}: L = {:?}, ell = {:?}",
            table.parameter_name, m.lengths, m.ell
        )?;
    }
    if ok < table.rows.len() {
        return Err(CliError::Numerical(format!(
            "{} family member(s) failed",
            table.rows.len() - ok
        )));
    }
    Ok(())
}

fn cmd_modulus(a: &ModulusArgs, out: &mut dyn Write, log: &mut dyn Write) -> Result<(), CliError> {
    let (mesh, bg) = load(&a.mesh)?;
    let z = conformal_modulus(&mesh, &bg, a.loop_index)?;
    emit(a.out.as_deref(), &format!("loop,modulus\n{},{z}\n", a.loop_index), out)?;
    writeln!(log, "conformal modulus of loop {} = {z}", a.loop_index)?;
    Ok(())
}

struct CheckTable {
    csv: String,
    failures: Vec<String>,
}

impl CheckTable {
    fn new() -> Self {
        Self {
            csv: String::from("check,value,bound,status\n"),
            failures: Vec::new(),
        }
    }

    /// Records `value ≤ bound`.
    fn at_most(&mut self, name: &str, value: f64, bound: f64) {
        let pass = value <= bound;
        writeln!(
            self.csv,
            "{name},{value:e},{bound:e},{}",
            if pass { "pass" } else { "fail" }
        )
        .unwrap();
        if !pass {
            self.failures.push(format!("{name} = {value:e} exceeds {bound:e}"));
        }
    }
}

fn cmd_verify(a: &VerifyArgs, seed: u64, out: &mut dyn Write, log: &mut dyn Write) -> Result<(), CliError> {
    if a.samples == 0 || a.nth < 4 {
        return Err(CliError::Validation("need samples ≥ 1 and nth ≥ 4".into()));
    }
    let mut t = CheckTable::new();

    let collar = collar_identities(a.samples, seed)?;
    t.at_most("halfcollar_area_vs_quadrature", collar.area_defect, 1e-10);
    t.at_most("offset_equals_xbar", collar.offset_defect, 1e-12);
    t.at_most("length_identity", collar.length_identity_defect, 1e-12);
    t.at_most("horizontal_variation", collar.horizontal_derivative, 1e-10);
    t.at_most(
        "halfwidth_scaled_max_over_4pi",
        collar.halfwidth_scaled_max / (4.0 * std::f64::consts::PI),
        1.0 + 1e-9,
    );

    match trace_suite(a.samples, seed.wrapping_add(1)) {
        Ok(tr) => {
            t.at_most(
                "halfcollar_trace_negative_slack",
                (-tr.worst_halfcollar_slack).max(0.0),
                1e-10,
            );
            t.at_most(
                "cylinder_trace_negative_slack",
                (-tr.worst_cylinder_slack).max(0.0),
                1e-10,
            );
            t.at_most("constant_w_equality", tr.constant_equality_defect, 1e-10);
            t.at_most("linear_w_exact_slack", tr.linear_profile_defect, 1e-10);
        }
        Err(e) => t.failures.push(e.to_string()),
    }

    // mesh-level identities on the annulus and the pants domain
    let pi = std::f64::consts::PI;
    let mesh = generate_flat_annulus(pi, a.nth, a.nth)?;
    let bg = build_background(&mesh)?;
    let cfg = SolverConfig::default();
    let c = CurvatureSpec::uniform(2, 0.5)?;
    let (u, rep) = solve_u(&mesh, &bg, &c, &cfg, None)?;
    let v = mesh.vertex_count() as f64;
    t.at_most(
        "annulus_gauss_bonnet",
        gauss_bonnet_residual(&mesh, &bg, &u, &c),
        v * cfg.residual_tol,
    );
    t.at_most("annulus_loop_symmetry", (rep.lengths[0] - rep.lengths[1]).abs(), 1e-10);
    let z = conformal_modulus(&mesh, &bg, 0)?;
    t.at_most("annulus_modulus_relative_error", (z / pi - 1.0).abs(), 1e-2);

    let pants = generate_pants_domain_with(&PantsParams {
        outer_radius: DEFAULT_PANTS.0,
        hole_radii: [DEFAULT_PANTS.1; 2],
        hole_offset: DEFAULT_PANTS.2,
        resolution: 48,
    })?;
    let pbg = build_background(&pants)?;
    let c = CurvatureSpec::uniform(3, 0.3)?;
    let (u, _) = solve_u(&pants, &pbg, &c, &cfg, None)?;
    t.at_most(
        "pants_gauss_bonnet",
        gauss_bonnet_residual(&pants, &pbg, &u, &c),
        pants.vertex_count() as f64 * cfg.residual_tol,
    );
    let r = tune_d(&pants, &pbg, MomentumTarget::new(1.0)?, &TunerConfig::default(), None)?;
    let expected_area = 2.0 * pi + 3.0;
    t.at_most(
        "pants_area_identity_relative",
        (r.report.area / expected_area - 1.0).abs(),
        1e-6,
    );
    let rows = md_identities(&r.report, 1.0)?;
    let worst = rows.iter().map(|x| x.consistency().abs()).fold(0.0, f64::max);
    t.at_most("pants_offset_equals_xbar", worst, 1e-9);

    emit(a.out.as_deref(), &t.csv, out)?;
    if t.failures.is_empty() {
        writeln!(log, "all checks passed")?;
        Ok(())
    } else {
        for f in &t.failures {
            writeln!(log, "FAIL {f}")?;
        }
        Err(CliError::Check(format!("{} check(s) failed", t.failures.len())))
    }
}

/// Parses `args`, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, log: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = write!(log, "{e}");
            return code;
        }
    };
    let result = resolve(&cli).and_then(|cfg| {
        if let Some(p) = &cli.dump_config {
            dump_config(&cfg, p)?;
        }
        run(&cfg, out, log)
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(log, "error: {e}");
            e.exit_code()
        }
    }
}
