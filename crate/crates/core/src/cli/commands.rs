//! The command implementations behind the `cmcfoliate` binary.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::cli::config::{RunConfig, SCHEMA};
use crate::cli::output::{fmt_f64, write_csv, write_json};
use crate::error::{Error, Result};
use crate::hemisphere::Hemisphere;
use crate::metric::{inverse_metric_series, make_model, BoundaryJet, MetricModel};
use crate::scalar::rational_from_f64;
use crate::solver::{
    chart_point, moment_constant, moment_constant_closed_form, sample_points, verify_foliation, FoliationResult,
    LeafSolution, Solver, TauMode, VerificationReport,
};

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InsufficientData(_) => 1,
        Error::Configuration(_) | Error::Validation(_) | Error::Json(_) | Error::Io(_) | Error::Csv(_) => 2,
        Error::Shape(_) | Error::Precondition(_) => 2,
        Error::Continuation { .. }
        | Error::Geometry(_)
        | Error::Numerical(_)
        | Error::Nondegeneracy(_)
        | Error::Solvability { .. }
        | Error::Domain(_) => 3,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
}

impl From<&Error> for ErrorRecord {
    fn from(e: &Error) -> Self {
        ErrorRecord { kind: e.kind().into(), message: e.to_string() }
    }
}

/// One row of a pass/fail table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    pub command: String,
    pub config: RunConfig,
    pub c_n: Option<f64>,
    pub leaves: Vec<LeafSolution>,
    pub diagnostics: Option<VerificationReport>,
    pub checks: Vec<Check>,
    pub error: Option<ErrorRecord>,
    pub elapsed_seconds: f64,
}

impl RunReport {
    fn new(command: &str, config: &RunConfig) -> Self {
        RunReport {
            schema: SCHEMA,
            command: command.into(),
            config: config.clone(),
            c_n: None,
            leaves: Vec::new(),
            diagnostics: None,
            checks: Vec::new(),
            error: None,
            elapsed_seconds: 0.0,
        }
    }

    pub fn all_passed(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.passed)
    }
}

/// A leaf with its graph function, enough to rebuild it for verification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafRecord {
    pub r: f64,
    pub tau: Vec<f64>,
    pub phi: Vec<f64>,
    pub kperp_residual: f64,
    pub kernel_residual: f64,
    pub reduced_residual: f64,
    pub newton_iters: usize,
    pub kperp_iters: usize,
    pub converged: bool,
}

impl From<&LeafSolution> for LeafRecord {
    fn from(l: &LeafSolution) -> Self {
        LeafRecord {
            r: l.r,
            tau: l.tau.clone(),
            phi: l.phi.coeffs().to_vec(),
            kperp_residual: l.kperp_residual,
            kernel_residual: l.kernel_residual,
            reduced_residual: l.reduced_residual,
            newton_iters: l.newton_iters,
            kperp_iters: l.kperp_iters,
            converged: l.converged,
        }
    }
}

impl LeafRecord {
    pub fn to_leaf(&self, space: &Arc<Hemisphere>) -> Result<LeafSolution> {
        Ok(LeafSolution {
            r: self.r,
            tau: self.tau.clone(),
            phi: space.from_coeffs(self.phi.clone())?,
            kperp_residual: self.kperp_residual,
            kernel_residual: self.kernel_residual,
            reduced_residual: self.reduced_residual,
            newton_iters: self.newton_iters,
            kperp_iters: self.kperp_iters,
            converged: self.converged,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafFile {
    pub schema: String,
    pub n: usize,
    pub l_max: usize,
    pub quadrature_exactness: usize,
    /// Whether `tau` was pinned rather than solved for.
    #[serde(default)]
    pub tau_pinned: bool,
    pub leaves: Vec<LeafRecord>,
}

/// Where a command reads and writes.
#[derive(Clone, Debug)]
pub struct Context {
    pub config: RunConfig,
    /// Directory against which relative table paths resolve.
    pub base_dir: PathBuf,
    pub out_dir: PathBuf,
}

impl Context {
    pub fn new(config: RunConfig, base_dir: PathBuf, out_override: Option<PathBuf>) -> Self {
        let out_dir = out_override.unwrap_or_else(|| {
            let p = config.output_path();
            if p.is_absolute() {
                p
            } else {
                base_dir.join(p)
            }
        });
        Context { config, base_dir, out_dir }
    }

    pub fn model(&self) -> Result<MetricModel> {
        make_model(self.config.n, &self.config.model, &self.base_dir)
    }

    pub fn space(&self) -> Result<Arc<Hemisphere>> {
        Hemisphere::build(self.config.n, self.config.l_max, self.config.quadrature_exactness)
    }

    fn solver(&self) -> Result<Solver> {
        Solver::new(self.model()?, self.space()?, self.config.settings())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

/// What a command produced: files written and the exit status.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub status: i32,
    pub lines: Vec<String>,
}

fn exponent_key(e: &[u8]) -> String {
    e.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

#[derive(Serialize)]
struct ExpandEntry {
    row: usize,
    col: usize,
    /// Exponents of `(x_1, ..., x_n, t)` mapped to the coefficient.
    coefficients: std::collections::BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct ExpandFile<'a> {
    schema: &'static str,
    n: usize,
    degree: usize,
    variables: Vec<String>,
    entries: Vec<ExpandEntry>,
    exact_inversion: &'a Check,
}

/// Degree-4 inverse-metric coefficients at `tau = 0` and an exact rational
/// inversion check of them.
pub fn cmd_expand(ctx: &Context) -> Result<Outcome> {
    let model = ctx.model()?;
    let n = ctx.config.n;
    let jet = model.jet_at(&vec![0.0; n])?;
    let m = inverse_metric_series(&jet)?;
    let exact: BoundaryJet<BigRational> = jet.map(|v| rational_from_f64(*v));
    let g = inverse_metric_series(&exact)?;
    let inv = g.invert()?;
    let ok = g.mul(&inv)?.is_identity() && inv.mul(&g)?.is_identity();
    let check = Check::new("exact inversion", ok, "product with the Neumann-series inverse is I through degree 4");
    let mut entries = Vec::new();
    for i in 0..=n {
        for j in i..=n {
            let coefficients =
                m.get(i, j).terms().filter(|(_, c)| **c != 0.0).map(|(e, c)| (exponent_key(e), *c)).collect();
            entries.push(ExpandEntry { row: i, col: j, coefficients });
        }
    }
    let mut variables: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    variables.push("t".into());
    let file = ExpandFile { schema: SCHEMA, n, degree: m.degree_bound(), variables, entries, exact_inversion: &check };
    let path = ctx.path("expansion.json");
    write_json(&path, &file)?;
    let status = if check.passed { 0 } else { 1 };
    Ok(Outcome {
        files: vec![path],
        status,
        lines: vec![format!("exact inversion: {}", if check.passed { "pass" } else { "FAIL" })],
    })
}

/// Quadrature moments on `S^n_+`, including the coefficient of the reduced map.
#[derive(Clone, Debug, Serialize)]
pub struct MomentReport {
    pub schema: &'static str,
    pub n: usize,
    pub area: f64,
    /// `int x^i x^j`.
    pub second_moments: Vec<Vec<f64>>,
    /// `P~(t)`.
    pub p_t: Vec<f64>,
    /// `P~(t x^i)`, row `i`.
    pub p_t_x: Vec<Vec<f64>>,
    /// Largest `|P~(t x^i x^j)|`.
    pub p_t_xx_max: f64,
    /// `P~(t x^i x^j x^k) . e_l` for `i <= j <= k`, keyed `"i,j,k"`.
    pub p_t_xxx: std::collections::BTreeMap<String, Vec<f64>>,
    pub c_n: f64,
    pub c_n_high_order: f64,
    pub c_n_stability: f64,
    pub c_n_closed_form: f64,
    /// `w_n / ((n + 2) w_{n+1})` with `w_k` the unit-ball volume.
    pub unscaled_fraction: f64,
    pub unscaled_deviation: f64,
    pub unscaled_ratio: f64,
}

pub fn moment_report(n: usize, l_max: usize, exactness: usize) -> Result<MomentReport> {
    let space = Hemisphere::build(n, l_max, exactness)?;
    let fine = Hemisphere::build(n, l_max, exactness + 8)?;
    let nodes = space.nodes();
    let vals = |f: &dyn Fn(&[f64]) -> f64| -> Vec<f64> { nodes.iter().map(|p| f(p)).collect() };
    let second_moments =
        (0..n).map(|i| (0..n).map(|j| space.integrate_fn(|p| p[i] * p[j])).collect()).collect();
    let p_t = space.project_k_values(&vals(&|p| p[n]));
    let p_t_x = (0..n).map(|i| space.project_k_values(&vals(&|p| p[n] * p[i]))).collect();
    let mut p_t_xx_max = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for v in space.project_k_values(&vals(&|p| p[n] * p[i] * p[j])) {
                p_t_xx_max = p_t_xx_max.max(v.abs());
            }
        }
    }
    let mut p_t_xxx = std::collections::BTreeMap::new();
    for i in 0..n {
        for j in i..n {
            for k in j..n {
                let v = space.project_k_values(&vals(&|p| p[n] * p[i] * p[j] * p[k]));
                p_t_xxx.insert(format!("{},{},{}", i + 1, j + 1, k + 1), v);
            }
        }
    }
    let c_n = moment_constant(&space);
    let c_n_high_order = moment_constant(&fine);
    let c_n_closed_form = moment_constant_closed_form(n);
    let unscaled_fraction = crate::solver::ball_volume(n) / ((n as f64 + 2.0) * crate::solver::ball_volume(n + 1));
    Ok(MomentReport {
        schema: SCHEMA,
        n,
        area: space.integrate_fn(|_| 1.0),
        second_moments,
        p_t,
        p_t_x,
        p_t_xx_max,
        p_t_xxx,
        c_n,
        c_n_high_order,
        c_n_stability: (c_n - c_n_high_order).abs(),
        c_n_closed_form,
        unscaled_fraction,
        unscaled_deviation: c_n - unscaled_fraction,
        unscaled_ratio: c_n / unscaled_fraction,
    })
}

pub fn cmd_moments(ctx: &Context) -> Result<Outcome> {
    let c = &ctx.config;
    let report = moment_report(c.n, c.l_max, c.quadrature_exactness)?;
    let path = ctx.path("moments.json");
    write_json(&path, &report)?;
    Ok(Outcome {
        files: vec![path],
        status: 0,
        lines: vec![
            format!("c_n = {}", fmt_f64(report.c_n)),
            format!("c_n stability across quadrature orders = {:e}", report.c_n_stability),
            format!("unscaled fraction = {} (ratio {})", fmt_f64(report.unscaled_fraction), fmt_f64(report.unscaled_ratio)),
        ],
    })
}

fn leaf_rows(leaves: &[LeafSolution]) -> (Vec<String>, Vec<Vec<String>>) {
    let n = leaves.first().map_or(0, |l| l.tau.len());
    let mut header = vec!["r".to_string()];
    header.extend((1..=n).map(|i| format!("tau{i}")));
    header.extend(
        ["kperp_residual", "kernel_residual", "reduced_residual", "newton_iters", "kperp_iters", "converged"]
            .map(String::from),
    );
    let rows = leaves
        .iter()
        .map(|l| {
            let mut row = vec![fmt_f64(l.r)];
            row.extend(l.tau.iter().map(|v| fmt_f64(*v)));
            row.push(fmt_f64(l.kperp_residual));
            row.push(fmt_f64(l.kernel_residual));
            row.push(fmt_f64(l.reduced_residual));
            row.push(l.newton_iters.to_string());
            row.push(l.kperp_iters.to_string());
            row.push(l.converged.to_string());
            row
        })
        .collect();
    (header, rows)
}

fn point_rows(leaves: &[LeafSolution], density: usize) -> (Vec<String>, Vec<Vec<String>>) {
    let n = leaves.first().map_or(0, |l| l.tau.len());
    let mut header = vec!["r".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=n).map(|i| format!("y{i}")));
    header.push("y_t".into());
    let samples = sample_points(n, density);
    let mut rows = Vec::new();
    for leaf in leaves {
        for x in &samples {
            let mut row = vec![fmt_f64(leaf.r)];
            row.extend(x.iter().map(|v| fmt_f64(*v)));
            row.extend(chart_point(leaf, x).into_iter().map(fmt_f64));
            rows.push(row);
        }
    }
    (header, rows)
}

fn write_leaf_outputs(
    ctx: &Context,
    space: &Hemisphere,
    leaves: &[LeafSolution],
    tau_pinned: bool,
) -> Result<Vec<PathBuf>> {
    let (h, rows) = leaf_rows(leaves);
    let leaves_csv = ctx.path("leaves.csv");
    write_csv(&leaves_csv, &h, &rows)?;
    let (h, rows) = point_rows(leaves, ctx.config.sample_density);
    let points_csv = ctx.path("points.csv");
    write_csv(&points_csv, &h, &rows)?;
    let file = LeafFile {
        schema: SCHEMA.into(),
        n: space.n(),
        l_max: space.l_max(),
        quadrature_exactness: space.quadrature().exactness_degree,
        tau_pinned,
        leaves: leaves.iter().map(LeafRecord::from).collect(),
    };
    let leaves_json = ctx.path("leaves.json");
    write_json(&leaves_json, &file)?;
    Ok(vec![leaves_csv, points_csv, leaves_json])
}

fn foliation_checks(report: &mut RunReport, diag: &VerificationReport) {
    let slope_ok = diag.tau_identically_zero || diag.tau_slope_fit.is_some_and(|s| s >= 1.8);
    let slope = match diag.tau_slope_fit {
        Some(s) => format!("slope {}", fmt_f64(s)),
        None if diag.tau_identically_zero => format!("tau vanishes identically (max {:e})", diag.tau_max),
        None => "no slope".into(),
    };
    report.checks.push(Check::new("tau decay", slope_ok, slope));
    report.checks.push(Check::new("transversality", diag.det_min > 0.0, format!("det_min {}", fmt_f64(diag.det_min))));
    report.checks.push(Check::new(
        "free boundary angle",
        diag.free_boundary_max_angle <= 1e-4,
        format!("max angle {:e}", diag.free_boundary_max_angle),
    ));
}

/// Pinned leaves are not expected to annihilate the kernel projection.
fn leaf_checks(report: &mut RunReport, tol_perp: f64, tol_k: f64, pinned: bool) {
    for l in &report.leaves {
        report.checks.push(Check::new(
            format!("leaf r={}", fmt_f64(l.r)),
            l.converged && l.kperp_residual <= tol_perp && (pinned || l.kernel_residual <= tol_k),
            format!("residuals {:e} / {:e}", l.kperp_residual, l.kernel_residual),
        ));
    }
}

/// Runs `f`, then writes `report.json` whether or not it failed.
fn with_report(
    ctx: &Context,
    command: &str,
    f: impl FnOnce(&mut RunReport, &mut Vec<PathBuf>) -> Result<i32>,
) -> Result<Outcome> {
    let start = Instant::now();
    let mut report = RunReport::new(command, &ctx.config);
    let mut files = Vec::new();
    let result = f(&mut report, &mut files);
    report.elapsed_seconds = start.elapsed().as_secs_f64();
    let status = match &result {
        Ok(s) => *s,
        Err(e) => {
            report.error = Some(ErrorRecord::from(e));
            exit_code(e)
        }
    };
    let path = ctx.path("report.json");
    write_json(&path, &report)?;
    files.push(path);
    let mut lines: Vec<String> =
        report.checks.iter().map(|c| format!("{} {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail)).collect();
    if let Some(e) = &report.error {
        lines.push(format!("error [{}]: {}", e.kind, e.message));
    }
    Ok(Outcome { files, status, lines })
}

fn pinned(tau: Option<&[f64]>, n: usize) -> Result<Option<Vec<f64>>> {
    match tau {
        Some(t) if t.len() != n => Err(Error::Configuration(format!("--tau has {} entries, expected {n}", t.len()))),
        Some(t) => Ok(Some(t.to_vec())),
        None => Ok(None),
    }
}

/// A single leaf at radius `r`; `tau` is solved for unless pinned.
pub fn cmd_leaf(ctx: &Context, r: Option<f64>, tau: Option<&[f64]>) -> Result<Outcome> {
    let n = ctx.config.n;
    let tau = pinned(tau, n)?;
    let r = r.unwrap_or(ctx.config.r_grid.start);
    let solver = ctx.solver()?;
    with_report(ctx, "leaf", |report, files| {
        report.c_n = Some(solver.c_n());
        let leaf = match &tau {
            Some(t) => solver.solve_leaf_pinned(r, t, None)?,
            None => solver.solve_tau(r, &vec![0.0; n])?,
        };
        report.leaves.push(leaf);
        leaf_checks(report, ctx.config.tol_perp, ctx.config.tol_k, tau.is_some());
        files.extend(write_leaf_outputs(ctx, solver.space(), &report.leaves, tau.is_some())?);
        Ok(if report.all_passed() { 0 } else { 3 })
    })
}

/// Continuation over the configured radius grid.
pub fn cmd_foliate(ctx: &Context, tau: Option<&[f64]>) -> Result<Outcome> {
    let n = ctx.config.n;
    let mode = match pinned(tau, n)? {
        Some(t) => TauMode::Pinned(t),
        None => TauMode::Solve,
    };
    let solver = ctx.solver()?;
    let grid = ctx.config.r_grid.points();
    with_report(ctx, "foliate", |report, files| {
        report.c_n = Some(solver.c_n());
        let result: FoliationResult = solver.build_foliation(&grid, &mode, ctx.config.sample_density)?;
        report.leaves = result.leaves.clone();
        let pinned = matches!(mode, TauMode::Pinned(_));
        leaf_checks(report, ctx.config.tol_perp, ctx.config.tol_k, pinned);
        files.extend(write_leaf_outputs(ctx, solver.space(), &result.leaves, pinned)?);
        if let (Some(kind), Some(msg)) = (result.failure_kind, &result.failure) {
            report.error = Some(ErrorRecord { kind: kind.into(), message: msg.clone() });
            return Ok(3);
        }
        if let Some(diag) = &result.diagnostics {
            foliation_checks(report, diag);
            report.diagnostics = Some(diag.clone());
        }
        Ok(if report.leaves.iter().all(|l| l.converged) { 0 } else { 3 })
    })
}

/// Re-verifies the leaves stored in `leaves.json` of the output directory.
pub fn cmd_verify(ctx: &Context) -> Result<Outcome> {
    let source = ctx.path("leaves.json");
    let text = std::fs::read_to_string(&source)
        .map_err(|e| Error::Configuration(format!("cannot read {}: {e}", source.display())))?;
    let file: LeafFile = serde_json::from_str(&text)?;
    if file.schema != SCHEMA {
        return Err(Error::Configuration(format!("{} has schema {:?}", source.display(), file.schema)));
    }
    let c = &ctx.config;
    if (file.n, file.l_max, file.quadrature_exactness) != (c.n, c.l_max, c.quadrature_exactness) {
        return Err(Error::Configuration(format!(
            "{} was computed with (n, l_max, exactness) = ({}, {}, {}), not ({}, {}, {})",
            source.display(),
            file.n,
            file.l_max,
            file.quadrature_exactness,
            c.n,
            c.l_max,
            c.quadrature_exactness
        )));
    }
    let model = ctx.model()?;
    let space = ctx.space()?;
    let leaves = file.leaves.iter().map(|l| l.to_leaf(&space)).collect::<Result<Vec<_>>>()?;
    with_report(ctx, "verify", |report, _| {
        report.leaves = leaves.clone();
        leaf_checks(report, c.tol_perp, c.tol_k, file.tau_pinned);
        let result = FoliationResult { leaves, failure: None, failure_kind: None, diagnostics: None };
        let diag = verify_foliation(&model, &space, &result, c.sample_density)?;
        foliation_checks(report, &diag);
        report.diagnostics = Some(diag);
        Ok(if report.all_passed() { 0 } else { 1 })
    })
}

/// Resolves a config path (or the defaults) into a context.
pub fn load_context(config: Option<&Path>, out: Option<PathBuf>, seed: Option<u64>) -> Result<Context> {
    let (mut cfg, base) = match config {
        Some(p) => {
            let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (RunConfig::load(p)?, base)
        }
        None => (RunConfig::default(), PathBuf::from(".")),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(Context::new(cfg, base, out))
}
