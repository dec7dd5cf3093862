//! Mode dispatch, reports and artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sigmak_core::bounds::{
    all_satisfied, check_gradient_bound, check_max_u_chain, check_solution_properties, check_volume_ratio,
    check_volume_ratio_literal, check_w_bound, solve_report_checks, BoundReport,
};
use sigmak_core::eigen::{continuation_eigen, direct_eigen_solve, normalize_by_volume, ContinuationSchedule, EigenError};
use sigmak_core::flow::{flow_run_from, FlowState};
use sigmak_core::grid::{ScalarField, SphereGrid};
use sigmak_core::solver::{newton_solve, residual, sphere_guess, ProblemSpec, SolverError};
use sigmak_core::surface::bundle_from_support;
use thiserror::Error;

use crate::config::{parse_config, ConfigError, Mode, RunConfig};
use crate::export::{lambda_table_csv, obj_mesh, polyline_csv, trajectory_csv};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_BOUNDS: i32 = 4;

const SOLUTION_FORMAT: &str = "sigmak-solution";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot read solution file {path}: {message}")]
    Solution { path: PathBuf, message: String },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Solution { .. } => EXIT_CONFIG,
            RunError::Io { .. } => EXIT_SOLVER,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub report: Value,
    pub checks: Vec<BoundReport>,
    /// One-line human summary.
    pub summary: String,
    pub files: Vec<PathBuf>,
}

/// Stored solution, re-checkable with `validate`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolutionFile {
    pub format: String,
    pub version: String,
    pub mode: String,
    /// Config text reproducing the problem.
    pub config: String,
    pub p: f64,
    /// `λ` of the equation the stored field solves.
    pub lambda: f64,
    /// The physical solution is `exp(log_scale)` times the stored field.
    pub log_scale: f64,
    pub residual_tolerance: f64,
    pub values: Vec<f64>,
}

fn header(cfg: &RunConfig) -> Value {
    json!({
        "tool": "sigmak",
        "version": env!("CARGO_PKG_VERSION"),
        "mode": cfg.mode,
        "resolution": cfg.resolution,
        "config": cfg.echo(),
    })
}

fn problem_spec(cfg: &RunConfig) -> Result<ProblemSpec, RunError> {
    let (f, psi) = cfg.data_fields()?;
    let mut spec = if cfg.mode == Mode::Eigen {
        ProblemSpec::eigen(cfg.k, &psi)
    } else {
        ProblemSpec::new(cfg.k, cfg.p, cfg.lambda, f).map(|mut s| {
            s.psi = psi;
            s
        })
    }
    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    if let Some(t) = cfg.tol {
        spec.tol_newton = t;
    }
    spec.max_iter = cfg.max_iter;
    spec.margin = cfg.margin;
    Ok(spec)
}

/// `1 + amp·q(x)` with `q` a seeded random even quadratic, `sup |q| ≤ 1`.
pub fn perturbation_factor(grid: &std::sync::Arc<SphereGrid>, amp: f64, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms: usize = if grid.dim() == 1 { 3 } else { 6 };
    let c: Vec<f64> = (0..terms).map(|_| rng.random_range(-1.0..1.0)).collect();
    let scale = c.iter().map(|v: &f64| v.abs()).sum::<f64>().max(1e-300);
    ScalarField::from_fn(grid.clone(), |x| {
        let m = [x[0] * x[0], x[1] * x[1], x[0] * x[1], x[2] * x[2], x[1] * x[2], x[0] * x[2]];
        let q: f64 = c.iter().zip(m).map(|(a, b)| a * b).sum();
        1.0 + amp * q / scale
    })
}

fn start_guess(spec: &ProblemSpec, amp: f64, seed: u64) -> Result<ScalarField, SolverError> {
    let base = sphere_guess(spec)?;
    if amp == 0.0 {
        return Ok(base);
    }
    let factor = perturbation_factor(spec.grid(), amp, seed);
    Ok(base.with_values(base.values().iter().zip(factor.values()).map(|(a, b)| a * b).collect()))
}

/// Artifacts of one run, written in order.
struct Artifacts {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.to_path_buf(), source })?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), RunError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| RunError::Io { path: path.clone(), source })?;
        self.files.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
        text.push('\n');
        self.write(name, &text)
    }

    /// `shape.obj` on S², `shape.csv` on S¹; returns a note on failure.
    fn mesh(&mut self, u: &ScalarField) -> Result<Option<String>, RunError> {
        let (name, text) = match u.grid().dim() {
            1 => ("shape.csv", polyline_csv(u)),
            _ => ("shape.obj", obj_mesh(u)),
        };
        match text {
            Ok(t) => self.write(name, &t).map(|_| None),
            Err(e) => Ok(Some(format!("mesh not written: {e}"))),
        }
    }
}

/// Runs `cfg` and writes its artifacts into `cfg.out_dir`.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    let mut art = Artifacts::new(&cfg.out_dir)?;
    let (exit_code, result, checks, summary) = match cfg.mode {
        Mode::Solve => run_solve(cfg, &mut art)?,
        Mode::Eigen => run_eigen(cfg, &mut art)?,
        Mode::Flow => run_flow(cfg, &mut art)?,
        Mode::Validate => run_validate(cfg)?,
    };
    let exit_code = if exit_code == EXIT_OK && !all_satisfied(&checks) { EXIT_BOUNDS } else { exit_code };
    let report = json!({
        "header": header(cfg),
        "status": status_name(exit_code),
        "exit_code": exit_code,
        "result": result,
        "checks_passed": all_satisfied(&checks),
        "checks": checks,
    });
    art.json("bounds.json", &checks)?;
    art.json("report.json", &report)?;
    Ok(RunOutcome { exit_code, report, checks, summary, files: art.files })
}

fn status_name(code: i32) -> &'static str {
    match code {
        EXIT_OK => "ok",
        EXIT_SOLVER => "solver_failure",
        EXIT_BOUNDS => "bound_check_failure",
        _ => "config_error",
    }
}

type ModeResult = (i32, Value, Vec<BoundReport>, String);

fn solver_failure(message: String) -> ModeResult {
    let summary = format!("solver failure: {message}");
    (EXIT_SOLVER, json!({ "error": message }), Vec::new(), summary)
}

fn solution_file(cfg: &RunConfig, p: f64, lambda: f64, log_scale: f64, tol: f64, u: &ScalarField) -> SolutionFile {
    SolutionFile {
        format: SOLUTION_FORMAT.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        mode: cfg.mode.to_string(),
        config: cfg.to_text(),
        p,
        lambda,
        log_scale,
        residual_tolerance: tol,
        values: u.values().to_vec(),
    }
}

fn run_solve(cfg: &RunConfig, art: &mut Artifacts) -> Result<ModeResult, RunError> {
    let spec = problem_spec(cfg)?;
    let u0 = match start_guess(&spec, cfg.perturbation, cfg.seed) {
        Ok(u) => u,
        Err(e) => return Ok(solver_failure(e.to_string())),
    };
    let sol = match newton_solve(&spec, &u0) {
        Ok(s) => s,
        Err(e) => return Ok(solver_failure(e.to_string())),
    };
    let checks = solve_report_checks(&sol, &spec);
    let bundle = bundle_from_support(&sol.shape);
    let scale = sol.log_scale.exp();
    let physical = sol.log_scale.abs() < 300.0;
    let mesh_note = art.mesh(if physical { &sol.u } else { &sol.shape })?;
    art.json("solution.json", &solution_file(cfg, spec.p, sol.lambda_eff, sol.log_scale, 10.0 * spec.tol_newton, &sol.shape))?;
    let result = json!({
        "iterations": sol.iterations,
        "final_residual_sup": sol.final_residual_sup,
        "physical_residual_sup": sol.physical_residual_sup,
        "log_scale": sol.log_scale,
        "lambda_eff": sol.lambda_eff,
        "admissible_throughout": sol.admissible_throughout,
        "worst_margin": sol.worst_margin,
        "newton_path": sol.newton_path,
        "u_min": scale * sol.shape.min(),
        "u_max": scale * sol.shape.max(),
        "log_volume": (spec.n as f64 + 1.0) * sol.log_scale + bundle.volume.ln(),
        "min_radius": scale * bundle.min_radius(),
        "symmetry_defect": scale * sol.shape.symmetry_defect(),
        "mesh_units": if physical { "physical" } else { "shape" },
        "mesh_note": mesh_note,
    });
    let summary = format!(
        "solve: converged in {} iterations, residual {:.3e}, u in [{:.6e}, {:.6e}]",
        sol.iterations,
        sol.final_residual_sup,
        scale * sol.shape.min(),
        scale * sol.shape.max()
    );
    Ok((EXIT_OK, result, checks, summary))
}

fn run_eigen(cfg: &RunConfig, art: &mut Artifacts) -> Result<ModeResult, RunError> {
    let spec = problem_spec(cfg)?;
    let mut schedule = match &cfg.schedule.p_list {
        Some(list) => ContinuationSchedule { p_list: list.clone(), warm_start: true },
        None => ContinuationSchedule::geometric(cfg.k, cfg.schedule.base, cfg.schedule.steps),
    };
    schedule.warm_start = cfg.schedule.warm_start;
    let existence = spec.psi.is_even(1e-14) && cfg.k < cfg.n;
    let existence_note = if existence {
        "even positive data: existence of a solution is guaranteed"
    } else {
        "data is not even: existence of a solution is not guaranteed, results are reported as computed"
    };
    let report = match continuation_eigen(&spec, &schedule) {
        Ok(r) => r,
        Err(e) => {
            let mut out = solver_failure(e.to_string());
            if let EigenError::Step { completed, .. } = &e {
                let steps: Vec<Value> = completed.iter().map(|s| json!({ "p": s.p, "lambda_p": s.lambda_p })).collect();
                out.1["completed_steps"] = Value::from(steps);
            }
            return Ok(out);
        }
    };
    let mut checks = report.bound_checks.clone();
    checks.push(BoundReport::new(
        "limit_residual",
        report.verification_residual,
        report.verification_tolerance,
        "sup |u0^k sigma_k(kappa) - lambda0 psi| against 50 x grid error",
    ));
    let mut direct = Value::Null;
    let mut stored = (report.lambda0, report.u0.clone(), report.verification_tolerance);
    if cfg.schedule.polish {
        let mut dspec = spec.clone();
        dspec.tol_newton = 1e-10;
        match direct_eigen_solve(&dspec, &report.u0, report.lambda0) {
            Ok(d) => {
                let gap = (d.lambda - report.lambda0).abs();
                checks.push(BoundReport::new("direct_agreement", gap, 1e-4, "|lambda direct - lambda continuation|"));
                direct = json!({
                    "lambda": d.lambda,
                    "iterations": d.iterations,
                    "residual": d.residual,
                    "shape_gap": d.u.sup_distance(&report.u0),
                });
                stored = (d.lambda, d.u, 10.0 * d.residual.max(dspec.tol_newton));
            }
            Err(e) => direct = json!({ "error": e.to_string() }),
        }
    }
    let mesh_note = art.mesh(&stored.1)?;
    art.write("lambda_table.csv", &lambda_table_csv(&report))?;
    art.json("solution.json", &solution_file(cfg, spec.k as f64 + 1.0, stored.0, 0.0, stored.2, &stored.1))?;
    let steps: Vec<Value> = report
        .steps
        .iter()
        .map(|s| {
            json!({
                "p": s.p,
                "lambda_p": s.lambda_p,
                "log_volume": s.log_volume,
                "residual": s.residual,
                "symmetry_defect": s.symmetry_defect,
                "min_radius": s.min_radius,
                "newton_iterations": s.solve.iterations,
            })
        })
        .collect();
    let result = json!({
        "lambda0": report.lambda0,
        "steps": steps,
        "schedule": schedule,
        "verification_residual": report.verification_residual,
        "verification_tolerance": report.verification_tolerance,
        "verified": report.verified(),
        "symmetry_defect": report.symmetry_defect,
        "existence_guaranteed": existence,
        "existence_note": existence_note,
        "direct": direct,
        "mesh_note": mesh_note,
    });
    let summary = format!("eigen: lambda0 = {:.8}, {} steps", report.lambda0, report.steps.len());
    Ok((EXIT_OK, result, checks, summary))
}

/// Generic estimates for a field that solves the equation with the given `λ`.
fn field_checks(u: &ScalarField, spec: &ProblemSpec, symmetry_tol: f64) -> Vec<BoundReport> {
    let mut out = Vec::new();
    out.extend(check_volume_ratio(u, spec));
    out.extend(check_max_u_chain(u, spec));
    out.push(check_gradient_bound(u));
    out.push(check_w_bound(u, spec));
    out.extend(check_solution_properties(u, &spec.f, symmetry_tol, None, None));
    out
}

fn run_flow(cfg: &RunConfig, art: &mut Artifacts) -> Result<ModeResult, RunError> {
    let spec = problem_spec(cfg)?;
    let u0 = match start_guess(&spec, cfg.flow.perturbation, cfg.seed) {
        Ok(u) => u,
        Err(e) => return Ok(solver_failure(e.to_string())),
    };
    let mut state = FlowState::new(u0, true);
    state.c_cfl = cfg.flow.c_cfl;
    let out = match flow_run_from(state, &spec, cfg.flow.t_max, cfg.flow.stop_tol) {
        Ok(o) => o,
        Err(e) => return Ok(solver_failure(e.to_string())),
    };
    let u = &out.state.u;
    let bspec = spec.with_lambda(out.lambda);
    let mut checks = Vec::new();
    let mut newton_gap = Value::Null;
    if out.converged {
        checks = field_checks(u, &bspec, 1e-10);
        if let Ok(sol) = newton_solve(&spec, &sphere_guess(&spec).map_err(|e| ConfigError::Invalid(e.to_string()))?) {
            if let (Ok(a), Ok(b)) = (normalize_by_volume(u), normalize_by_volume(&sol.shape)) {
                let gap = a.sup_distance(&b);
                newton_gap = Value::from(gap);
                checks.push(BoundReport::new(
                    "newton_agreement",
                    gap,
                    10.0 * cfg.flow.stop_tol.max(spec.tol_newton),
                    "unit-volume flow limit against unit-volume Newton solution",
                ));
            }
        }
    }
    let mesh_note = art.mesh(u)?;
    art.write("trajectory.csv", &trajectory_csv(&out.state.history))?;
    art.json("solution.json", &solution_file(cfg, spec.p, out.lambda, 0.0, 10.0 * cfg.flow.stop_tol * out.lambda.max(1.0), u))?;
    let result = json!({
        "converged": out.converged,
        "t": out.state.t,
        "steps": out.state.steps,
        "rejected_steps": out.state.rejected,
        "lambda": out.lambda,
        "relative_residual": out.residual,
        "volume": out.state.volume0,
        "newton_gap": newton_gap,
        "history": out.state.history,
        "mesh_note": mesh_note,
    });
    let code = if out.converged { EXIT_OK } else { EXIT_SOLVER };
    let summary = format!(
        "flow: {} at t = {:.4} after {} steps, relative residual {:.3e}",
        if out.converged { "converged" } else { "not converged" },
        out.state.t,
        out.state.steps,
        out.residual
    );
    Ok((code, result, checks, summary))
}

pub fn read_solution(path: &Path) -> Result<SolutionFile, RunError> {
    let err = |message: String| RunError::Solution { path: path.to_path_buf(), message };
    let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let sol: SolutionFile = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
    if sol.format != SOLUTION_FORMAT {
        return Err(err(format!("unexpected format '{}'", sol.format)));
    }
    Ok(sol)
}

fn run_validate(cfg: &RunConfig) -> Result<ModeResult, RunError> {
    let path = cfg.solution.as_ref().expect("validated config has a solution path");
    let stored = read_solution(path)?;
    let err = |message: String| RunError::Solution { path: path.clone(), message };
    let inner = parse_config(&stored.config).map_err(|e| err(format!("embedded config: {e}")))?;
    let (f, psi) = inner.data_fields().map_err(|e| err(e.to_string()))?;
    let mut spec = ProblemSpec::new(inner.k, stored.p, stored.lambda, f).map_err(|e| err(e.to_string()))?;
    spec.psi = psi;
    let u = ScalarField::new(spec.grid().clone(), stored.values.clone()).map_err(|e| err(e.to_string()))?;
    let tol = cfg.residual_tol.unwrap_or(stored.residual_tolerance);
    let mut checks = Vec::new();
    match residual(&u, &spec) {
        Ok(r) => checks.push(BoundReport::new("equation_residual", r.sup_abs(), tol, "sup |F(h) - (f/lambda)^(1/k) u^((p-1)/k)|")),
        Err(e) => checks.push(BoundReport::new("equation_residual", f64::INFINITY, tol, format!("not evaluable: {e}"))),
    }
    let symmetry_tol = if stored.mode == "eigen" { 1e-4 } else { 1e-6 };
    checks.extend(field_checks(&u, &spec, symmetry_tol));
    let literal: Vec<BoundReport> = check_volume_ratio_literal(&u, &spec).into();
    let failed = checks.iter().filter(|c| !c.satisfied).count();
    let result = json!({
        "solution": path.display().to_string(),
        "source_mode": stored.mode,
        "source_version": stored.version,
        "p": stored.p,
        "lambda": stored.lambda,
        "log_scale": stored.log_scale,
        "uncorrected_volume_ratio": literal,
    });
    let summary = format!("validate: {} checks, {} failed", checks.len(), failed);
    Ok((EXIT_OK, result, checks, summary))
}
