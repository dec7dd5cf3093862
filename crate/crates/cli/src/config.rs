//! Flat `key = value` run configuration.
//!
//! Keys (defaults in parentheses):
//!
//! ```text
//! mode               solve | eigen | flow | validate (solve)
//! seed               integer seed for initial perturbations (0)
//! allow_non_even     permit odd data in eigen mode (false)
//! problem.n          1 or 2 (2)
//! problem.k          1..=n (1)
//! problem.p          exponent (k+1 in eigen mode, k+2 otherwise)
//! problem.lambda     right-hand-side constant (1)
//! problem.f          data preset for f (constant:1)
//! problem.psi        data preset for psi = 1/f; exclusive with problem.f
//! grid.points        nodes on S^1 (64)
//! grid.n_theta       colatitude rows on S^2 (48)
//! grid.n_phi         longitude columns on S^2 (2 n_theta)
//! solver.tol         Newton tolerance (1e-9 on S^1, 1e-8 on S^2)
//! solver.max_iter    Newton iteration cap (60)
//! solver.margin      admissibility margin kept by the line search (0.1)
//! solver.perturbation  relative even perturbation of the round start (0)
//! schedule.base      geometric base b in p_j = k+1+b^-j (2)
//! schedule.steps     number of continuation steps (8)
//! schedule.p_list    explicit comma-separated decreasing list (overrides base/steps)
//! schedule.warm_start  reuse the previous shape (true)
//! schedule.polish    refine the extrapolated limit with the direct solve (true)
//! flow.t_max         final time (50)
//! flow.stop_tol      relative residual stopping tolerance (1e-7)
//! flow.c_cfl         time-step safety factor (0.2)
//! flow.perturbation  relative even perturbation of the round start (0.05)
//! validate.solution  path of a solution.json to re-check
//! validate.residual_tol  residual tolerance (taken from the solution file)
//! output.dir         output directory (out)
//! output.mesh        write shape.obj / shape.csv (true)
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;
use sigmak_core::grid::{build_grid, Resolution, ScalarField};
use thiserror::Error;

use crate::presets::{preset_function, Preset, PresetError};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Preset(#[from] PresetError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Solve,
    Eigen,
    Flow,
    Validate,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "solve" => Ok(Mode::Solve),
            "eigen" => Ok(Mode::Eigen),
            "flow" => Ok(Mode::Flow),
            "validate" => Ok(Mode::Validate),
            _ => Err(format!("unknown mode '{s}' (expected solve, eigen, flow or validate)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Solve => "solve",
            Mode::Eigen => "eigen",
            Mode::Flow => "flow",
            Mode::Validate => "validate",
        })
    }
}

/// Which function the data preset describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DataRole {
    F,
    Psi,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleConfig {
    pub base: f64,
    pub steps: usize,
    pub p_list: Option<Vec<f64>>,
    pub warm_start: bool,
    pub polish: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig {
    pub t_max: f64,
    pub stop_tol: f64,
    pub c_cfl: f64,
    pub perturbation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub n: usize,
    pub k: usize,
    pub p: f64,
    pub lambda: f64,
    pub resolution: Resolution,
    pub data: Preset,
    pub data_role: DataRole,
    pub tol: Option<f64>,
    pub max_iter: usize,
    pub margin: f64,
    pub perturbation: f64,
    pub schedule: ScheduleConfig,
    pub flow: FlowConfig,
    pub solution: Option<PathBuf>,
    pub residual_tol: Option<f64>,
    pub out_dir: PathBuf,
    pub mesh: bool,
    pub seed: u64,
    pub allow_non_even: bool,
}

/// Command-line settings that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub allow_non_even: bool,
    pub out_dir: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "mode",
    "seed",
    "allow_non_even",
    "problem.n",
    "problem.k",
    "problem.p",
    "problem.lambda",
    "problem.f",
    "problem.psi",
    "grid.points",
    "grid.n_theta",
    "grid.n_phi",
    "solver.tol",
    "solver.max_iter",
    "solver.margin",
    "solver.perturbation",
    "schedule.base",
    "schedule.steps",
    "schedule.p_list",
    "schedule.warm_start",
    "schedule.polish",
    "flow.t_max",
    "flow.stop_tol",
    "flow.c_cfl",
    "flow.perturbation",
    "validate.solution",
    "validate.residual_tol",
    "output.dir",
    "output.mesh",
];

/// Raw key/value pairs with the line each came from.
struct Entries(BTreeMap<String, (usize, String)>);

impl Entries {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Parse {
                line,
                message: format!("expected 'key = value', got '{body}'"),
            })?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(ConfigError::Parse { line, message: format!("unknown key '{key}'") });
            }
            if map.insert(key.to_string(), (line, value.trim().to_string())).is_some() {
                return Err(ConfigError::Parse { line, message: format!("duplicate key '{key}'") });
            }
        }
        Ok(Self(map))
    }

    fn raw(&self, key: &str) -> Option<&(usize, String)> {
        self.0.get(key)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.0.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<T>().map(Some).map_err(|_| ConfigError::Parse {
                line: *line,
                message: format!("invalid value '{v}' for '{key}'"),
            }),
        }
    }

    fn number(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        let v: Option<f64> = self.get(key)?;
        if let Some(x) = v {
            if !x.is_finite() {
                let line = self.0[key].0;
                return Err(ConfigError::Parse { line, message: format!("'{key}' must be finite") });
            }
        }
        Ok(v)
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.0.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|_| ConfigError::Parse { line: *line, message: format!("invalid list '{v}' for '{key}'") }),
        }
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_with(text, &Overrides::default())
}

pub fn parse_config_with(text: &str, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let e = Entries::parse(text)?;
    let mode = match overrides.mode {
        Some(m) => m,
        None => match e.raw("mode") {
            None => Mode::Solve,
            Some((line, v)) => v.parse().map_err(|message| ConfigError::Parse { line: *line, message })?,
        },
    };
    let n: usize = e.get("problem.n")?.unwrap_or(2);
    let k: usize = e.get("problem.k")?.unwrap_or(1);
    let p_given = e.number("problem.p")?;
    let default_p = if mode == Mode::Eigen { k as f64 + 1.0 } else { k as f64 + 2.0 };
    let resolution = match n {
        1 => Resolution::Circle { n: e.get("grid.points")?.unwrap_or(64) },
        _ => {
            let nt: usize = e.get("grid.n_theta")?.unwrap_or(48);
            Resolution::Sphere { n_theta: nt, n_phi: e.get("grid.n_phi")?.unwrap_or(2 * nt) }
        }
    };
    let (data_role, data) = match (e.raw("problem.f"), e.raw("problem.psi")) {
        (Some(_), Some((line, _))) => {
            return Err(ConfigError::Parse { line: *line, message: "give either problem.f or problem.psi, not both".into() })
        }
        (Some((line, v)), None) => (DataRole::F, parse_preset(*line, v)?),
        (None, Some((line, v))) => (DataRole::Psi, parse_preset(*line, v)?),
        (None, None) => (if mode == Mode::Eigen { DataRole::Psi } else { DataRole::F }, Preset::Constant(1.0)),
    };
    let cfg = RunConfig {
        mode,
        n,
        k,
        p: p_given.unwrap_or(default_p),
        lambda: e.number("problem.lambda")?.unwrap_or(1.0),
        resolution,
        data,
        data_role,
        tol: e.number("solver.tol")?,
        max_iter: e.get("solver.max_iter")?.unwrap_or(60),
        margin: e.number("solver.margin")?.unwrap_or(0.1),
        perturbation: e.number("solver.perturbation")?.unwrap_or(0.0),
        schedule: ScheduleConfig {
            base: e.number("schedule.base")?.unwrap_or(2.0),
            steps: e.get("schedule.steps")?.unwrap_or(8),
            p_list: e.list("schedule.p_list")?,
            warm_start: e.get("schedule.warm_start")?.unwrap_or(true),
            polish: e.get("schedule.polish")?.unwrap_or(true),
        },
        flow: FlowConfig {
            t_max: e.number("flow.t_max")?.unwrap_or(50.0),
            stop_tol: e.number("flow.stop_tol")?.unwrap_or(1e-7),
            c_cfl: e.number("flow.c_cfl")?.unwrap_or(0.2),
            perturbation: e.number("flow.perturbation")?.unwrap_or(0.05),
        },
        solution: e.get::<String>("validate.solution")?.map(PathBuf::from),
        residual_tol: e.number("validate.residual_tol")?,
        out_dir: overrides
            .out_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from(e.get::<String>("output.dir").ok().flatten().unwrap_or_else(|| "out".into()))),
        mesh: e.get("output.mesh")?.unwrap_or(true),
        seed: e.get("seed")?.unwrap_or(0),
        allow_non_even: overrides.allow_non_even || e.get("allow_non_even")?.unwrap_or(false),
    };
    cfg.validate(p_given.is_some())?;
    Ok(cfg)
}

fn parse_preset(line: usize, v: &str) -> Result<Preset, ConfigError> {
    v.parse().map_err(|err: PresetError| ConfigError::Parse { line, message: err.to_string() })
}

impl RunConfig {
    fn validate(&self, p_given: bool) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.mode == Mode::Validate {
            if self.solution.is_none() {
                return invalid("validate mode needs validate.solution".into());
            }
            return Ok(());
        }
        if !(1..=2).contains(&self.n) {
            return invalid(format!("problem.n must be 1 or 2, got {}", self.n));
        }
        if self.k < 1 || self.k > self.n {
            return invalid(format!("need 1 <= k <= n, got k = {}, n = {}", self.k, self.n));
        }
        match self.mode {
            Mode::Eigen => {
                if self.k >= self.n {
                    return invalid(format!(
                        "eigen mode requires k < n (got k = {}, n = {}); k = n is allowed in solve mode",
                        self.k, self.n
                    ));
                }
                if p_given && self.p != self.k as f64 + 1.0 {
                    return invalid(format!("eigen mode fixes p = k+1 = {}, got problem.p = {}", self.k + 1, self.p));
                }
                if !self.allow_non_even && !self.data.is_even() {
                    return invalid(format!(
                        "eigen mode requires even data, '{}' is not even; pass --allow-non-even to run without the existence guarantee",
                        self.data
                    ));
                }
                if let Some(list) = &self.schedule.p_list {
                    if list.iter().any(|&p| p <= self.k as f64 + 1.0) || list.windows(2).any(|w| w[1] >= w[0]) {
                        return invalid("schedule.p_list must be strictly decreasing and above k+1".into());
                    }
                } else if !(self.schedule.base > 1.0) || self.schedule.steps == 0 {
                    return invalid("schedule.base must exceed 1 and schedule.steps must be positive".into());
                }
            }
            Mode::Solve | Mode::Flow => {
                if !(self.p > self.k as f64 + 1.0) {
                    return invalid(format!(
                        "{} mode needs p > k+1 = {}, got p = {}; use eigen mode for p = k+1",
                        self.mode,
                        self.k + 1,
                        self.p
                    ));
                }
            }
            Mode::Validate => unreachable!(),
        }
        if !(self.lambda > 0.0) {
            return invalid(format!("problem.lambda must be positive, got {}", self.lambda));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                return invalid(format!("solver.tol must be positive, got {t}"));
            }
        }
        if !(self.perturbation >= 0.0 && self.perturbation < 0.5) || !(self.flow.perturbation >= 0.0 && self.flow.perturbation < 0.5) {
            return invalid("perturbation amplitudes must lie in [0, 0.5)".into());
        }
        if !(self.flow.t_max >= 0.0) || !(self.flow.stop_tol > 0.0) || !(self.flow.c_cfl > 0.0) {
            return invalid("flow.t_max must be >= 0, flow.stop_tol and flow.c_cfl positive".into());
        }
        if self.resolution.dim() != self.n {
            return invalid("grid resolution does not match problem.n".into());
        }
        let grid = Arc::new(build_grid(self.resolution).map_err(|e| ConfigError::Invalid(e.to_string()))?);
        preset_function(&self.data, &grid)?;
        Ok(())
    }

    /// `f` and `ψ` sampled on the configured grid.
    pub fn data_fields(&self) -> Result<(ScalarField, ScalarField), ConfigError> {
        let grid = Arc::new(build_grid(self.resolution).map_err(|e| ConfigError::Invalid(e.to_string()))?);
        let d = preset_function(&self.data, &grid)?;
        let inv = d.map(|v| 1.0 / v);
        Ok(match self.data_role {
            DataRole::F => (d, inv),
            DataRole::Psi => (inv, d),
        })
    }

    /// Effective settings as canonical `key = value` pairs (sorted).
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("mode", self.mode.to_string());
        put("seed", self.seed.to_string());
        put("allow_non_even", self.allow_non_even.to_string());
        if let Some(s) = &self.solution {
            put("validate.solution", s.display().to_string());
        }
        if let Some(t) = self.residual_tol {
            put("validate.residual_tol", t.to_string());
        }
        if self.mode == Mode::Validate {
            return m;
        }
        put("problem.n", self.n.to_string());
        put("problem.k", self.k.to_string());
        put("problem.p", self.p.to_string());
        put("problem.lambda", self.lambda.to_string());
        match self.data_role {
            DataRole::F => put("problem.f", self.data.to_string()),
            DataRole::Psi => put("problem.psi", self.data.to_string()),
        }
        match self.resolution {
            Resolution::Circle { n } => put("grid.points", n.to_string()),
            Resolution::Sphere { n_theta, n_phi } => {
                put("grid.n_theta", n_theta.to_string());
                put("grid.n_phi", n_phi.to_string());
            }
        }
        if let Some(t) = self.tol {
            put("solver.tol", t.to_string());
        }
        put("solver.max_iter", self.max_iter.to_string());
        put("solver.margin", self.margin.to_string());
        put("solver.perturbation", self.perturbation.to_string());
        match self.mode {
            Mode::Eigen => {
                match &self.schedule.p_list {
                    Some(list) => {
                        let parts: Vec<String> = list.iter().map(|p| p.to_string()).collect();
                        put("schedule.p_list", parts.join(","));
                    }
                    None => {
                        put("schedule.base", self.schedule.base.to_string());
                        put("schedule.steps", self.schedule.steps.to_string());
                    }
                }
                put("schedule.warm_start", self.schedule.warm_start.to_string());
                put("schedule.polish", self.schedule.polish.to_string());
            }
            Mode::Flow => {
                put("flow.t_max", self.flow.t_max.to_string());
                put("flow.stop_tol", self.flow.stop_tol.to_string());
                put("flow.c_cfl", self.flow.c_cfl.to_string());
                put("flow.perturbation", self.flow.perturbation.to_string());
            }
            _ => {}
        }
        put("output.mesh", self.mesh.to_string());
        m
    }

    /// The echo rendered back into config text; parsing it reproduces the run.
    pub fn to_text(&self) -> String {
        self.echo().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
