//! Flat `key = value` configuration with `[section]` headers.
//!
//! ```text
//! [grid]
//! dim = 2
//! extent = 10, 10
//! cells = 64, 64
//!
//! [model] chi=1 mu=10 xi=1
//! ```
//!
//! Several `key=value` pairs may share a line (without spaces around `=`),
//! including the header line. `#` starts a comment. Unknown sections and
//! keys are rejected, and every value is validated here.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::grid::GridSpec;
use crate::model::{ModelParams, Scenario};
use crate::output::format_f64;
use crate::stepper::{SolverConfig, TimeScheme};
use crate::sweep::{SweepMode, SweepPlan};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{key} {constraint}")]
    Validation { key: String, constraint: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(key: &str, constraint: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        key: key.to_string(),
        constraint: constraint.into(),
    }
}

const SECTIONS: [(&str, &[&str]); 7] = [
    ("grid", &["dim", "extent", "cells"]),
    ("model", &["chi", "xi", "mu", "eta", "tau"]),
    (
        "solver",
        &[
            "t_end",
            "cfl_safety",
            "dt_max",
            "blowup_threshold",
            "elliptic_tol",
            "elliptic_max_iter",
            "anchor_time",
            "time_scheme",
            "freeze_v",
        ],
    ),
    ("scenario", &["name", "amplitude", "sigma", "center", "w_bar", "seed", "perturb_w"]),
    ("outputs", &["dir", "cadence", "p_values", "snapshots"]),
    ("sweep", &["mode", "fixed_value", "theta", "repetitions", "workers"]),
    ("ode", &["y0", "dt"]),
];

fn known_keys(section: &str) -> Option<&'static [&'static str]> {
    SECTIONS.iter().find(|(s, _)| *s == section).map(|(_, keys)| *keys)
}

/// Smallest cell count per axis accepted for simulations.
pub const MIN_RUN_CELLS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub p_values: Vec<f64>,
    pub snapshots: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSection {
    pub mode: SweepMode,
    pub fixed_value: f64,
    pub theta: Vec<f64>,
    pub repetitions: usize,
    /// `None` picks the available parallelism.
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OdeSection {
    pub y0: [f64; 3],
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub grid: Option<Arc<GridSpec>>,
    pub model: ModelParams,
    pub solver: SolverConfig,
    pub scenario: Scenario,
    pub outputs: OutputConfig,
    pub sweep: Option<SweepSection>,
    pub ode: Option<OdeSection>,
}

struct Entry {
    value: String,
    line: usize,
}

struct Sections {
    map: BTreeMap<String, BTreeMap<String, Entry>>,
}

impl Sections {
    fn has(&self, section: &str) -> bool {
        self.map.contains_key(section)
    }

    fn take(&mut self, section: &str, key: &str) -> Option<(String, String)> {
        let entry = self.map.get_mut(section)?.remove(key)?;
        Some((format!("{section}.{key}"), entry.value))
    }

    fn f64_opt(&mut self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        self.take(section, key)
            .map(|(k, v)| parse_f64(&k, &v))
            .transpose()
    }

    fn f64_or(&mut self, section: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.f64_opt(section, key)?.unwrap_or(default))
    }

    fn f64_req(&mut self, section: &str, key: &str) -> Result<f64, ConfigError> {
        self.f64_opt(section, key)?
            .ok_or_else(|| invalid(&format!("{section}.{key}"), "is required"))
    }

    fn usize_opt(&mut self, section: &str, key: &str) -> Result<Option<usize>, ConfigError> {
        self.take(section, key)
            .map(|(k, v)| {
                v.parse::<usize>()
                    .map_err(|_| invalid(&k, format!("must be a nonnegative integer, got '{v}'")))
            })
            .transpose()
    }

    fn list_opt(&mut self, section: &str, key: &str) -> Result<Option<(String, Vec<f64>)>, ConfigError> {
        self.take(section, key)
            .map(|(k, v)| {
                let items = v
                    .split(',')
                    .map(|s| parse_f64(&k, s.trim()))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((k, items))
            })
            .transpose()
    }

    fn bool_or(&mut self, section: &str, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.take(section, key) {
            None => Ok(default),
            Some((k, v)) => match v.as_str() {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(invalid(&k, format!("must be true or false, got '{v}'"))),
            },
        }
    }

    fn string_opt(&mut self, section: &str, key: &str) -> Option<(String, String)> {
        self.take(section, key)
    }

    /// Rejects keys the chosen scenario does not use.
    fn finish(self) -> Result<(), ConfigError> {
        for (section, entries) in self.map {
            if let Some((key, entry)) = entries.into_iter().next() {
                return Err(ConfigError::Parse {
                    line: entry.line,
                    message: format!("{section}.{key} is not used by this scenario"),
                });
            }
        }
        Ok(())
    }
}

fn parse_f64(key: &str, s: &str) -> Result<f64, ConfigError> {
    s.parse::<f64>()
        .map_err(|_| invalid(key, format!("must be a number, got '{s}'")))
}

fn tokenize(text: &str) -> Result<Sections, ConfigError> {
    let mut map: BTreeMap<String, BTreeMap<String, Entry>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let mut rest = raw.split('#').next().unwrap_or("").trim();
        if rest.is_empty() {
            continue;
        }
        if let Some(after) = rest.strip_prefix('[') {
            let close = after.find(']').ok_or_else(|| ConfigError::Parse {
                line,
                message: "unterminated section header".into(),
            })?;
            let name = after[..close].trim();
            if known_keys(name).is_none() {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("unknown section [{name}]"),
                });
            }
            if map.contains_key(name) {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("section [{name}] appears twice"),
                });
            }
            map.insert(name.to_string(), BTreeMap::new());
            current = Some(name.to_string());
            rest = after[close + 1..].trim();
            if rest.is_empty() {
                continue;
            }
        }
        let section = current.as_ref().ok_or_else(|| ConfigError::Parse {
            line,
            message: "key outside of any section".into(),
        })?;
        let pairs: Vec<(&str, &str)> = if rest.matches('=').count() == 1 {
            let (k, v) = rest.split_once('=').expect("one '='");
            vec![(k.trim(), v.trim())]
        } else {
            rest.split_whitespace()
                .map(|tok| {
                    tok.split_once('=').ok_or_else(|| ConfigError::Parse {
                        line,
                        message: format!("expected key=value, got '{tok}'"),
                    })
                })
                .collect::<Result<_, _>>()?
        };
        if pairs.is_empty() {
            return Err(ConfigError::Parse {
                line,
                message: format!("expected key = value, got '{rest}'"),
            });
        }
        let entries = map.get_mut(section).expect("section inserted");
        for (key, value) in pairs {
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("expected key = value, got '{rest}'"),
                });
            }
            if !known_keys(section).is_some_and(|keys| keys.contains(&key)) {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("unknown key {section}.{key}"),
                });
            }
            if entries.contains_key(key) {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("duplicate key {section}.{key}"),
                });
            }
            entries.insert(
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    line,
                },
            );
        }
    }
    Ok(Sections { map })
}

fn per_axis(key: &str, values: Vec<f64>, dim: usize) -> Result<Vec<f64>, ConfigError> {
    match values.len() {
        1 => Ok(vec![values[0]; dim]),
        n if n == dim => Ok(values),
        n => Err(invalid(key, format!("needs 1 or {dim} entries, got {n}"))),
    }
}

fn parse_grid(s: &mut Sections) -> Result<Option<Arc<GridSpec>>, ConfigError> {
    if !s.has("grid") {
        return Ok(None);
    }
    let dim = s
        .usize_opt("grid", "dim")?
        .ok_or_else(|| invalid("grid.dim", "is required"))?;
    if !(1..=3).contains(&dim) {
        return Err(invalid("grid.dim", format!("must be 1, 2 or 3, got {dim}")));
    }
    let (ek, extent) = s
        .list_opt("grid", "extent")?
        .ok_or_else(|| invalid("grid.extent", "is required"))?;
    let extent = per_axis(&ek, extent, dim)?;
    if let Some(bad) = extent.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(invalid("grid.extent", format!("entries must be > 0, got {bad}")));
    }
    let (ck, cells) = s
        .list_opt("grid", "cells")?
        .ok_or_else(|| invalid("grid.cells", "is required"))?;
    let cells = per_axis(&ck, cells, dim)?;
    let mut counts = Vec::with_capacity(dim);
    for c in cells {
        if c.fract() != 0.0 || c < MIN_RUN_CELLS as f64 || c > 1e9 {
            return Err(invalid(
                "grid.cells",
                format!("entries must be integers >= {MIN_RUN_CELLS}, got {c}"),
            ));
        }
        counts.push(c as usize);
    }
    let grid = GridSpec::new(&extent, &counts).map_err(|e| invalid("grid", e.to_string()))?;
    Ok(Some(Arc::new(grid)))
}

fn parse_model(s: &mut Sections) -> Result<ModelParams, ConfigError> {
    let chi = s.f64_req("model", "chi")?;
    if !(chi.is_finite() && chi > 0.0) {
        return Err(invalid("model.chi", "must be > 0"));
    }
    let xi = s.f64_req("model", "xi")?;
    let mu = s.f64_req("model", "mu")?;
    let eta = s.f64_or("model", "eta", 0.0)?;
    for (key, v) in [("model.xi", xi), ("model.mu", mu), ("model.eta", eta)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(invalid(key, "must be >= 0"));
        }
    }
    let tau = match s.usize_opt("model", "tau")? {
        None => 1,
        Some(t @ (0 | 1)) => t as u8,
        Some(t) => return Err(invalid("model.tau", format!("must be 0 or 1, got {t}"))),
    };
    Ok(ModelParams {
        chi,
        xi,
        mu,
        eta,
        tau,
    })
}

fn parse_solver(s: &mut Sections) -> Result<SolverConfig, ConfigError> {
    let t_end = s.f64_req("solver", "t_end")?;
    let mut c = SolverConfig::new(t_end);
    c.cfl_safety = s.f64_or("solver", "cfl_safety", c.cfl_safety)?;
    c.dt_max = s.f64_or("solver", "dt_max", c.dt_max)?;
    c.blowup_threshold = s.f64_or("solver", "blowup_threshold", c.blowup_threshold)?;
    c.elliptic_tol = s.f64_or("solver", "elliptic_tol", c.elliptic_tol)?;
    c.elliptic_max_iter = s
        .usize_opt("solver", "elliptic_max_iter")?
        .unwrap_or(c.elliptic_max_iter);
    c.anchor_time = s.f64_or("solver", "anchor_time", c.anchor_time)?;
    c.freeze_v = s.bool_or("solver", "freeze_v", false)?;
    if let Some((k, v)) = s.string_opt("solver", "time_scheme") {
        c.time_scheme = match v.as_str() {
            "explicit" => TimeScheme::Explicit,
            "imex-diffusion" => TimeScheme::ImexDiffusion,
            _ => return Err(invalid(&k, format!("must be explicit or imex-diffusion, got '{v}'"))),
        };
    }
    Ok(c)
}

fn validate_solver(c: &SolverConfig) -> Result<(), ConfigError> {
    let checks: [(&str, bool, &str); 8] = [
        ("solver.t_end", c.t_end.is_finite() && c.t_end > 0.0, "must be finite and > 0"),
        ("solver.cfl_safety", c.cfl_safety > 0.0 && c.cfl_safety <= 1.0, "must be in (0, 1]"),
        ("solver.dt_max", c.dt_max > 0.0, "must be > 0"),
        ("outputs.cadence", c.output_every.is_finite() && c.output_every > 0.0, "must be finite and > 0"),
        ("solver.blowup_threshold", c.blowup_threshold > 0.0, "must be > 0"),
        ("solver.elliptic_tol", c.elliptic_tol.is_finite() && c.elliptic_tol > 0.0, "must be finite and > 0"),
        ("solver.elliptic_max_iter", c.elliptic_max_iter >= 1, "must be >= 1"),
        (
            "solver.anchor_time",
            c.anchor_time >= 0.0 && c.anchor_time < c.t_end,
            "must be >= 0 and < solver.t_end",
        ),
    ];
    for (key, ok, constraint) in checks {
        if !ok {
            return Err(invalid(key, constraint));
        }
    }
    Ok(())
}

fn parse_scenario(s: &mut Sections, grid: Option<&GridSpec>) -> Result<Scenario, ConfigError> {
    let name = s
        .string_opt("scenario", "name")
        .map(|(_, v)| v)
        .unwrap_or_else(|| "steady".to_string());
    let nonneg = |key: &str, v: f64| {
        if v.is_finite() && v >= 0.0 {
            Ok(v)
        } else {
            Err(invalid(key, "must be >= 0"))
        }
    };
    let scenario = match name.as_str() {
        "steady" => Scenario::Steady,
        "gaussian-bump" => {
            let amplitude = nonneg("scenario.amplitude", s.f64_or("scenario", "amplitude", 1.0)?)?;
            let sigma = s.f64_or("scenario", "sigma", 0.1)?;
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(invalid("scenario.sigma", "must be > 0"));
            }
            let w_bar = nonneg("scenario.w_bar", s.f64_or("scenario", "w_bar", 0.0)?)?;
            let center = match s.list_opt("scenario", "center")? {
                None => None,
                Some((k, c)) => {
                    if let Some(g) = grid {
                        if c.len() != g.dim() {
                            return Err(invalid(&k, format!("needs {} entries", g.dim())));
                        }
                    }
                    Some(c)
                }
            };
            Scenario::GaussianBump {
                amplitude,
                sigma,
                center,
                w_bar,
            }
        }
        "random-perturb" => {
            let amplitude = nonneg("scenario.amplitude", s.f64_or("scenario", "amplitude", 0.1)?)?;
            let w_bar = nonneg("scenario.w_bar", s.f64_or("scenario", "w_bar", 0.0)?)?;
            let seed = match s.take("scenario", "seed") {
                None => 0,
                Some((k, v)) => v
                    .parse::<u64>()
                    .map_err(|_| invalid(&k, format!("must be a nonnegative integer, got '{v}'")))?,
            };
            let perturb_w = s.bool_or("scenario", "perturb_w", false)?;
            Scenario::RandomPerturb {
                amplitude,
                w_bar,
                seed,
                perturb_w,
            }
        }
        other => {
            return Err(invalid(
                "scenario.name",
                format!("must be steady, gaussian-bump or random-perturb, got '{other}'"),
            ))
        }
    };
    Ok(scenario)
}

fn parse_outputs(s: &mut Sections, base_dir: &Path, t_end: f64) -> Result<(OutputConfig, f64), ConfigError> {
    let dir = s
        .string_opt("outputs", "dir")
        .map(|(_, v)| PathBuf::from(v))
        .unwrap_or_else(|| PathBuf::from("output"));
    let dir = if dir.is_absolute() { dir } else { base_dir.join(dir) };
    let cadence = s.f64_or("outputs", "cadence", t_end / 100.0)?;
    let p_values = match s.list_opt("outputs", "p_values")? {
        None => vec![2.0, 4.0],
        Some((k, ps)) => {
            if ps.iter().any(|p| !(p.is_finite() && *p >= 1.0)) {
                return Err(invalid(&k, "entries must be finite and >= 1"));
            }
            ps
        }
    };
    let snapshots = s.bool_or("outputs", "snapshots", false)?;
    Ok((
        OutputConfig {
            dir,
            p_values,
            snapshots,
        },
        cadence,
    ))
}

fn parse_sweep(s: &mut Sections) -> Result<Option<SweepSection>, ConfigError> {
    if !s.has("sweep") {
        return Ok(None);
    }
    let (mk, mode) = s
        .string_opt("sweep", "mode")
        .ok_or_else(|| invalid("sweep.mode", "is required"))?;
    let mode = SweepMode::parse(&mode)
        .ok_or_else(|| invalid(&mk, format!("must be fix_mu_vary_chi or fix_chi_vary_mu, got '{mode}'")))?;
    let fixed_value = s.f64_req("sweep", "fixed_value")?;
    if !(fixed_value.is_finite() && fixed_value > 0.0) {
        return Err(invalid("sweep.fixed_value", "must be > 0"));
    }
    let (tk, theta) = s
        .list_opt("sweep", "theta")?
        .ok_or_else(|| invalid("sweep.theta", "is required"))?;
    if theta.iter().any(|t| !(t.is_finite() && *t > 0.0)) || theta.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid(&tk, "must be positive and strictly increasing"));
    }
    let repetitions = s.usize_opt("sweep", "repetitions")?.unwrap_or(1);
    if repetitions == 0 {
        return Err(invalid("sweep.repetitions", "must be >= 1"));
    }
    let workers = s.usize_opt("sweep", "workers")?;
    if workers == Some(0) {
        return Err(invalid("sweep.workers", "must be >= 1"));
    }
    Ok(Some(SweepSection {
        mode,
        fixed_value,
        theta,
        repetitions,
        workers,
    }))
}

fn parse_ode(s: &mut Sections) -> Result<Option<OdeSection>, ConfigError> {
    if !s.has("ode") {
        return Ok(None);
    }
    let (k, y0) = s
        .list_opt("ode", "y0")?
        .ok_or_else(|| invalid("ode.y0", "is required"))?;
    if y0.len() != 3 || y0.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(invalid(&k, "needs three finite entries >= 0"));
    }
    let dt = s.f64_or("ode", "dt", 1e-3)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(invalid("ode.dt", "must be > 0"));
    }
    Ok(Some(OdeSection {
        y0: [y0[0], y0[1], y0[2]],
        dt,
    }))
}

impl RunConfig {
    /// Parses and validates `text`. Relative output paths resolve against
    /// `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut s = tokenize(text)?;
        let grid = parse_grid(&mut s)?;
        if !s.has("model") {
            return Err(invalid("model", "section is required"));
        }
        let model = parse_model(&mut s)?;
        if !s.has("solver") {
            return Err(invalid("solver", "section is required"));
        }
        let mut solver = parse_solver(&mut s)?;
        let scenario = parse_scenario(&mut s, grid.as_deref())?;
        let (outputs, cadence) = parse_outputs(&mut s, base_dir, solver.t_end)?;
        solver.output_every = cadence;
        validate_solver(&solver)?;
        let sweep = parse_sweep(&mut s)?;
        let ode = parse_ode(&mut s)?;
        s.finish()?;
        if let Some(g) = &grid {
            scenario
                .validate(g)
                .map_err(|e| invalid("scenario", e.to_string()))?;
        }
        Ok(Self {
            grid,
            model,
            solver,
            scenario,
            outputs,
            sweep,
            ode,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let base = if base.as_os_str().is_empty() {
            PathBuf::from(".")
        } else {
            base
        };
        let base = std::fs::canonicalize(&base).unwrap_or(base);
        Self::parse(&text, &base)
    }

    pub fn require_grid(&self) -> Result<&Arc<GridSpec>, ConfigError> {
        self.grid
            .as_ref()
            .ok_or_else(|| invalid("grid", "section is required for this command"))
    }

    /// The sweep plan, when a `[sweep]` section and a grid are present.
    pub fn sweep_plan(&self, default_workers: usize) -> Result<SweepPlan, ConfigError> {
        let sweep = self
            .sweep
            .as_ref()
            .ok_or_else(|| invalid("sweep", "section is required for this command"))?;
        Ok(SweepPlan {
            mode: sweep.mode,
            fixed_value: sweep.fixed_value,
            theta_values: sweep.theta.clone(),
            base_model: self.model,
            base_solver: self.solver.clone(),
            grid: Arc::clone(self.require_grid()?),
            scenario: self.scenario.clone(),
            repetitions: sweep.repetitions,
            workers: sweep.workers.unwrap_or(default_workers),
        })
    }

    /// The effective configuration, with every default spelled out. Parsing
    /// the result yields an identical configuration.
    pub fn to_config_text(&self) -> String {
        let list = |xs: &[f64]| xs.iter().map(|x| format_f64(*x)).collect::<Vec<_>>().join(", ");
        let mut out = String::new();
        if let Some(g) = &self.grid {
            let cells: Vec<String> = g.cells().iter().map(|c| c.to_string()).collect();
            let _ = writeln!(out, "[grid]");
            let _ = writeln!(out, "dim = {}", g.dim());
            let _ = writeln!(out, "extent = {}", list(g.extent()));
            let _ = writeln!(out, "cells = {}", cells.join(", "));
            out.push('\n');
        }
        let m = &self.model;
        let _ = writeln!(out, "[model]");
        let _ = writeln!(out, "chi = {}", format_f64(m.chi));
        let _ = writeln!(out, "xi = {}", format_f64(m.xi));
        let _ = writeln!(out, "mu = {}", format_f64(m.mu));
        let _ = writeln!(out, "eta = {}", format_f64(m.eta));
        let _ = writeln!(out, "tau = {}", m.tau);
        out.push('\n');
        let c = &self.solver;
        let _ = writeln!(out, "[solver]");
        let _ = writeln!(out, "t_end = {}", format_f64(c.t_end));
        let _ = writeln!(out, "cfl_safety = {}", format_f64(c.cfl_safety));
        let _ = writeln!(out, "dt_max = {}", format_f64(c.dt_max));
        let _ = writeln!(out, "blowup_threshold = {}", format_f64(c.blowup_threshold));
        let _ = writeln!(out, "elliptic_tol = {}", format_f64(c.elliptic_tol));
        let _ = writeln!(out, "elliptic_max_iter = {}", c.elliptic_max_iter);
        let _ = writeln!(out, "anchor_time = {}", format_f64(c.anchor_time));
        let _ = writeln!(out, "time_scheme = {}", c.time_scheme.as_str());
        let _ = writeln!(out, "freeze_v = {}", c.freeze_v);
        out.push('\n');
        let _ = writeln!(out, "[scenario]");
        let _ = writeln!(out, "name = {}", self.scenario.name());
        match &self.scenario {
            Scenario::Steady => {}
            Scenario::GaussianBump {
                amplitude,
                sigma,
                center,
                w_bar,
            } => {
                let _ = writeln!(out, "amplitude = {}", format_f64(*amplitude));
                let _ = writeln!(out, "sigma = {}", format_f64(*sigma));
                if let Some(c) = center {
                    let _ = writeln!(out, "center = {}", list(c));
                }
                let _ = writeln!(out, "w_bar = {}", format_f64(*w_bar));
            }
            Scenario::RandomPerturb {
                amplitude,
                w_bar,
                seed,
                perturb_w,
            } => {
                let _ = writeln!(out, "amplitude = {}", format_f64(*amplitude));
                let _ = writeln!(out, "w_bar = {}", format_f64(*w_bar));
                let _ = writeln!(out, "seed = {seed}");
                let _ = writeln!(out, "perturb_w = {perturb_w}");
            }
        }
        out.push('\n');
        let o = &self.outputs;
        let _ = writeln!(out, "[outputs]");
        let _ = writeln!(out, "dir = {}", o.dir.display());
        let _ = writeln!(out, "cadence = {}", format_f64(c.output_every));
        let _ = writeln!(out, "p_values = {}", list(&o.p_values));
        let _ = writeln!(out, "snapshots = {}", o.snapshots);
        if let Some(sw) = &self.sweep {
            out.push('\n');
            let _ = writeln!(out, "[sweep]");
            let _ = writeln!(out, "mode = {}", sw.mode.as_str());
            let _ = writeln!(out, "fixed_value = {}", format_f64(sw.fixed_value));
            let _ = writeln!(out, "theta = {}", list(&sw.theta));
            let _ = writeln!(out, "repetitions = {}", sw.repetitions);
            if let Some(w) = sw.workers {
                let _ = writeln!(out, "workers = {w}");
            }
        }
        if let Some(ode) = &self.ode {
            out.push('\n');
            let _ = writeln!(out, "[ode]");
            let _ = writeln!(out, "y0 = {}", list(&ode.y0));
            let _ = writeln!(out, "dt = {}", format_f64(ode.dt));
        }
        out
    }
}
