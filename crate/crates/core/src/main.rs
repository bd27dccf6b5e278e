use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use taxisim::config::RunConfig;
use taxisim::diagnostics::{classify, mass_bound_check, ClassifyConfig, MassCheck};
use taxisim::model::ode_reference;
use taxisim::output::{self, format_f64};
use taxisim::stepper::{self, RunObserver, SimState, Termination};
use taxisim::sweep::run_sweep;

const EXIT_INVALID: u8 = 1;
const EXIT_DIVERGED: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(name = "taxisim", version, about = "Chemotaxis-haptotaxis simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its time series and verdict.
    Run { config: PathBuf },
    /// Run a θ sweep and write the sweep table and bracket summary.
    Sweep { config: PathBuf },
    /// Integrate the spatially homogeneous ODE and write ode.csv.
    Ode { config: PathBuf },
    /// Re-evaluate the mass bound and classification of a saved time series.
    Check {
        timeseries: PathBuf,
        /// Defaults to config_echo.cfg next to the time series.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

/// Error message plus the exit code it maps to.
struct Failure(u8, String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(EXIT_INVALID, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => cmd_run(&config),
        Command::Sweep { config } => cmd_sweep(&config),
        Command::Ode { config } => cmd_ode(&config),
        Command::Check { timeseries, config } => cmd_check(&timeseries, config.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

fn prepare(config: &Path) -> Result<RunConfig, Failure> {
    let cfg = RunConfig::load(config)?;
    let dir = &cfg.outputs.dir;
    std::fs::create_dir_all(dir).map_err(|e| Failure(EXIT_INVALID, format!("{}: {e}", dir.display())))?;
    output::write_file(&dir.join("config_echo.cfg"), &cfg.to_config_text())?;
    Ok(cfg)
}

struct SnapshotWriter {
    dir: PathBuf,
    index: usize,
    error: Option<output::OutputError>,
}

impl RunObserver for SnapshotWriter {
    fn on_output(&mut self, state: &SimState) {
        if self.error.is_some() {
            return;
        }
        let path = self.dir.join(format!("snapshot_{:05}.txt", self.index));
        self.index += 1;
        if let Err(e) = output::write_snapshot(state, &path) {
            self.error = Some(e);
        }
    }
}

fn mass_line(check: &MassCheck) -> String {
    match check {
        MassCheck::Skipped => "mass_check = skipped".to_string(),
        MassCheck::Checked {
            passed,
            bound,
            worst_margin,
            worst_t,
        } => format!(
            "mass_check = {}\nmass_bound = {}\nmass_worst_margin = {}\nmass_worst_t = {}",
            if *passed { "passed" } else { "failed" },
            format_f64(*bound),
            format_f64(*worst_margin),
            format_f64(*worst_t)
        ),
    }
}

fn cmd_run(config: &Path) -> Result<u8, Failure> {
    let cfg = prepare(config)?;
    let grid = cfg.require_grid()?;
    let init = cfg.scenario.initial_data(grid)?;
    let dir = cfg.outputs.dir.clone();
    let outcome = if cfg.outputs.snapshots {
        let mut writer = SnapshotWriter {
            dir: dir.clone(),
            index: 0,
            error: None,
        };
        let outcome = stepper::run(init, &cfg.model, &cfg.solver, &cfg.outputs.p_values, &mut writer);
        if let Some(e) = writer.error {
            return Err(e.into());
        }
        outcome
    } else {
        stepper::run(init, &cfg.model, &cfg.solver, &cfg.outputs.p_values, &mut stepper::NullObserver)
    };
    output::write_timeseries(&dir.join("timeseries.csv"), &outcome.records, &cfg.outputs.p_values)?;

    let mut report = format!("termination = {}\n", outcome.termination.as_str());
    if let Termination::SolverFailed { message, .. } = &outcome.termination {
        report.push_str(&format!("message = {message}\n"));
    }
    if !outcome.records.is_empty() {
        let verdict = classify(&outcome.records, &ClassifyConfig::from(&cfg.solver));
        report.push_str(&format!(
            "verdict = {}\nmax_sup_u = {}\nt_of_max = {}\n",
            verdict.classification.as_str(),
            format_f64(verdict.max_sup_u),
            format_f64(verdict.t_of_max)
        ));
        if let Some(t) = verdict.crossing_time {
            report.push_str(&format!("crossing_time = {}\n", format_f64(t)));
        }
        report.push_str(&mass_line(&mass_bound_check(&outcome.records, grid, &cfg.model)));
        report.push('\n');
    }
    let s = &outcome.summary;
    report.push_str(&format!(
        "steps = {}\nhalvings = {}\nclamped_cells = {}\ninvariant_violations = {}\nmax_repr_residual = {}\nmax_lemma22_ratio = {}\n",
        s.steps,
        s.halvings,
        s.clamped_cells,
        s.invariant_violations,
        format_f64(s.max_repr_residual),
        format_f64(s.max_lemma22_ratio)
    ));
    output::write_file(&dir.join("verdict.txt"), &report)?;
    print!("{report}");
    Ok(match outcome.termination {
        Termination::Completed => 0,
        Termination::BlewUp { .. } | Termination::CflFailed { .. } => EXIT_DIVERGED,
        Termination::SolverFailed { .. } => EXIT_SOLVER,
    })
}

/// Worker count from `TAXISIM_WORKERS`, which overrides the config.
fn env_workers() -> Result<Option<usize>, Failure> {
    match std::env::var("TAXISIM_WORKERS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Failure(EXIT_INVALID, format!("TAXISIM_WORKERS must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(None),
    }
}

fn cmd_sweep(config: &Path) -> Result<u8, Failure> {
    let cfg = prepare(config)?;
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut plan = cfg.sweep_plan(available)?;
    if let Some(n) = env_workers()? {
        plan.workers = n;
    }
    let results = run_sweep(&plan)?;
    let dir = &cfg.outputs.dir;
    output::write_file(&dir.join("sweep.csv"), &output::sweep_table_to_string(&results))?;
    let summary = output::sweep_summary(&results);
    output::write_file(&dir.join("sweep_summary.txt"), &summary)?;
    print!("{summary}");
    Ok(0)
}

fn cmd_ode(config: &Path) -> Result<u8, Failure> {
    let cfg = prepare(config)?;
    let ode = cfg
        .ode
        .as_ref()
        .ok_or_else(|| Failure(EXIT_INVALID, "ode section is required for this command".into()))?;
    let traj = ode_reference(&cfg.model, ode.y0, cfg.solver.t_end, ode.dt).map_err(|e| Failure(EXIT_DIVERGED, e.to_string()))?;
    let path = cfg.outputs.dir.join("ode.csv");
    output::write_file(&path, &output::ode_to_string(&traj))?;
    println!("wrote {}", path.display());
    Ok(0)
}

fn cmd_check(timeseries: &Path, config: Option<&Path>) -> Result<u8, Failure> {
    let series = output::read_timeseries(timeseries)?;
    let config_path = match config {
        Some(p) => p.to_path_buf(),
        None => timeseries
            .parent()
            .unwrap_or(Path::new("."))
            .join("config_echo.cfg"),
    };
    let cfg = RunConfig::load(&config_path)?;
    let grid = cfg.require_grid()?;
    if series.records.is_empty() {
        return Err(Failure(EXIT_INVALID, format!("{}: no records", timeseries.display())));
    }
    let verdict = classify(&series.records, &ClassifyConfig::from(&cfg.solver));
    let mass = mass_bound_check(&series.records, grid, &cfg.model);
    println!("records = {}", series.records.len());
    println!("verdict = {}", verdict.classification.as_str());
    println!("max_sup_u = {}", format_f64(verdict.max_sup_u));
    println!("t_of_max = {}", format_f64(verdict.t_of_max));
    println!("{}", mass_line(&mass));
    Ok(if mass.passed() { 0 } else { EXIT_DIVERGED })
}
