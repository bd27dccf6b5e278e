use crate::diagnostics::{self, DiagnosticsRecord};
use crate::grid;
use crate::model::{InitialData, ModelParams};

use super::{stable_dt, step, SimError, SimState, SolverConfig};

/// Receives every diagnostics record and the state at each output time.
pub trait RunObserver {
    fn on_record(&mut self, _record: &DiagnosticsRecord) {}
    fn on_output(&mut self, _state: &SimState) {}
}

pub struct NullObserver;

impl RunObserver for NullObserver {}

#[derive(Clone, Debug, PartialEq)]
pub enum Termination {
    Completed,
    /// sup u crossed the blow-up threshold or a field became non-finite.
    BlewUp { t: f64 },
    CflFailed { t: f64 },
    /// Elliptic or IMEX linear solve failed, or the inputs were rejected.
    SolverFailed { t: f64, message: String },
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::BlewUp { .. } => "blew_up",
            Termination::CflFailed { .. } => "cfl_failed",
            Termination::SolverFailed { .. } => "solver_failed",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub halvings: usize,
    pub clamped_cells: usize,
    /// Accepted steps after which u, v, w ≥ 0 or w ≤ cap failed.
    pub invariant_violations: usize,
    pub max_sup_u: f64,
    pub t_of_max: f64,
    pub min_u: f64,
    pub min_v: f64,
    pub min_w: f64,
    /// Largest `sup w − cap` seen after any accepted step.
    pub max_w_excess: f64,
    pub max_repr_residual: f64,
    /// Largest Δw-bound violation divided by its tolerance, over records.
    pub max_lemma22_ratio: f64,
    pub min_dt: f64,
    pub max_dt: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub termination: Termination,
    pub records: Vec<DiagnosticsRecord>,
    pub summary: RunSummary,
    pub final_state: Option<SimState>,
}

fn snap(t: f64, target: f64) -> f64 {
    if (t - target).abs() <= 1e-12 * target.abs().max(1.0) {
        target
    } else {
        t
    }
}

/// Integrates from t = 0 to `cfg.t_end`, emitting a record every
/// `cfg.output_every` and at termination.
///
/// The anchor is captured when t reaches `cfg.anchor_time`. Step failures
/// end the run and are reported in [`RunOutcome::termination`].
pub fn run(
    init: InitialData,
    p: &ModelParams,
    cfg: &SolverConfig,
    lp_exponents: &[f64],
    observer: &mut dyn RunObserver,
) -> RunOutcome {
    let mut summary = RunSummary {
        min_u: f64::INFINITY,
        min_v: f64::INFINITY,
        min_w: f64::INFINITY,
        max_w_excess: f64::NEG_INFINITY,
        max_sup_u: f64::NEG_INFINITY,
        min_dt: f64::INFINITY,
        ..RunSummary::default()
    };
    let failed = |message: String, summary| RunOutcome {
        termination: Termination::SolverFailed { t: 0.0, message },
        records: Vec::new(),
        summary,
        final_state: None,
    };
    if let Err(e) = cfg.validate() {
        return failed(e.to_string(), summary);
    }
    let mut state = match SimState::new(init, p, cfg) {
        Ok(s) => s,
        Err(e) => return failed(e.to_string(), summary),
    };

    let mut records = Vec::new();
    let mut emit = |state: &SimState, dt: f64, summary: &mut RunSummary, records: &mut Vec<DiagnosticsRecord>| {
        let rec = diagnostics::record(state, p, lp_exponents, dt);
        summary.max_repr_residual = summary.max_repr_residual.max(rec.repr_residual);
        if rec.lemma22_max_violation > 0.0 {
            let tol = diagnostics::lemma22_tolerance(state, dt).unwrap_or(0.0);
            let ratio = if tol > 0.0 {
                rec.lemma22_max_violation / tol
            } else {
                f64::INFINITY
            };
            summary.max_lemma22_ratio = summary.max_lemma22_ratio.max(ratio);
        }
        observer.on_record(&rec);
        observer.on_output(state);
        records.push(rec);
    };
    let observe = |state: &SimState, summary: &mut RunSummary| {
        let sup_u = grid::max_value(&state.u);
        if sup_u > summary.max_sup_u {
            summary.max_sup_u = sup_u;
            summary.t_of_max = state.t;
        }
        summary.min_u = summary.min_u.min(grid::min_value(&state.u));
        summary.min_v = summary.min_v.min(grid::min_value(&state.v));
        summary.min_w = summary.min_w.min(grid::min_value(&state.w));
        summary.max_w_excess = summary
            .max_w_excess
            .max(grid::max_value(&state.w) - state.w_cap());
    };

    let mut anchor_pending = true;
    if cfg.anchor_time <= 0.0 {
        state.capture_anchor();
        anchor_pending = false;
    }
    observe(&state, &mut summary);
    emit(&state, 0.0, &mut summary, &mut records);

    let next_output = |k: usize| (k as f64 * cfg.output_every).min(cfg.t_end);
    let mut output_index = 1usize;
    let mut next_out = next_output(output_index);
    let mut last_dt = 0.0;
    let mut termination = Termination::Completed;

    while state.t < cfg.t_end {
        let mut target = next_out;
        if anchor_pending {
            target = target.min(cfg.anchor_time);
        }
        let dt = match stable_dt(&state, p, cfg, target) {
            Ok(dt) => dt,
            Err(_) => {
                emit(&state, last_dt, &mut summary, &mut records);
                termination = Termination::BlewUp { t: state.t };
                break;
            }
        };
        match step(&mut state, p, cfg, dt) {
            Ok(info) => {
                summary.steps += 1;
                summary.halvings += info.halvings as usize;
                summary.clamped_cells += info.clamped;
                if !info.invariants_hold {
                    summary.invariant_violations += 1;
                }
                summary.min_dt = summary.min_dt.min(info.dt);
                summary.max_dt = summary.max_dt.max(info.dt);
                last_dt = info.dt;
                state.t = snap(state.t, target);
                observe(&state, &mut summary);
            }
            Err(SimError::Diverged { .. }) => {
                summary.steps += 1;
                observe(&state, &mut summary);
                emit(&state, dt, &mut summary, &mut records);
                termination = Termination::BlewUp { t: state.t };
                break;
            }
            Err(SimError::CflViolation { t, .. }) => {
                emit(&state, last_dt, &mut summary, &mut records);
                termination = Termination::CflFailed { t };
                break;
            }
            Err(e) => {
                emit(&state, last_dt, &mut summary, &mut records);
                termination = Termination::SolverFailed {
                    t: state.t,
                    message: e.to_string(),
                };
                break;
            }
        }
        if anchor_pending && state.t >= cfg.anchor_time {
            state.capture_anchor();
            anchor_pending = false;
        }
        if state.t >= next_out {
            emit(&state, last_dt, &mut summary, &mut records);
            while output_index as f64 * cfg.output_every <= state.t {
                output_index += 1;
            }
            next_out = next_output(output_index);
        }
    }

    if summary.min_dt == f64::INFINITY {
        summary.min_dt = 0.0;
    }
    RunOutcome {
        termination,
        records,
        summary,
        final_state: Some(state),
    }
}
