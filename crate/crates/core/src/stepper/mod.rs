//! Time integration of the coupled system.
//!
//! One step updates, in order: v (explicit, IMEX, or the elliptic solve for
//! τ = 0), then w, then u with the new v and w, then the time integrals of
//! v and ∇v used by the pointwise Δw diagnostic. The w-update without
//! matrix renewal is the exact exponential `w = w_base·exp(−∫v)` with the
//! trapezoidal time integral, so the stored integral and w never disagree.

mod elliptic;
mod run;

use std::sync::Arc;

use thiserror::Error;

use crate::grid::{self, Field, GridSpec, VectorField};
use crate::model::{self, InitialData, ModelError, ModelParams};

pub use elliptic::{solve_elliptic, solve_helmholtz, SolveStats};
pub use run::{run, NullObserver, RunObserver, RunOutcome, RunSummary, Termination};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("negative density persists after {halvings} step halvings at t = {t}")]
    CflViolation { t: f64, halvings: u32 },
    #[error("solution diverged at t = {t} (sup u = {sup_u})")]
    Diverged { t: f64, sup_u: f64 },
    #[error("linear solve did not converge after {iterations} iterations (residual {residual})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("no anchor snapshot has been captured")]
    AnchorMissing,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid solver setting: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeScheme {
    Explicit,
    /// Implicit diffusion for v, everything else explicit.
    ImexDiffusion,
}

impl TimeScheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            TimeScheme::Explicit => "explicit",
            TimeScheme::ImexDiffusion => "imex-diffusion",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub t_end: f64,
    pub cfl_safety: f64,
    pub dt_max: f64,
    /// Simulated-time spacing of diagnostics records.
    pub output_every: f64,
    pub blowup_threshold: f64,
    pub elliptic_tol: f64,
    pub elliptic_max_iter: usize,
    pub anchor_time: f64,
    pub time_scheme: TimeScheme,
    /// Holds v at its initial value; a test mode for the w-update.
    pub freeze_v: bool,
}

impl SolverConfig {
    pub const DEFAULT_CFL: f64 = 0.4;
    pub const DEFAULT_BLOWUP: f64 = 1e6;
    pub const DEFAULT_ELLIPTIC_TOL: f64 = 1e-10;
    pub const DEFAULT_ELLIPTIC_MAX_ITER: usize = 10_000;

    pub fn new(t_end: f64) -> Self {
        Self {
            t_end,
            cfl_safety: Self::DEFAULT_CFL,
            dt_max: f64::INFINITY,
            output_every: t_end / 100.0,
            blowup_threshold: Self::DEFAULT_BLOWUP,
            elliptic_tol: Self::DEFAULT_ELLIPTIC_TOL,
            elliptic_max_iter: Self::DEFAULT_ELLIPTIC_MAX_ITER,
            anchor_time: 0.0,
            time_scheme: TimeScheme::Explicit,
            freeze_v: false,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |msg: String| Err(SimError::InvalidConfig(msg));
        let positive = |name: &str, v: f64| {
            if v > 0.0 && !v.is_nan() {
                Ok(())
            } else {
                fail(format!("{name} must be > 0, got {v}"))
            }
        };
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return fail(format!("t_end must be finite and > 0, got {}", self.t_end));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return fail(format!("cfl_safety must be in (0, 1], got {}", self.cfl_safety));
        }
        positive("dt_max", self.dt_max)?;
        positive("output_every", self.output_every)?;
        positive("blowup_threshold", self.blowup_threshold)?;
        positive("elliptic_tol", self.elliptic_tol)?;
        if self.elliptic_max_iter == 0 {
            return fail("elliptic_max_iter must be >= 1".into());
        }
        if !(self.anchor_time >= 0.0 && self.anchor_time < self.t_end) {
            return fail(format!(
                "anchor_time must be in [0, t_end), got {}",
                self.anchor_time
            ));
        }
        Ok(())
    }
}

/// Fields frozen at the anchor time s₀.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub s0: f64,
    pub w_s0: Field,
    pub grad_w_s0: VectorField,
    pub lap_w_s0: Field,
    pub v_s0: Field,
    /// Bound on sup u, sup v, sup w, sup |∇w| and sup |Δw| at s₀.
    pub m: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub u: Field,
    pub v: Field,
    pub w: Field,
    /// ∫_{s₀}^t v ds per cell (∫_0^t before the anchor is captured).
    pub iv: Field,
    /// ∫_{s₀}^t ∇v ds per cell.
    pub igv: VectorField,
    pub anchor: Option<Snapshot>,
    grad_v: VectorField,
    /// w at the last accumulator reset; `w = w_base·exp(−iv)` when η = 0.
    w_base: Field,
    w_cap: f64,
}

impl SimState {
    pub fn new(init: InitialData, p: &ModelParams, cfg: &SolverConfig) -> Result<Self, SimError> {
        p.validate()?;
        let InitialData { u0, v0, w0 } = init;
        let grid = Arc::clone(u0.grid());
        let v = if p.tau == 0 && !cfg.freeze_v {
            elliptic::solve_elliptic_from(&u0, Some(&v0), cfg)?
        } else {
            v0
        };
        let w_cap = grid::max_value(&w0).max(0.0);
        Ok(Self {
            t: 0.0,
            grad_v: grid::gradient(&v),
            iv: Field::zeros(&grid),
            igv: VectorField::zeros(&grid),
            anchor: None,
            w_base: w0.clone(),
            w_cap,
            u: u0,
            v,
            w: w0,
        })
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        self.u.grid()
    }

    /// Upper bound enforced on w: sup w at the last anchor (or t = 0).
    pub fn w_cap(&self) -> f64 {
        self.w_cap
    }

    pub fn grad_v(&self) -> &VectorField {
        &self.grad_v
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite() && self.w.is_finite()
    }

    /// Freezes w, ∇w, Δw, v at the current time and restarts the time
    /// integrals from zero.
    pub fn capture_anchor(&mut self) {
        let grad_w_s0 = grid::gradient(&self.w);
        let lap_w_s0 = grid::laplacian(&self.w);
        let sup_grad_w = grad_w_s0.magnitude().values().iter().copied().fold(0.0, f64::max);
        let m = [
            grid::sup_norm(&self.u),
            grid::sup_norm(&self.v),
            grid::sup_norm(&self.w),
            sup_grad_w,
            grid::sup_norm(&lap_w_s0),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        let grid = Arc::clone(self.grid());
        self.iv = Field::zeros(&grid);
        self.igv = VectorField::zeros(&grid);
        self.w_base = self.w.clone();
        self.w_cap = grid::max_value(&self.w).max(0.0);
        self.anchor = Some(Snapshot {
            s0: self.t,
            w_s0: self.w.clone(),
            grad_w_s0,
            lap_w_s0,
            v_s0: self.v.clone(),
            m,
        });
    }
}

const DIV_GUARD: f64 = 1e-30;
const ROUNDOFF_CLAMP: f64 = 1e-13;
const MAX_HALVINGS: u32 = 10;

/// Largest stable explicit step, capped by `dt_max` and by the distance from
/// `state.t` to `horizon`.
pub fn stable_dt(
    state: &SimState,
    p: &ModelParams,
    cfg: &SolverConfig,
    horizon: f64,
) -> Result<f64, SimError> {
    if !state.is_finite() {
        return Err(SimError::Diverged {
            t: state.t,
            sup_u: grid::max_value(&state.u),
        });
    }
    let grid = state.grid();
    let h = grid.min_spacing();
    let diffusion = h * h / (2.0 * grid.dim() as f64);

    let grad_w = if p.xi != 0.0 {
        Some(grid::gradient(&state.w))
    } else {
        None
    };
    let face_v = grid::max_face_speed(&state.v, p.chi);
    let face_w = match grad_w {
        Some(_) => grid::max_face_speed(&state.w, p.xi),
        None => vec![0.0; grid.dim()],
    };
    let mut advection = f64::INFINITY;
    for axis in 0..grid.dim() {
        let gv = state.grad_v.component(axis).values();
        let mut speed = 0.0_f64;
        for i in 0..grid.len() {
            let mut s = (p.chi * gv[i]).abs();
            if let Some(gw) = &grad_w {
                s += (p.xi * gw.component(axis).values()[i]).abs();
            }
            speed = speed.max(s);
        }
        speed = speed.max(face_v[axis] + face_w[axis]);
        advection = advection.min(grid.spacing()[axis] / (speed + DIV_GUARD));
    }
    let reaction =
        1.0 / (p.mu * (1.0 + grid::max_value(&state.u) + grid::max_value(&state.w)) + DIV_GUARD);

    let mut dt = cfg.cfl_safety * diffusion.min(advection).min(reaction);
    dt = dt.min(cfg.dt_max);
    let remaining = horizon - state.t;
    if remaining > 0.0 {
        dt = dt.min(remaining);
    }
    Ok(dt)
}

/// Bookkeeping for one accepted step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    pub dt: f64,
    pub halvings: u32,
    /// Cells whose round-off negativity was reset to zero.
    pub clamped: usize,
    /// Whether u, v, w ≥ 0 and w ≤ cap held after the step.
    pub invariants_hold: bool,
}

struct Candidate {
    u: Field,
    v: Field,
    w: Field,
    iv: Field,
    igv: VectorField,
    grad_v: VectorField,
    clamped: usize,
}

enum Attempt {
    Accepted(Candidate),
    Negative,
}

/// Advances `state` by `dt`, halving on persistent negativity.
///
/// On `Diverged` the offending state has already been committed so the
/// caller can record it.
pub fn step(
    state: &mut SimState,
    p: &ModelParams,
    cfg: &SolverConfig,
    dt: f64,
) -> Result<StepInfo, SimError> {
    let mut trial = dt;
    for halvings in 0..=MAX_HALVINGS {
        match attempt(state, p, cfg, trial)? {
            Attempt::Negative => trial *= 0.5,
            Attempt::Accepted(c) => {
                state.u = c.u;
                state.v = c.v;
                state.w = c.w;
                state.iv = c.iv;
                state.igv = c.igv;
                state.grad_v = c.grad_v;
                state.t += trial;
                let sup_u = grid::max_value(&state.u);
                if !state.is_finite() || sup_u > cfg.blowup_threshold {
                    return Err(SimError::Diverged {
                        t: state.t,
                        sup_u,
                    });
                }
                let invariants_hold = grid::min_value(&state.u) >= 0.0
                    && grid::min_value(&state.v) >= 0.0
                    && grid::min_value(&state.w) >= 0.0
                    && grid::max_value(&state.w) <= state.w_cap;
                return Ok(StepInfo {
                    dt: trial,
                    halvings,
                    clamped: c.clamped,
                    invariants_hold,
                });
            }
        }
    }
    Err(SimError::CflViolation {
        t: state.t,
        halvings: MAX_HALVINGS,
    })
}

/// Resets entries in `[-tol, 0)` to zero; `None` if anything is more negative.
fn clamp_roundoff(f: &mut Field, tol: f64) -> Option<usize> {
    let mut clamped = 0;
    for x in f.values_mut() {
        if *x < 0.0 {
            if *x < -tol {
                return None;
            }
            *x = 0.0;
            clamped += 1;
        }
    }
    Some(clamped)
}

fn attempt(
    state: &SimState,
    p: &ModelParams,
    cfg: &SolverConfig,
    dt: f64,
) -> Result<Attempt, SimError> {
    let mut clamped = 0;

    // v
    let mut v_new = if cfg.freeze_v {
        state.v.clone()
    } else if p.tau == 0 {
        elliptic::solve_elliptic_from(&state.u, Some(&state.v), cfg)?
    } else {
        match cfg.time_scheme {
            TimeScheme::Explicit => {
                let rate = model::rhs_v(&state.u, &state.v, p);
                state.v.zip_map(&rate, |v, r| v + dt * r)
            }
            TimeScheme::ImexDiffusion => {
                let rhs = state.v.zip_map(&state.u, |v, u| v + dt * (u - v));
                let (v, _) = solve_helmholtz(
                    &rhs,
                    1.0,
                    dt,
                    Some(&state.v),
                    cfg.elliptic_tol,
                    cfg.elliptic_max_iter,
                )?;
                v
            }
        }
    };
    if !v_new.is_finite() {
        return Err(SimError::Diverged {
            t: state.t + dt,
            sup_u: grid::max_value(&state.u),
        });
    }
    let v_scale = grid::max_value(&state.v).max(grid::max_value(&state.u));
    match clamp_roundoff(&mut v_new, ROUNDOFF_CLAMP * v_scale) {
        Some(n) => clamped += n,
        None => return Ok(Attempt::Negative),
    }

    // Trapezoidal time integrals of v and ∇v.
    let v_mid = state.v.zip_map(&v_new, |a, b| 0.5 * (a + b));
    let iv = state.iv.zip_map(&v_mid, |acc, m| acc + dt * m);
    let grad_v = grid::gradient(&v_new);
    let igv = VectorField::from_components(
        state
            .igv
            .components()
            .iter()
            .zip(state.grad_v.components())
            .zip(grad_v.components())
            .map(|((acc, g0), g1)| {
                let mid = g0.zip_map(g1, |a, b| 0.5 * (a + b));
                acc.zip_map(&mid, |a, m| a + dt * m)
            })
            .collect(),
    );

    // w
    let w_new = if p.eta == 0.0 {
        state.w_base.zip_map(&iv, |w0, i| w0 * (-i).exp())
    } else {
        let eta = p.eta;
        let cap = state.w_cap;
        let vals = state
            .w
            .values()
            .iter()
            .zip(state.u.values())
            .zip(v_mid.values())
            .map(|((&w, &u), &v)| {
                let half = w + 0.5 * dt * model::w_rate(u, v, w, eta);
                let next = w + dt * model::w_rate(u, v, half, eta);
                next.clamp(0.0, cap)
            })
            .collect();
        Field::from_values(state.grid(), vals).expect("same grid")
    };

    // u
    let rate = model::rhs_u(&state.u, &v_new, &w_new, p);
    let mut u_new = state.u.zip_map(&rate, |u, r| u + dt * r);
    if !u_new.is_finite() {
        // Committed, then reported as divergence by `step`.
        return Ok(Attempt::Accepted(Candidate {
            u: u_new,
            v: v_new,
            w: w_new,
            iv,
            igv,
            grad_v,
            clamped,
        }));
    }
    let u_scale = grid::max_value(&state.u).max(grid::max_value(&u_new));
    match clamp_roundoff(&mut u_new, ROUNDOFF_CLAMP * u_scale) {
        Some(n) => clamped += n,
        None => return Ok(Attempt::Negative),
    }

    Ok(Attempt::Accepted(Candidate {
        u: u_new,
        v: v_new,
        w: w_new,
        iv,
        igv,
        grad_v,
        clamped,
    }))
}
