//! Model coefficients, right-hand sides, and initial data.
//!
//! The system evolved here is
//!
//! ```text
//! u_t  = Δu − χ∇·(u∇v) − ξ∇·(u∇w) + μu(1 − u − w)
//! τv_t = Δv − v + u
//! w_t  = −vw + ηw(1 − u − w)
//! ```
//!
//! with zero-flux boundaries. `η = 0, τ = 1` is the fully parabolic
//! chemotaxis-haptotaxis model with a non-renewing matrix.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::{self, Field, GridSpec};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("{name} {constraint}, got {value}")]
    InvalidParameter {
        name: &'static str,
        constraint: &'static str,
        value: f64,
    },
    #[error("tau must be 0 or 1, got {0}")]
    InvalidTau(u8),
    #[error("initial {field} is not finite at cell {cell}")]
    NonFinite { field: &'static str, cell: usize },
    #[error("initial {field} is negative ({value}) at cell {cell}")]
    Negative {
        field: &'static str,
        cell: usize,
        value: f64,
    },
    #[error("initial fields do not share a grid")]
    GridMismatch,
    #[error("ODE trajectory diverged at t = {t}")]
    OdeDiverged { t: f64 },
    #[error("{0}")]
    BadArgument(String),
}

/// Coefficients χ, ξ, μ, η and the v time constant τ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub chi: f64,
    pub xi: f64,
    pub mu: f64,
    pub eta: f64,
    pub tau: u8,
}

impl ModelParams {
    /// Parameters with the defaults `η = 0`, `τ = 1`.
    pub fn new(chi: f64, xi: f64, mu: f64) -> Result<Self, ModelError> {
        let p = Self {
            chi,
            xi,
            mu,
            eta: 0.0,
            tau: 1,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let check = |name, ok: bool, constraint, value| {
            if ok {
                Ok(())
            } else {
                Err(ModelError::InvalidParameter {
                    name,
                    constraint,
                    value,
                })
            }
        };
        check("chi", self.chi.is_finite() && self.chi > 0.0, "must be > 0", self.chi)?;
        check("xi", self.xi.is_finite() && self.xi >= 0.0, "must be >= 0", self.xi)?;
        check("mu", self.mu.is_finite() && self.mu >= 0.0, "must be >= 0", self.mu)?;
        check("eta", self.eta.is_finite() && self.eta >= 0.0, "must be >= 0", self.eta)?;
        if self.tau > 1 {
            return Err(ModelError::InvalidTau(self.tau));
        }
        Ok(())
    }

    /// θ = χ/μ, undefined without logistic damping.
    pub fn theta(&self) -> Option<f64> {
        (self.mu > 0.0).then(|| self.chi / self.mu)
    }
}

/// Nonnegative, finite (u₀, v₀, w₀) on a common grid.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialData {
    pub u0: Field,
    pub v0: Field,
    pub w0: Field,
}

impl InitialData {
    pub fn new(u0: Field, v0: Field, w0: Field) -> Result<Self, ModelError> {
        if !u0.same_grid(&v0) || !u0.same_grid(&w0) {
            return Err(ModelError::GridMismatch);
        }
        for (name, f) in [("u0", &u0), ("v0", &v0), ("w0", &w0)] {
            for (cell, &value) in f.values().iter().enumerate() {
                if !value.is_finite() {
                    return Err(ModelError::NonFinite { field: name, cell });
                }
                if value < 0.0 {
                    return Err(ModelError::Negative {
                        field: name,
                        cell,
                        value,
                    });
                }
            }
        }
        Ok(Self { u0, v0, w0 })
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        self.u0.grid()
    }
}

/// Δu − χ∇·(u∇v) − ξ∇·(u∇w) + μu(1−u−w).
pub fn rhs_u(u: &Field, v: &Field, w: &Field, p: &ModelParams) -> Field {
    let mut out = transport_u(u, v, w, p);
    for ((o, &ui), &wi) in out.values_mut().iter_mut().zip(u.values()).zip(w.values()) {
        *o += p.mu * ui * (1.0 - ui - wi);
    }
    out
}

/// The diffusion and taxis part of [`rhs_u`]; its volume sum vanishes.
pub fn transport_u(u: &Field, v: &Field, w: &Field, p: &ModelParams) -> Field {
    let mut out = grid::laplacian(u);
    for (coeff, potential) in [(p.chi, v), (p.xi, w)] {
        if coeff != 0.0 {
            let div = grid::taxis_divergence(u, potential, coeff);
            for (o, d) in out.values_mut().iter_mut().zip(div.values()) {
                *o -= d;
            }
        }
    }
    out
}

/// Δv − v + u.
pub fn rhs_v(u: &Field, v: &Field, _p: &ModelParams) -> Field {
    let mut out = grid::laplacian(v);
    for ((o, &vi), &ui) in out.values_mut().iter_mut().zip(v.values()).zip(u.values()) {
        *o += ui - vi;
    }
    out
}

/// −vw + ηw(1−u−w).
pub fn rhs_w(u: &Field, v: &Field, w: &Field, p: &ModelParams) -> Field {
    let mut out = w.clone();
    for (((o, &ui), &vi), &wi) in out
        .values_mut()
        .iter_mut()
        .zip(u.values())
        .zip(v.values())
        .zip(w.values())
    {
        *o = w_rate(ui, vi, wi, p.eta);
    }
    out
}

#[inline]
pub(crate) fn w_rate(u: f64, v: f64, w: f64, eta: f64) -> f64 {
    -v * w + eta * w * (1.0 - u - w)
}

/// Sampled solution of the spatially homogeneous reduction.
#[derive(Clone, Debug, PartialEq)]
pub struct OdeTrajectory {
    pub params: ModelParams,
    pub dt: f64,
    /// `(t, [u, v, w])` at `t = k·dt`, the last node clipped to the end time.
    pub points: Vec<(f64, [f64; 3])>,
}

const ODE_DIVERGENCE: f64 = 1e12;

fn ode_rhs(y: [f64; 3], p: &ModelParams) -> [f64; 3] {
    let [u, v, w] = y;
    let du = p.mu * u * (1.0 - u - w);
    let dv = if p.tau == 1 { u - v } else { 0.0 };
    [du, dv, w_rate(u, v, w, p.eta)]
}

/// Classical RK4 for `u' = μu(1−u−w)`, `τv' = u − v`, `w' = −vw + ηw(1−u−w)`.
///
/// For `τ = 0` the v component is slaved to u at every stage.
pub fn ode_reference(
    p: &ModelParams,
    y0: [f64; 3],
    t_end: f64,
    dt: f64,
) -> Result<OdeTrajectory, ModelError> {
    p.validate()?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(ModelError::BadArgument(format!("dt must be > 0, got {dt}")));
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(ModelError::BadArgument(format!(
            "end time must be >= 0, got {t_end}"
        )));
    }
    if y0.iter().any(|&c| !(c.is_finite() && c >= 0.0)) {
        return Err(ModelError::BadArgument(format!(
            "initial state must be finite and >= 0, got {y0:?}"
        )));
    }
    let slave = |mut y: [f64; 3]| {
        if p.tau == 0 {
            y[1] = y[0];
        }
        y
    };
    let f = |y: [f64; 3]| ode_rhs(slave(y), p);
    let axpy = |y: [f64; 3], a: f64, k: [f64; 3]| [y[0] + a * k[0], y[1] + a * k[1], y[2] + a * k[2]];

    let n_steps = (t_end / dt).ceil() as usize;
    let mut y = slave(y0);
    let mut points = Vec::with_capacity(n_steps + 1);
    points.push((0.0, y));
    for k in 0..n_steps {
        let t = k as f64 * dt;
        let t_next = ((k + 1) as f64 * dt).min(t_end);
        let h = t_next - t;
        let k1 = f(y);
        let k2 = f(axpy(y, 0.5 * h, k1));
        let k3 = f(axpy(y, 0.5 * h, k2));
        let k4 = f(axpy(y, h, k3));
        for c in 0..3 {
            y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        y = slave(y);
        if y.iter().any(|c| !c.is_finite() || c.abs() > ODE_DIVERGENCE) {
            return Err(ModelError::OdeDiverged { t: t_next });
        }
        points.push((t_next, y));
    }
    Ok(OdeTrajectory {
        params: *p,
        dt,
        points,
    })
}

impl OdeTrajectory {
    /// State at time `t`, by cubic Hermite interpolation between nodes.
    pub fn at(&self, t: f64) -> [f64; 3] {
        let last = self.points.len() - 1;
        let k = ((t / self.dt).floor().max(0.0) as usize).min(last.saturating_sub(1));
        let (t0, y0) = self.points[k];
        if last == 0 || t <= t0 {
            return y0;
        }
        let (t1, y1) = self.points[k + 1];
        if t >= t1 {
            return y1;
        }
        let h = t1 - t0;
        let s = (t - t0) / h;
        let d0 = ode_rhs(y0, &self.params);
        let d1 = ode_rhs(y1, &self.params);
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let mut y = [0.0; 3];
        for c in 0..3 {
            y[c] = h00 * y0[c] + h10 * h * d0[c] + h01 * y1[c] + h11 * h * d1[c];
        }
        if self.params.tau == 0 {
            y[1] = y[0];
        }
        y
    }
}

/// Built-in initial data generators.
#[derive(Clone, Debug, PartialEq)]
pub enum Scenario {
    /// The homogeneous equilibrium (1, 1, 0).
    Steady,
    /// `u = 1 + A·exp(−|x − x₀|²/σ²)`, `v = 1`, `w = w̄`.
    GaussianBump {
        amplitude: f64,
        sigma: f64,
        /// Defaults to the domain center when `None`.
        center: Option<Vec<f64>>,
        w_bar: f64,
    },
    /// Seeded uniform perturbation of amplitude `A` around (1, 1, w̄);
    /// `perturb_w` also perturbs w, which is exploratory because the
    /// matrix profile is then not smooth.
    RandomPerturb {
        amplitude: f64,
        w_bar: f64,
        seed: u64,
        perturb_w: bool,
    },
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Steady => "steady",
            Scenario::GaussianBump { .. } => "gaussian-bump",
            Scenario::RandomPerturb { .. } => "random-perturb",
        }
    }

    /// A copy with the generator seed advanced by `offset`; generators
    /// without a seed are returned unchanged.
    pub fn reseeded(&self, offset: u64) -> Self {
        match self {
            Scenario::RandomPerturb {
                amplitude,
                w_bar,
                seed,
                perturb_w,
            } => Scenario::RandomPerturb {
                amplitude: *amplitude,
                w_bar: *w_bar,
                seed: seed.wrapping_add(offset),
                perturb_w: *perturb_w,
            },
            other => other.clone(),
        }
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<(), ModelError> {
        let nonneg = |name, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(ModelError::InvalidParameter {
                    name,
                    constraint: "must be finite and >= 0",
                    value: v,
                })
            }
        };
        match self {
            Scenario::Steady => Ok(()),
            Scenario::GaussianBump {
                amplitude,
                sigma,
                center,
                w_bar,
            } => {
                nonneg("amplitude", *amplitude)?;
                nonneg("w_bar", *w_bar)?;
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return Err(ModelError::InvalidParameter {
                        name: "sigma",
                        constraint: "must be > 0",
                        value: *sigma,
                    });
                }
                if let Some(c) = center {
                    if c.len() != grid.dim() || c.iter().any(|x| !x.is_finite()) {
                        return Err(ModelError::BadArgument(format!(
                            "center needs {} finite coordinates, got {c:?}",
                            grid.dim()
                        )));
                    }
                }
                Ok(())
            }
            Scenario::RandomPerturb {
                amplitude, w_bar, ..
            } => {
                nonneg("amplitude", *amplitude)?;
                nonneg("w_bar", *w_bar)
            }
        }
    }

    pub fn initial_data(&self, grid: &Arc<GridSpec>) -> Result<InitialData, ModelError> {
        self.validate(grid)?;
        let (u0, v0, w0) = match self {
            Scenario::Steady => (
                Field::constant(grid, 1.0),
                Field::constant(grid, 1.0),
                Field::zeros(grid),
            ),
            Scenario::GaussianBump {
                amplitude,
                sigma,
                center,
                w_bar,
            } => {
                let x0: Vec<f64> = match center {
                    Some(c) => c.clone(),
                    None => grid.extent().iter().map(|l| 0.5 * l).collect(),
                };
                let inv_s2 = 1.0 / (sigma * sigma);
                let u0 = Field::from_fn(grid, |x| {
                    let r2: f64 = x.iter().zip(&x0).map(|(a, b)| (a - b) * (a - b)).sum();
                    1.0 + amplitude * (-r2 * inv_s2).exp()
                });
                (u0, Field::constant(grid, 1.0), Field::constant(grid, *w_bar))
            }
            Scenario::RandomPerturb {
                amplitude,
                w_bar,
                seed,
                perturb_w,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut sample = |base: f64| {
                    let r: f64 = rng.random_range(-1.0..=1.0);
                    (base + amplitude * r).max(0.0)
                };
                let u: Vec<f64> = (0..grid.len()).map(|_| sample(1.0)).collect();
                let v: Vec<f64> = (0..grid.len()).map(|_| sample(1.0)).collect();
                let w: Vec<f64> = if *perturb_w {
                    (0..grid.len()).map(|_| sample(*w_bar)).collect()
                } else {
                    vec![*w_bar; grid.len()]
                };
                let mk = |vals| Field::from_values(grid, vals).expect("length matches grid");
                (mk(u), mk(v), mk(w))
            }
        };
        InitialData::new(u0, v0, w0)
    }
}
