//! Finite-volume simulation of chemotaxis-haptotaxis systems with logistic
//! growth, together with runtime monitors for the a-priori bounds such
//! systems satisfy and a sweep harness over θ = χ/μ.
//!
//! * [`grid`]: cell-centered boxes, fields, and zero-flux operators.
//! * [`model`]: coefficients, right-hand sides, initial data, ODE reference.
//! * [`stepper`]: positivity-preserving time integration and the run loop.
//! * [`diagnostics`]: monitored norms, bound checks, boundedness verdicts.
//! * [`sweep`]: θ sweeps and threshold bracketing.
//! * [`config`], [`output`]: configuration files and CSV/snapshot I/O.

pub mod diagnostics;
pub mod grid;
pub mod model;
pub mod stepper;
pub mod sweep;
pub mod config;
pub mod output;
