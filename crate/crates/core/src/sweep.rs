//! Sweeps over θ = χ/μ and bracketing of the boundedness threshold.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use thiserror::Error;

use crate::diagnostics::{self, BoundednessVerdict, Classification, ClassifyConfig};
use crate::grid::GridSpec;
use crate::model::{ModelParams, Scenario};
use crate::stepper::{self, NullObserver, SolverConfig, Termination};

#[derive(Debug, Error, PartialEq)]
pub enum SweepError {
    #[error("theta values must be positive and strictly increasing")]
    BadTheta,
    #[error("fixed value must be finite and > 0, got {0}")]
    BadFixedValue(f64),
    #[error("repetitions must be >= 1")]
    NoRepetitions,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepMode {
    FixMuVaryChi,
    FixChiVaryMu,
}

impl SweepMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepMode::FixMuVaryChi => "fix_mu_vary_chi",
            SweepMode::FixChiVaryMu => "fix_chi_vary_mu",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fix_mu_vary_chi" => Some(SweepMode::FixMuVaryChi),
            "fix_chi_vary_mu" => Some(SweepMode::FixChiVaryMu),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPlan {
    pub mode: SweepMode,
    pub fixed_value: f64,
    pub theta_values: Vec<f64>,
    pub base_model: ModelParams,
    pub base_solver: SolverConfig,
    pub grid: Arc<GridSpec>,
    pub scenario: Scenario,
    pub repetitions: usize,
    pub workers: usize,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<(), SweepError> {
        let increasing = self.theta_values.windows(2).all(|w| w[0] < w[1]);
        let positive = self.theta_values.iter().all(|t| t.is_finite() && *t > 0.0);
        if self.theta_values.is_empty() || !increasing || !positive {
            return Err(SweepError::BadTheta);
        }
        if !(self.fixed_value.is_finite() && self.fixed_value > 0.0) {
            return Err(SweepError::BadFixedValue(self.fixed_value));
        }
        if self.repetitions == 0 {
            return Err(SweepError::NoRepetitions);
        }
        Ok(())
    }

    /// Model parameters for one θ, with the non-swept coefficients taken
    /// from the base model.
    pub fn params_for(&self, theta: f64) -> ModelParams {
        let mut p = self.base_model;
        match self.mode {
            SweepMode::FixMuVaryChi => {
                p.mu = self.fixed_value;
                p.chi = theta * self.fixed_value;
            }
            SweepMode::FixChiVaryMu => {
                p.chi = self.fixed_value;
                p.mu = self.fixed_value / theta;
            }
        }
        p
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub theta: f64,
    pub chi: f64,
    pub mu: f64,
    pub repetition: usize,
    pub verdict: BoundednessVerdict,
    pub termination: String,
    pub max_sup_u: f64,
    /// Parabolic-elliptic sufficient condition, evaluated for τ = 0 runs.
    pub pe_condition: Option<bool>,
    pub wall_time: f64,
}

/// μ > ((N − 2)₊ / N)·χ.
pub fn check_pe_condition(p: &ModelParams, dim: usize) -> bool {
    let n = dim as f64;
    let factor = (n - 2.0).max(0.0) / n;
    p.mu > factor * p.chi
}

fn inconclusive() -> BoundednessVerdict {
    BoundednessVerdict {
        classification: Classification::Inconclusive,
        max_sup_u: f64::NAN,
        t_of_max: 0.0,
        crossing_time: None,
    }
}

fn run_one(plan: &SweepPlan, theta_index: usize, repetition: usize) -> SweepResult {
    let started = Instant::now();
    let theta = plan.theta_values[theta_index];
    let p = plan.params_for(theta);
    let pe_condition = (p.tau == 0).then(|| check_pe_condition(&p, plan.grid.dim()));
    let (verdict, termination) = match plan
        .scenario
        .reseeded(repetition as u64)
        .initial_data(&plan.grid)
    {
        Ok(init) => {
            let outcome = stepper::run(init, &p, &plan.base_solver, &[], &mut NullObserver);
            let verdict = match outcome.termination {
                Termination::Completed | Termination::BlewUp { .. } if !outcome.records.is_empty() => {
                    diagnostics::classify(&outcome.records, &ClassifyConfig::from(&plan.base_solver))
                }
                _ => BoundednessVerdict {
                    max_sup_u: outcome.summary.max_sup_u,
                    t_of_max: outcome.summary.t_of_max,
                    ..inconclusive()
                },
            };
            (verdict, outcome.termination.as_str().to_string())
        }
        Err(_) => (inconclusive(), "solver_failed".to_string()),
    };
    SweepResult {
        theta,
        chi: p.chi,
        mu: p.mu,
        repetition,
        max_sup_u: verdict.max_sup_u,
        verdict,
        termination,
        pe_condition,
        wall_time: started.elapsed().as_secs_f64(),
    }
}

/// Runs every (θ, repetition) pair on `plan.workers` threads. Results are
/// ordered by θ, then repetition, independent of scheduling.
pub fn run_sweep(plan: &SweepPlan) -> Result<Vec<SweepResult>, SweepError> {
    plan.validate()?;
    let jobs: Vec<(usize, usize)> = (0..plan.theta_values.len())
        .flat_map(|i| (0..plan.repetitions).map(move |r| (i, r)))
        .collect();
    let slots: Mutex<Vec<Option<SweepResult>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    let workers = plan.workers.clamp(1, jobs.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(i, r)) = jobs.get(k) else { break };
                let result = run_one(plan, i, r);
                slots.lock().expect("result sink poisoned")[k] = Some(result);
            });
        }
    });
    Ok(slots
        .into_inner()
        .expect("result sink poisoned")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoBracket {
    Empty,
    AllBounded,
    NoneBounded,
    /// A bounded θ lies above a non-bounded one.
    NonMonotone,
}

/// The largest θ whose runs were all bounded and the smallest θ with a
/// non-bounded run, when the bounded θ all lie below the rest.
pub fn estimate_threshold(results: &[SweepResult]) -> Result<(f64, f64), NoBracket> {
    let mut per_theta: Vec<(f64, bool)> = Vec::new();
    for r in results {
        let bounded = r.verdict.classification == Classification::Bounded;
        match per_theta.last_mut() {
            Some((theta, all)) if *theta == r.theta => *all &= bounded,
            _ => per_theta.push((r.theta, bounded)),
        }
    }
    if per_theta.is_empty() {
        return Err(NoBracket::Empty);
    }
    let first_bad = per_theta.iter().position(|(_, ok)| !ok);
    match first_bad {
        None => Err(NoBracket::AllBounded),
        Some(0) => Err(NoBracket::NoneBounded),
        Some(k) => {
            if per_theta[k..].iter().any(|(_, ok)| *ok) {
                Err(NoBracket::NonMonotone)
            } else {
                Ok((per_theta[k - 1].0, per_theta[k].0))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(theta: f64, c: Classification) -> SweepResult {
        SweepResult {
            theta,
            chi: theta,
            mu: 1.0,
            repetition: 0,
            verdict: BoundednessVerdict {
                classification: c,
                max_sup_u: 1.0,
                t_of_max: 0.0,
                crossing_time: None,
            },
            termination: "completed".into(),
            max_sup_u: 1.0,
            pe_condition: None,
            wall_time: 0.0,
        }
    }

    use Classification::*;

    #[test]
    fn bracket_examples() {
        let bracket = |cs: &[Classification]| {
            let thetas = [0.1, 0.2, 0.4];
            let rs: Vec<_> = thetas.iter().zip(cs).map(|(&t, &c)| result(t, c)).collect();
            estimate_threshold(&rs)
        };
        assert_eq!(bracket(&[Bounded, Bounded, Growing]), Ok((0.2, 0.4)));
        assert_eq!(bracket(&[Bounded, Bounded, Bounded]), Err(NoBracket::AllBounded));
        assert_eq!(bracket(&[Bounded, Growing, Bounded]), Err(NoBracket::NonMonotone));
        assert_eq!(bracket(&[Inconclusive, BlewUp, BlewUp]), Err(NoBracket::NoneBounded));
        assert_eq!(bracket(&[Bounded, Inconclusive, BlewUp]), Ok((0.1, 0.2)));
        assert_eq!(estimate_threshold(&[]), Err(NoBracket::Empty));
    }

    #[test]
    fn repetitions_must_all_be_bounded() {
        let mut mixed = result(0.2, Growing);
        mixed.repetition = 1;
        let rs = vec![result(0.1, Bounded), result(0.2, Bounded), mixed];
        assert_eq!(estimate_threshold(&rs), Ok((0.1, 0.2)));
    }

    #[test]
    fn pe_condition_examples() {
        let p = |chi, mu| ModelParams::new(chi, 1.0, mu).unwrap();
        assert!(check_pe_condition(&p(2.0, 1.0), 3));
        assert!(!check_pe_condition(&p(2.0, 0.5), 3));
        assert!(check_pe_condition(&p(100.0, 1e-3), 2));
        assert!(check_pe_condition(&p(100.0, 1e-3), 1));
    }

    fn plan(mode: SweepMode, fixed: f64, thetas: Vec<f64>) -> SweepPlan {
        let mut solver = SolverConfig::new(0.5);
        solver.output_every = 0.1;
        SweepPlan {
            mode,
            fixed_value: fixed,
            theta_values: thetas,
            base_model: ModelParams::new(1.0, 1.0, 1.0).unwrap(),
            base_solver: solver,
            grid: Arc::new(GridSpec::uniform(1, 4.0, 16).unwrap()),
            scenario: Scenario::Steady,
            repetitions: 1,
            workers: 2,
        }
    }

    #[test]
    fn mode_arithmetic() {
        let p = plan(SweepMode::FixMuVaryChi, 10.0, vec![0.05, 0.1, 0.2]);
        let chis: Vec<f64> = p.theta_values.iter().map(|&t| p.params_for(t).chi).collect();
        assert_eq!(chis, vec![0.5, 1.0, 2.0]);
        let q = plan(SweepMode::FixChiVaryMu, 2.0, vec![0.5, 4.0]);
        let mus: Vec<f64> = q.theta_values.iter().map(|&t| q.params_for(t).mu).collect();
        assert_eq!(mus, vec![4.0, 0.5]);
    }

    #[test]
    fn plan_validation() {
        assert_eq!(
            plan(SweepMode::FixMuVaryChi, 1.0, vec![0.2, 0.1]).validate(),
            Err(SweepError::BadTheta)
        );
        assert_eq!(
            plan(SweepMode::FixMuVaryChi, 1.0, vec![]).validate(),
            Err(SweepError::BadTheta)
        );
        assert_eq!(
            plan(SweepMode::FixMuVaryChi, 0.0, vec![0.1]).validate(),
            Err(SweepError::BadFixedValue(0.0))
        );
        let mut p = plan(SweepMode::FixMuVaryChi, 1.0, vec![0.1]);
        p.repetitions = 0;
        assert_eq!(p.validate(), Err(SweepError::NoRepetitions));
    }

    #[test]
    fn steady_single_point_is_bounded() {
        let rs = run_sweep(&plan(SweepMode::FixMuVaryChi, 10.0, vec![0.1])).unwrap();
        assert_eq!(rs.len(), 1);
        assert_eq!(rs[0].verdict.classification, Bounded);
        assert_eq!(rs[0].pe_condition, None);
    }

    #[test]
    fn ordering_is_by_theta_then_repetition() {
        let mut p = plan(SweepMode::FixMuVaryChi, 10.0, vec![0.1, 0.2, 0.3]);
        p.repetitions = 2;
        p.workers = 4;
        let rs = run_sweep(&p).unwrap();
        let keys: Vec<(f64, usize)> = rs.iter().map(|r| (r.theta, r.repetition)).collect();
        assert_eq!(
            keys,
            vec![(0.1, 0), (0.1, 1), (0.2, 0), (0.2, 1), (0.3, 0), (0.3, 1)]
        );
    }
}
