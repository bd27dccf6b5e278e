//! Monitored quantities and the checks built on them.
//!
//! Every record carries the L¹ masses, extrema, selected Lᵖ norms of u,
//! ‖∇v‖∞, the worst violation of the one-sided lower bound on Δw, and the
//! residual of the exponential representation of w.

use crate::grid::{self, Field, GridSpec};
use crate::model::ModelParams;
use crate::stepper::{SimError, SimState, SolverConfig};

/// Constant in the discretization-scaled tolerance of [`lemma22_check`].
pub const LEMMA22_TOL_FACTOR: f64 = 10.0;
/// Relative slack allowed in [`mass_bound_check`].
pub const MASS_TOL: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub dt_used: f64,
    pub mass_u: f64,
    pub mass_v: f64,
    pub min_u: f64,
    pub sup_u: f64,
    pub min_v: f64,
    pub sup_v: f64,
    pub min_w: f64,
    pub sup_w: f64,
    pub sup_grad_v: f64,
    pub lemma22_max_violation: f64,
    pub repr_residual: f64,
    /// `(p, ‖u‖_p)` for each configured exponent.
    pub lp_u: Vec<(f64, f64)>,
}

impl DiagnosticsRecord {
    /// True when some monitored value is NaN or infinite.
    pub fn is_flagged(&self) -> bool {
        let scalars = [
            self.t,
            self.dt_used,
            self.mass_u,
            self.mass_v,
            self.min_u,
            self.sup_u,
            self.min_v,
            self.sup_v,
            self.min_w,
            self.sup_w,
            self.sup_grad_v,
            self.lemma22_max_violation,
            self.repr_residual,
        ];
        scalars.iter().any(|x| !x.is_finite()) || self.lp_u.iter().any(|(_, n)| !n.is_finite())
    }
}

/// Evaluates every monitor on `state`.
///
/// The Δw bound and the representation residual apply only once an anchor
/// exists and without matrix renewal; otherwise they are reported as 0.
pub fn record(state: &SimState, p: &ModelParams, lp_exponents: &[f64], dt_used: f64) -> DiagnosticsRecord {
    let anchored = state.anchor.is_some() && p.eta == 0.0;
    let (lemma22, repr) = if anchored {
        let slack = lemma22_check(state).expect("anchor present");
        (
            slack.values().iter().copied().fold(0.0, f64::max),
            representation_residual(state).expect("anchor present"),
        )
    } else {
        (0.0, 0.0)
    };
    let sup_grad_v = (0..state.grid().len())
        .map(|i| state.grad_v().norm_at(i))
        .fold(0.0, f64::max);
    DiagnosticsRecord {
        t: state.t,
        dt_used,
        mass_u: grid::integrate(&state.u),
        mass_v: grid::integrate(&state.v),
        min_u: grid::min_value(&state.u),
        sup_u: grid::max_value(&state.u),
        min_v: grid::min_value(&state.v),
        sup_v: grid::max_value(&state.v),
        min_w: grid::min_value(&state.w),
        sup_w: grid::max_value(&state.w),
        sup_grad_v,
        lemma22_max_violation: lemma22,
        repr_residual: repr,
        lp_u: lp_exponents
            .iter()
            .map(|&q| (q, grid::lp_norm(&state.u, q)))
            .collect(),
    }
}

/// Per-cell positive part of `RHS − Δ_h w` for the lower bound
///
/// ```text
/// Δw(t) ≥ Δw(s₀)e^{−I} − 2e^{−I}∇w(s₀)·J − w(s₀)/e − w(s₀)v(t)e^{−I}
/// ```
///
/// with `I = ∫_{s₀}^t v ds` and `J = ∫_{s₀}^t ∇v ds`.
pub fn lemma22_check(state: &SimState) -> Result<Field, SimError> {
    let anchor = state.anchor.as_ref().ok_or(SimError::AnchorMissing)?;
    let lhs = grid::laplacian(&state.w);
    let inv_e = (-1.0f64).exp();
    let dim = state.grid().dim();
    let slack = (0..state.grid().len())
        .map(|i| {
            let decay = (-state.iv.values()[i]).exp();
            let mut drift = 0.0;
            for axis in 0..dim {
                drift += anchor.grad_w_s0.component(axis).values()[i]
                    * state.igv.component(axis).values()[i];
            }
            let w0 = anchor.w_s0.values()[i];
            let rhs = anchor.lap_w_s0.values()[i] * decay
                - 2.0 * decay * drift
                - inv_e * w0
                - w0 * state.v.values()[i] * decay;
            (rhs - lhs.values()[i]).max(0.0)
        })
        .collect();
    Ok(Field::from_values(state.grid(), slack).expect("same grid"))
}

/// `c·(h² + dt)·M·(1 + sup I + sup |J|)`, the level above which a slack in
/// [`lemma22_check`] counts as a violation. `h` is the coarsest spacing.
pub fn lemma22_tolerance(state: &SimState, dt: f64) -> Result<f64, SimError> {
    let anchor = state.anchor.as_ref().ok_or(SimError::AnchorMissing)?;
    let h = state.grid().spacing().iter().copied().fold(0.0, f64::max);
    let sup_igv = state.igv.magnitude().values().iter().copied().fold(0.0, f64::max);
    let scale = anchor.m * (1.0 + grid::max_value(&state.iv).max(0.0) + sup_igv);
    Ok(LEMMA22_TOL_FACTOR * (h * h + dt) * scale)
}

/// `sup_x |w(x,t) − e^{−∫_{s₀}^t v}·w(x,s₀)|`.
pub fn representation_residual(state: &SimState) -> Result<f64, SimError> {
    let anchor = state.anchor.as_ref().ok_or(SimError::AnchorMissing)?;
    Ok(state
        .w
        .values()
        .iter()
        .zip(state.iv.values())
        .zip(anchor.w_s0.values())
        .map(|((&w, &i), &w0)| (w - (-i).exp() * w0).abs())
        .fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq)]
pub enum MassCheck {
    /// The bound needs μ > 0 and η = 0.
    Skipped,
    Checked {
        passed: bool,
        /// `max(∫u(0), |Ω|)`.
        bound: f64,
        /// Smallest `bound − ∫u(t)` over the series.
        worst_margin: f64,
        worst_t: f64,
    },
}

impl MassCheck {
    pub fn passed(&self) -> bool {
        match self {
            MassCheck::Skipped => true,
            MassCheck::Checked { passed, .. } => *passed,
        }
    }
}

/// Checks `∫u(t) ≤ max(∫u(0), |Ω|)·(1 + MASS_TOL)` along a series.
pub fn mass_bound_check(series: &[DiagnosticsRecord], grid: &GridSpec, p: &ModelParams) -> MassCheck {
    if p.mu <= 0.0 || p.eta != 0.0 || series.is_empty() {
        return MassCheck::Skipped;
    }
    let bound = series[0].mass_u.max(grid.domain_measure());
    let mut passed = true;
    let mut worst_margin = f64::INFINITY;
    let mut worst_t = series[0].t;
    for r in series {
        if !(r.mass_u <= bound * (1.0 + MASS_TOL)) {
            passed = false;
        }
        let margin = bound - r.mass_u;
        if margin < worst_margin || margin.is_nan() {
            worst_margin = margin;
            worst_t = r.t;
        }
    }
    MassCheck::Checked {
        passed,
        bound,
        worst_margin,
        worst_t,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Classification {
    Bounded,
    Growing,
    BlewUp,
    Inconclusive,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Bounded => "bounded",
            Classification::Growing => "growing",
            Classification::BlewUp => "blew_up",
            Classification::Inconclusive => "inconclusive",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "bounded" => Classification::Bounded,
            "growing" => Classification::Growing,
            "blew_up" => Classification::BlewUp,
            "inconclusive" => Classification::Inconclusive,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundednessVerdict {
    pub classification: Classification,
    pub max_sup_u: f64,
    pub t_of_max: f64,
    /// Set exactly when the classification is `BlewUp`.
    pub crossing_time: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifyConfig {
    pub blowup_threshold: f64,
    /// Growth factor G.
    pub growth_factor: f64,
    /// Relative variation allowed over the final quarter.
    pub plateau_tol: f64,
}

impl ClassifyConfig {
    pub fn new(blowup_threshold: f64) -> Self {
        Self {
            blowup_threshold,
            growth_factor: 2.0,
            plateau_tol: 0.05,
        }
    }
}

impl From<&SolverConfig> for ClassifyConfig {
    fn from(cfg: &SolverConfig) -> Self {
        Self::new(cfg.blowup_threshold)
    }
}

/// Labels a run from its sup u history.
///
/// Windows are fractions of the recorded time span, so the verdict does
/// not change when all timestamps are scaled by the same factor.
pub fn classify(series: &[DiagnosticsRecord], cfg: &ClassifyConfig) -> BoundednessVerdict {
    assert!(!series.is_empty(), "classify needs at least one record");
    let mut max_sup_u = f64::NEG_INFINITY;
    let mut t_of_max = series[0].t;
    for r in series {
        if r.sup_u > max_sup_u || r.sup_u.is_nan() {
            max_sup_u = r.sup_u;
            t_of_max = r.t;
            if r.sup_u.is_nan() {
                break;
            }
        }
    }
    let crossing = series
        .iter()
        .find(|r| !r.sup_u.is_finite() || r.sup_u >= cfg.blowup_threshold)
        .map(|r| r.t);
    let verdict = |classification| BoundednessVerdict {
        classification,
        max_sup_u,
        t_of_max,
        crossing_time: crossing,
    };
    if crossing.is_some() {
        return verdict(Classification::BlewUp);
    }

    let t0 = series[0].t;
    let span = series[series.len() - 1].t - t0;
    let final_sup = series[series.len() - 1].sup_u;
    let first_half_max = series
        .iter()
        .filter(|r| r.t - t0 <= 0.5 * span)
        .map(|r| r.sup_u)
        .fold(f64::NEG_INFINITY, f64::max);
    if final_sup > cfg.growth_factor * first_half_max {
        return verdict(Classification::Growing);
    }

    let (lo, hi) = series
        .iter()
        .filter(|r| r.t - t0 >= 0.75 * span)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.sup_u), hi.max(r.sup_u))
        });
    let plateau = hi <= 0.0 || (hi - lo) / hi < cfg.plateau_tol;
    let contained = max_sup_u <= cfg.growth_factor * series[0].sup_u;
    if plateau && contained {
        verdict(Classification::Bounded)
    } else {
        verdict(Classification::Inconclusive)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::grid::GridSpec;
    use crate::model::InitialData;
    use crate::stepper::{stable_dt, step};

    fn synthetic(sups: &[f64], dt: f64) -> Vec<DiagnosticsRecord> {
        sups.iter()
            .enumerate()
            .map(|(k, &s)| DiagnosticsRecord {
                t: k as f64 * dt,
                dt_used: dt,
                mass_u: 1.0,
                mass_v: 1.0,
                min_u: 0.0,
                sup_u: s,
                min_v: 0.0,
                sup_v: 1.0,
                min_w: 0.0,
                sup_w: 0.0,
                sup_grad_v: 0.0,
                lemma22_max_violation: 0.0,
                repr_residual: 0.0,
                lp_u: vec![],
            })
            .collect()
    }

    fn state_from(u: Vec<f64>, v: Vec<f64>, w: Vec<f64>, length: f64) -> SimState {
        let grid = Arc::new(GridSpec::uniform(1, length, u.len()).unwrap());
        let f = |x| Field::from_values(&grid, x).unwrap();
        let init = InitialData::new(f(u), f(v), f(w)).unwrap();
        SimState::new(
            init,
            &ModelParams::new(1.0, 1.0, 1.0).unwrap(),
            &SolverConfig::new(1.0),
        )
        .unwrap()
    }

    #[test]
    fn steady_record() {
        let mut s = state_from(vec![1.0; 4], vec![1.0; 4], vec![0.0; 4], 1.0);
        s.capture_anchor();
        let r = record(&s, &ModelParams::new(1.0, 1.0, 1.0).unwrap(), &[2.0], 0.0);
        assert!((r.mass_u - 1.0).abs() < 1e-15);
        assert!((r.mass_v - 1.0).abs() < 1e-15);
        assert_eq!((r.sup_u, r.sup_grad_v, r.repr_residual), (1.0, 0.0, 0.0));
        assert_eq!(r.lemma22_max_violation, 0.0);
        assert!(!r.is_flagged());
    }

    #[test]
    fn two_cell_record() {
        let s = state_from(vec![0.0, 2.0], vec![1.0, 1.0], vec![0.0, 0.0], 1.0);
        let r = record(&s, &ModelParams::new(1.0, 1.0, 1.0).unwrap(), &[2.0], 0.0);
        assert_eq!((r.mass_u, r.sup_u, r.min_u), (1.0, 2.0, 0.0));
        assert!((r.lp_u[0].1 - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn checks_need_an_anchor() {
        let s = state_from(vec![1.0; 3], vec![1.0; 3], vec![0.5; 3], 1.0);
        assert_eq!(lemma22_check(&s).unwrap_err(), SimError::AnchorMissing);
        assert_eq!(representation_residual(&s).unwrap_err(), SimError::AnchorMissing);
        assert_eq!(lemma22_tolerance(&s, 0.1).unwrap_err(), SimError::AnchorMissing);
    }

    #[test]
    fn no_violation_at_anchor() {
        let mut s = state_from(
            vec![1.0, 3.0, 2.0, 0.5, 0.0],
            vec![0.2, 1.0, 0.0, 2.0, 1.0],
            vec![0.9, 0.1, 0.5, 0.7, 0.3],
            2.0,
        );
        s.capture_anchor();
        assert!(lemma22_check(&s).unwrap().values().iter().all(|&x| x == 0.0));
        assert_eq!(representation_residual(&s).unwrap(), 0.0);
    }

    #[test]
    fn injected_peak_is_flagged() {
        let mut s = state_from(vec![1.0; 5], vec![1.0; 5], vec![0.5; 5], 2.0);
        s.capture_anchor();
        s.w.values_mut()[2] = 1.5;
        let slack = lemma22_check(&s).unwrap();
        let tol = lemma22_tolerance(&s, 0.01).unwrap();
        assert!(slack.values()[2] > tol, "{} vs {tol}", slack.values()[2]);
        assert_eq!(slack.values()[0], 0.0);
        let r = record(&s, &ModelParams::new(1.0, 1.0, 1.0).unwrap(), &[], 0.01);
        assert!(r.lemma22_max_violation > 0.0);
        assert!(r.repr_residual >= 1.0 - 1e-15);
    }

    #[test]
    fn frozen_constant_v_has_no_violation() {
        let p = ModelParams::new(1.0, 1.0, 1.0).unwrap();
        let mut cfg = SolverConfig::new(1.0);
        cfg.freeze_v = true;
        let mut s = state_from(vec![1.0; 6], vec![0.8; 6], vec![0.6; 6], 1.0);
        s.capture_anchor();
        for _ in 0..50 {
            let dt = stable_dt(&s, &p, &cfg, f64::INFINITY).unwrap();
            step(&mut s, &p, &cfg, dt).unwrap();
            assert!(lemma22_check(&s).unwrap().values().iter().all(|&x| x == 0.0));
            assert!(representation_residual(&s).unwrap() <= 1e-15);
        }
    }

    #[test]
    fn mass_check_cases() {
        let grid = GridSpec::uniform(1, 1.0, 4).unwrap();
        let p = ModelParams::new(1.0, 1.0, 1.0).unwrap();
        let steady = synthetic(&[1.0; 5], 0.1);
        match mass_bound_check(&steady, &grid, &p) {
            MassCheck::Checked {
                passed,
                worst_margin,
                ..
            } => {
                assert!(passed);
                assert_eq!(worst_margin, 0.0);
            }
            MassCheck::Skipped => panic!("should run"),
        }
        let mut high = synthetic(&[1.0; 3], 0.1);
        high[2].mass_u = 1.02;
        assert!(!mass_bound_check(&high, &grid, &p).passed());
        high[2].mass_u = 1.009;
        assert!(mass_bound_check(&high, &grid, &p).passed());
        let mut no_mu = p;
        no_mu.mu = 0.0;
        assert_eq!(mass_bound_check(&steady, &grid, &no_mu), MassCheck::Skipped);
        let mut renew = p;
        renew.eta = 1.0;
        assert_eq!(mass_bound_check(&steady, &grid, &renew), MassCheck::Skipped);
    }

    #[test]
    fn classifier_examples() {
        let cfg = ClassifyConfig::new(1e6);
        assert_eq!(
            classify(&synthetic(&[1.0; 20], 0.5), &cfg).classification,
            Classification::Bounded
        );

        let mut killed: Vec<f64> = (0..10).map(|k| 1.0 + k as f64).collect();
        killed.push(1e6);
        let v = classify(&synthetic(&killed, 0.1), &cfg);
        assert_eq!(v.classification, Classification::BlewUp);
        assert_eq!(v.crossing_time, Some(1.0));

        let slow: Vec<f64> = (0..=40).map(|k| 1.0 + 0.5 * k as f64 / 40.0).collect();
        let v = classify(&synthetic(&slow, 0.25), &cfg);
        assert_eq!(v.classification, Classification::Inconclusive);
        assert_eq!(v.crossing_time, None);
        assert_eq!(v.max_sup_u, 1.5);

        let fast: Vec<f64> = (0..=40).map(|k| (0.1 * k as f64).exp()).collect();
        assert_eq!(
            classify(&synthetic(&fast, 0.25), &cfg).classification,
            Classification::Growing
        );

        // Transient overshoot beyond G× the initial value.
        let mut spike = vec![1.0; 40];
        spike[5] = 2.5;
        assert_eq!(
            classify(&synthetic(&spike, 0.25), &cfg).classification,
            Classification::Inconclusive
        );
    }

    #[test]
    fn nan_counts_as_crossing() {
        let v = classify(&synthetic(&[1.0, 2.0, f64::NAN], 1.0), &ClassifyConfig::new(1e6));
        assert_eq!(v.classification, Classification::BlewUp);
        assert_eq!(v.crossing_time, Some(2.0));
    }

    proptest! {
        #[test]
        fn classify_ignores_time_scale(
            sups in prop::collection::vec(0.1f64..10.0, 2..40),
            scale in 1e-3f64..1e3,
        ) {
            let cfg = ClassifyConfig::new(1e6);
            let a = classify(&synthetic(&sups, 1.0), &cfg);
            let b = classify(&synthetic(&sups, scale), &cfg);
            prop_assert_eq!(a.classification, b.classification);
            prop_assert_eq!(a.max_sup_u, b.max_sup_u);
        }

        #[test]
        fn normalized_lp_norms_increase_with_p(values in prop::collection::vec(0.0f64..5.0, 8)) {
            let s = state_from(values, vec![1.0; 8], vec![0.0; 8], 3.0);
            let ps = [1.0, 1.5, 2.0, 4.0, 8.0];
            let r = record(&s, &ModelParams::new(1.0, 1.0, 1.0).unwrap(), &ps, 0.0);
            let measure = 3.0f64;
            let normalized: Vec<f64> = r.lp_u.iter().map(|(p, n)| n / measure.powf(1.0 / p)).collect();
            for pair in normalized.windows(2) {
                prop_assert!(pair[0] <= pair[1] * (1.0 + 1e-12));
            }
            // Hölder against the sup norm.
            for (p, n) in &r.lp_u {
                prop_assert!(*n <= r.sup_u * measure.powf(1.0 / p) * (1.0 + 1e-12));
            }
        }
    }
}
