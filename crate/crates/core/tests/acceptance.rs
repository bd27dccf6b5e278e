//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines always reach the console.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use taxisim::config::RunConfig;
use taxisim::diagnostics::{
    classify, mass_bound_check, BoundednessVerdict, Classification, ClassifyConfig, MassCheck,
};
use taxisim::grid::{self, Field, GridSpec};
use taxisim::model::{ode_reference, transport_u, InitialData, ModelParams, Scenario};
use taxisim::output;
use taxisim::stepper::{run, solve_elliptic, NullObserver, RunOutcome, SolverConfig, Termination};
use taxisim::sweep::{estimate_threshold, run_sweep, NoBracket, SweepMode, SweepPlan, SweepResult};

struct Verdict {
    id: usize,
    title: &'static str,
    pass: bool,
    detail: String,
}

struct Case {
    name: String,
    params: ModelParams,
    grid: Arc<GridSpec>,
    outcome: RunOutcome,
}

#[derive(Default)]
struct Suite {
    cases: Vec<Case>,
    verdicts: Vec<Verdict>,
}

impl Suite {
    fn report(&mut self, id: usize, title: &'static str, pass: bool, detail: String) {
        self.verdicts.push(Verdict {
            id,
            title,
            pass,
            detail,
        });
    }

    fn run_case(
        &mut self,
        name: &str,
        grid: &Arc<GridSpec>,
        params: ModelParams,
        cfg: &SolverConfig,
        init: InitialData,
    ) -> usize {
        let outcome = run(init, &params, cfg, &[2.0], &mut NullObserver);
        self.cases.push(Case {
            name: name.to_string(),
            params,
            grid: Arc::clone(grid),
            outcome,
        });
        self.cases.len() - 1
    }
}

fn grid(extent: &[f64], cells: &[usize]) -> Arc<GridSpec> {
    Arc::new(GridSpec::new(extent, cells).unwrap())
}

fn params(chi: f64, xi: f64, mu: f64) -> ModelParams {
    ModelParams::new(chi, xi, mu).unwrap()
}

fn bump(amplitude: f64, sigma: f64, w_bar: f64) -> Scenario {
    Scenario::GaussianBump {
        amplitude,
        sigma,
        center: None,
        w_bar,
    }
}

fn verdict_of(outcome: &RunOutcome, cfg: &SolverConfig) -> BoundednessVerdict {
    classify(&outcome.records, &ClassifyConfig::from(cfg))
}

fn steady_state(suite: &mut Suite) {
    let g = grid(&[1.0], &[64]);
    let p = params(1.0, 1.0, 1.0);
    let cfg = SolverConfig::new(10.0);
    let started = Instant::now();
    let idx = suite.run_case("steady-1d", &g, p, &cfg, Scenario::Steady.initial_data(&g).unwrap());
    let elapsed = started.elapsed().as_secs_f64();
    let outcome = &suite.cases[idx].outcome;
    let state = outcome.final_state.as_ref().unwrap();
    let dev = |f: &Field, c: f64| f.values().iter().map(|x| (x - c).abs()).fold(0.0, f64::max);
    let worst = dev(&state.u, 1.0).max(dev(&state.v, 1.0)).max(dev(&state.w, 0.0));
    let extremes = outcome
        .records
        .iter()
        .map(|r| {
            [(r.min_u, 1.0), (r.sup_u, 1.0), (r.min_v, 1.0), (r.sup_v, 1.0), (r.min_w, 0.0), (r.sup_w, 0.0)]
                .iter()
                .map(|(x, c)| (x - c).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let worst = worst.max(extremes);
    let class = verdict_of(outcome, &cfg).classification;
    suite.report(
        1,
        "steady-state fidelity",
        outcome.termination == Termination::Completed
            && worst <= 1e-10
            && class == Classification::Bounded
            && elapsed < 5.0,
        format!(
            "max deviation {worst:.3e}, verdict {}, {:.2} s",
            class.as_str(),
            elapsed
        ),
    );
}

fn ode_oracle(suite: &mut Suite) {
    let g = grid(&[1.0], &[16]);
    let p = params(1.0, 1.0, 1.0);
    let y0 = [2.0, 0.5, 0.5];
    let t_end = 5.0;
    let reference = ode_reference(&p, y0, t_end, 1e-4).unwrap();
    let homogeneous = || {
        InitialData::new(
            Field::constant(&g, y0[0]),
            Field::constant(&g, y0[1]),
            Field::constant(&g, y0[2]),
        )
        .unwrap()
    };
    let mut cfg = SolverConfig::new(t_end);
    cfg.output_every = 0.25;
    let error_of = |outcome: &RunOutcome| {
        outcome
            .records
            .iter()
            .map(|r| {
                let y = reference.at(r.t);
                let scale = y.iter().fold(0.0f64, |m, c| m.max(c.abs()));
                let pde = [r.sup_u, r.sup_v, r.sup_w];
                let spread = (r.sup_u - r.min_u).abs() + (r.sup_v - r.min_v).abs() + (r.sup_w - r.min_w).abs();
                let diff = pde.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(spread, f64::max);
                diff / scale
            })
            .fold(0.0, f64::max)
    };
    let coarse = suite.run_case("homogeneous-1d", &g, p, &cfg, homogeneous());
    let default_dt = suite.cases[coarse].outcome.summary.max_dt;
    let mut fine_cfg = cfg.clone();
    fine_cfg.dt_max = 0.5 * default_dt;
    let fine = suite.run_case("homogeneous-1d-half-dt", &g, p, &fine_cfg, homogeneous());
    let e1 = error_of(&suite.cases[coarse].outcome);
    let e2 = error_of(&suite.cases[fine].outcome);
    let ratio = e1 / e2;
    let completed = [coarse, fine]
        .iter()
        .all(|&i| suite.cases[i].outcome.termination == Termination::Completed);
    suite.report(
        2,
        "ODE-oracle equivalence",
        completed && e1 <= 1e-3 && (1.7..=2.3).contains(&ratio),
        format!("dt {default_dt:.3e}: rel err {e1:.3e}; dt/2: {e2:.3e}; ratio {ratio:.3}"),
    );
}

fn conservation(suite: &mut Suite) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for dim in 1..=3 {
        let max_cells = [40, 16, 8][dim - 1];
        for _ in 0..50 {
            let extent: Vec<f64> = (0..dim).map(|_| rng.random_range(0.5..3.0)).collect();
            let cells: Vec<usize> = (0..dim).map(|_| rng.random_range(3..=max_cells)).collect();
            let g = grid(&extent, &cells);
            let mut field = |lo: f64, hi: f64| {
                let vals = (0..g.len()).map(|_| rng.random_range(lo..hi)).collect();
                Field::from_values(&g, vals).unwrap()
            };
            let (u, v, w) = (field(0.0, 3.0), field(0.0, 3.0), field(0.0, 1.0));
            let p = params(rng.random_range(0.1..5.0), rng.random_range(0.0..5.0), 1.0);
            let total = grid::integrate(&transport_u(&u, &v, &w, &p));
            worst = worst.max(total.abs() / grid::integrate(&u));
        }
    }
    suite.report(
        3,
        "discrete conservation",
        worst <= 1e-12,
        format!("worst |sum|/||u||_1 over 150 states: {worst:.3e}"),
    );
}

fn lemma22_refinement(suite: &mut Suite) {
    let p = params(1.0, 1.0, 1.0);
    let scenario = bump(1.0, 0.25, 0.5);
    let started = Instant::now();
    let mut results = Vec::new();
    for n in [128, 256] {
        for cfl in [SolverConfig::DEFAULT_CFL, 0.5 * SolverConfig::DEFAULT_CFL] {
            let g = grid(&[4.0], &[n]);
            let mut cfg = SolverConfig::new(1.0);
            cfg.cfl_safety = cfl;
            let idx = suite.run_case(
                &format!("bump-1d-n{n}-cfl{cfl}"),
                &g,
                p,
                &cfg,
                scenario.initial_data(&g).unwrap(),
            );
            let outcome = &suite.cases[idx].outcome;
            let violation = outcome
                .records
                .iter()
                .map(|r| r.lemma22_max_violation)
                .fold(0.0, f64::max);
            results.push((violation, outcome.summary.max_lemma22_ratio, outcome.termination.clone()));
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    let v: Vec<f64> = results.iter().map(|r| r.0).collect();
    // (h,dt), (h,dt/2), (h/2,dt), (h/2,dt/2): each refinement step must not increase it.
    let monotone = v[1] <= v[0] && v[2] <= v[0] && v[3] <= v[1] && v[3] <= v[2];
    let within = results.iter().all(|r| r.1 <= 1.0 && r.2 == Termination::Completed);
    suite.report(
        6,
        "lower bound on the Laplacian of w",
        within && monotone && elapsed < 30.0,
        format!(
            "max violation [{:.3e}, {:.3e}, {:.3e}, {:.3e}], max violation/tol {:.3e}, {:.1} s",
            v[0],
            v[1],
            v[2],
            v[3],
            results.iter().map(|r| r.1).fold(0.0, f64::max),
            elapsed
        ),
    );
}

fn small_theta(suite: &mut Suite) {
    let p = params(1.0, 1.0, 10.0);
    let scenario = bump(1.0, 1.0, 0.5);
    let cfg = SolverConfig::new(50.0);
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, g) in [
        ("small-theta-1d", grid(&[10.0], &[128])),
        ("small-theta-2d", grid(&[10.0, 10.0], &[64, 64])),
    ] {
        let started = Instant::now();
        let idx = suite.run_case(name, &g, p, &cfg, scenario.initial_data(&g).unwrap());
        let elapsed = started.elapsed().as_secs_f64();
        let outcome = &suite.cases[idx].outcome;
        let verdict = verdict_of(outcome, &cfg);
        let ok = outcome.termination == Termination::Completed
            && verdict.classification == Classification::Bounded
            && outcome.summary.max_sup_u <= 5.0
            && (g.dim() == 1 || elapsed < 120.0);
        pass &= ok;
        detail.push(format!(
            "{}D: {}, sup u {:.4}, {:.1} s",
            g.dim(),
            verdict.classification.as_str(),
            outcome.summary.max_sup_u,
            elapsed
        ));
    }
    suite.report(8, "boundedness at small theta", pass, detail.join("; "));
}

fn parabolic_elliptic(suite: &mut Suite) {
    let g = grid(&[4.0, 4.0, 4.0], &[16, 16, 16]);
    let mut base_model = params(1.0, 1.0, 1.0);
    base_model.tau = 0;
    let scenario = bump(1.0, 0.5, 0.5);
    let cfg = SolverConfig::new(10.0);
    let plan = SweepPlan {
        mode: SweepMode::FixMuVaryChi,
        fixed_value: 1.0,
        theta_values: vec![1.0],
        base_model,
        base_solver: cfg.clone(),
        grid: Arc::clone(&g),
        scenario: scenario.clone(),
        repetitions: 1,
        workers: 1,
    };
    let started = Instant::now();
    let results = run_sweep(&plan).unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    let summary = output::sweep_summary(&results);
    let annotation = summary
        .lines()
        .find(|l| l.starts_with("pe_condition"))
        .unwrap_or("pe_condition missing")
        .to_string();
    let r = &results[0];
    // The same run again, kept for the suite-wide invariant checks.
    suite.run_case("tau0-3d", &g, plan.params_for(1.0), &cfg, scenario.initial_data(&g).unwrap());
    suite.report(
        9,
        "parabolic-elliptic comparison regime",
        r.verdict.classification == Classification::Bounded
            && r.pe_condition == Some(true)
            && annotation == "pe_condition = 1:true",
        format!(
            "{}, sup u {:.4}, sweep annotation '{annotation}', {:.1} s",
            r.verdict.classification.as_str(),
            r.max_sup_u,
            elapsed
        ),
    );
}

fn elliptic_order(suite: &mut Suite) {
    let l = 1.0;
    let k = std::f64::consts::PI / l;
    let cfg = SolverConfig::new(1.0);
    let err = |n: usize| {
        let g = grid(&[l], &[n]);
        let u = Field::from_fn(&g, |x| (1.0 + k * k) * (k * x[0]).cos());
        let v = solve_elliptic(&u, &cfg).unwrap();
        let exact = Field::from_fn(&g, |x| (k * x[0]).cos());
        v.values()
            .iter()
            .zip(exact.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let (e32, e64) = (err(32), err(64));
    let order = (e32 / e64).log2();
    suite.report(
        10,
        "elliptic solve accuracy",
        order >= 1.8,
        format!("max error n=32 {e32:.3e}, n=64 {e64:.3e}, order {order:.3}"),
    );
}

fn synthetic(theta: &[f64], verdicts: &[Classification]) -> Vec<SweepResult> {
    theta
        .iter()
        .zip(verdicts)
        .map(|(&theta, &classification)| SweepResult {
            theta,
            chi: theta,
            mu: 1.0,
            repetition: 0,
            verdict: BoundednessVerdict {
                classification,
                max_sup_u: 1.0,
                t_of_max: 0.0,
                crossing_time: None,
            },
            termination: "completed".into(),
            max_sup_u: 1.0,
            pe_condition: None,
            wall_time: 0.0,
        })
        .collect()
}

fn sweep_determinism(suite: &mut Suite) {
    let plan = |workers| SweepPlan {
        mode: SweepMode::FixMuVaryChi,
        fixed_value: 1.0,
        theta_values: vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0],
        base_model: params(1.0, 1.0, 1.0),
        base_solver: SolverConfig::new(2.0),
        grid: grid(&[4.0], &[32]),
        scenario: Scenario::RandomPerturb {
            amplitude: 0.2,
            w_bar: 0.3,
            seed: 7,
            perturb_w: true,
        },
        repetitions: 2,
        workers,
    };
    let first = output::sweep_table_to_string(&run_sweep(&plan(4)).unwrap());
    let second = output::sweep_table_to_string(&run_sweep(&plan(1)).unwrap());
    let identical = first == second;

    use Classification::{Bounded, Growing};
    let theta = [0.1, 0.2, 0.4];
    let bracket = estimate_threshold(&synthetic(&theta, &[Bounded, Bounded, Growing]));
    let all = estimate_threshold(&synthetic(&theta, &[Bounded, Bounded, Bounded]));
    let non_monotone = estimate_threshold(&synthetic(&theta, &[Bounded, Growing, Bounded]));
    let examples = bracket == Ok((0.2, 0.4))
        && all == Err(NoBracket::AllBounded)
        && non_monotone == Err(NoBracket::NonMonotone);
    suite.report(
        11,
        "sweep determinism and bracketing",
        identical && examples,
        format!(
            "12-run tables identical across 4 and 1 workers: {identical}; brackets {bracket:?}, {all:?}, {non_monotone:?}"
        ),
    );
}

fn bits(f: &Field) -> Vec<u64> {
    f.values().iter().map(|x| x.to_bits()).collect()
}

fn io_round_trips(suite: &mut Suite) {
    let text = "\
[grid] dim=2 extent=3,2 cells=24,16
[model] chi=1.5 xi=0.7 mu=2
[solver] t_end=0.5 anchor_time=0.1
[scenario] name=random-perturb amplitude=0.3 w_bar=0.4 seed=11 perturb_w=true
[outputs] dir=/tmp/taxisim-acceptance cadence=0.05 p_values=1.5,2,3
";
    let cfg = RunConfig::parse(text, std::path::Path::new("/")).unwrap();
    let echo = cfg.to_config_text();
    let reparsed = RunConfig::parse(&echo, std::path::Path::new("/")).unwrap();
    let echo_ok = reparsed == cfg && reparsed.to_config_text() == echo;

    let g = Arc::clone(cfg.require_grid().unwrap());
    let init = || cfg.scenario.initial_data(&g).unwrap();
    let a = run(init(), &cfg.model, &cfg.solver, &cfg.outputs.p_values, &mut NullObserver);
    let b = run(
        reparsed.scenario.initial_data(&g).unwrap(),
        &reparsed.model,
        &reparsed.solver,
        &reparsed.outputs.p_values,
        &mut NullObserver,
    );
    let csv = output::timeseries_to_string(&a.records, &cfg.outputs.p_values);
    let rerun_ok = csv == output::timeseries_to_string(&b.records, &reparsed.outputs.p_values);
    let parsed = output::parse_timeseries(&csv).unwrap();
    let series_ok = parsed.records == a.records
        && output::timeseries_to_string(&parsed.records, &parsed.p_values) == csv;

    let state = a.final_state.as_ref().unwrap();
    let snap = output::snapshot_to_string(state.t, &state.u, &state.v, &state.w);
    let back = output::parse_snapshot(&snap).unwrap();
    let snapshot_ok = back.t.to_bits() == state.t.to_bits()
        && bits(&back.u) == bits(&state.u)
        && bits(&back.v) == bits(&state.v)
        && bits(&back.w) == bits(&state.w)
        && back.u.grid() == state.u.grid();

    suite.cases.push(Case {
        name: "random-2d-io".into(),
        params: cfg.model,
        grid: g,
        outcome: a,
    });
    suite.report(
        12,
        "I/O round-trips",
        echo_ok && rerun_ok && series_ok && snapshot_ok,
        format!(
            "config echo {echo_ok}, rerun from echo {rerun_ok}, time series {series_ok}, snapshot {snapshot_ok}"
        ),
    );
}

fn suite_invariants(suite: &mut Suite) {
    let mut bad = Vec::new();
    for c in &suite.cases {
        let s = &c.outcome.summary;
        let ok = s.invariant_violations == 0 && s.min_u >= 0.0 && s.min_v >= 0.0 && s.min_w >= 0.0 && s.max_w_excess <= 0.0;
        if !ok {
            bad.push(format!(
                "{} ({} violations, min u {:.2e}, min v {:.2e}, min w {:.2e}, w excess {:.2e})",
                c.name, s.invariant_violations, s.min_u, s.min_v, s.min_w, s.max_w_excess
            ));
        }
    }
    let steps: usize = suite.cases.iter().map(|c| c.outcome.summary.steps).sum();
    suite.report(
        4,
        "positivity and w <= sup w(anchor)",
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} runs, {steps} accepted steps, zero violations", suite.cases.len())
        } else {
            bad.join("; ")
        },
    );

    let mut worst = 0.0f64;
    let mut checked = 0;
    for c in suite.cases.iter().filter(|c| c.params.eta == 0.0) {
        for r in &c.outcome.records {
            let ratio = if r.sup_w > 0.0 {
                r.repr_residual / r.sup_w
            } else if r.repr_residual == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(ratio);
            checked += 1;
        }
    }
    suite.report(
        5,
        "representation of w",
        worst <= 1e-12,
        format!("{checked} records, worst residual/sup w {worst:.3e}"),
    );

    let mut failures = Vec::new();
    let mut checked = 0;
    let mut tightest = f64::INFINITY;
    for c in suite.cases.iter().filter(|c| c.params.mu > 0.0 && c.params.eta == 0.0) {
        match mass_bound_check(&c.outcome.records, &c.grid, &c.params) {
            MassCheck::Checked {
                passed, worst_margin, ..
            } => {
                checked += 1;
                tightest = tightest.min(worst_margin);
                if !passed {
                    failures.push(c.name.clone());
                }
            }
            MassCheck::Skipped => failures.push(format!("{} skipped", c.name)),
        }
    }
    suite.report(
        7,
        "mass bound",
        failures.is_empty() && checked > 0,
        format!("{checked} runs checked, smallest margin {tightest:.4e}, failures {failures:?}"),
    );
}

fn main() {
    let started = Instant::now();
    let mut suite = Suite::default();
    steady_state(&mut suite);
    ode_oracle(&mut suite);
    conservation(&mut suite);
    lemma22_refinement(&mut suite);
    small_theta(&mut suite);
    parabolic_elliptic(&mut suite);
    elliptic_order(&mut suite);
    sweep_determinism(&mut suite);
    io_round_trips(&mut suite);
    suite_invariants(&mut suite);

    suite.verdicts.sort_by_key(|v| v.id);
    let mut failed = 0;
    for v in &suite.verdicts {
        println!(
            "criterion {:>2} {}: {} ({})",
            v.id,
            if v.pass { "PASS" } else { "FAIL" },
            v.title,
            v.detail
        );
        if !v.pass {
            failed += 1;
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed, {:.1} s",
        suite.verdicts.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
