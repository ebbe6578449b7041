//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p chemotaxis-core --test acceptance`.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use chemotaxis_core::constants::{
    classify_regime, compute_b2, compute_k1, compute_q, estimate_poincare, ConstantsReport, EstimatedFlags, Regime,
};
use chemotaxis_core::diagnostics::{
    check_coercivity, check_signal_energy, detect_entry_time, lyapunov_decay_check, mass_bound, DiagnosticsRecorder,
    DiagnosticsRow,
};
use chemotaxis_core::stepper::{
    Observer, Parameters, Schedule, SimState, StepRecord, Stepper, StepperConfig, EXPLICIT_EULER, HEUN,
};
use chemotaxis_core::{apply_helmholtz, Grid, HelmholtzSolver, MotilitySpec, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn exp_params(a: f64, b: f64, sigma: f64) -> Parameters {
    Parameters::new(a, b, sigma, MotilitySpec::exponential(1.0).unwrap()).unwrap()
}

fn random_field(grid: Grid, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> ScalarField {
    ScalarField::new(grid, (0..grid.len()).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

fn max_abs_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.values().iter().zip(b.values()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Worst mass-law residual and smallest `u` over every accepted step.
#[derive(Default)]
struct StepAudit {
    steps: usize,
    worst_residual: f64,
    min_u: f64,
}

impl Observer for StepAudit {
    fn observe(&mut self, _state: &SimState) -> chemotaxis_core::Result<()> {
        Ok(())
    }

    fn on_step(&mut self, r: &StepRecord) {
        if self.steps == 0 {
            self.min_u = f64::INFINITY;
        }
        self.steps += 1;
        self.worst_residual = self.worst_residual.max(r.mass_law_residual());
        self.min_u = self.min_u.min(r.min_u);
    }
}

struct Recorded {
    rows: Vec<DiagnosticsRow>,
    q_bound: f64,
    audit: StepAudit,
    final_state: SimState,
}

fn record(grid: Grid, params: Parameters, cfg: StepperConfig, u0: &ScalarField, t_end: f64, every: f64) -> Recorded {
    let mut rec = DiagnosticsRecorder::new(&params, u0).unwrap();
    let mut audit = StepAudit::default();
    let stepper = Stepper::new(grid, params, cfg).unwrap();
    let out = stepper
        .run(u0, t_end, &Schedule::every(every), &mut [&mut rec, &mut audit])
        .unwrap();
    Recorded {
        q_bound: rec.q_bound(),
        rows: rec.into_rows(),
        audit,
        final_state: out.final_state,
    }
}

fn helmholtz_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_res, mut worst_mp) = (0.0f64, 0.0f64);
    // unit spacing: the residual stencil itself is then evaluated to rounding
    for grid in [Grid::line(255.0, 256).unwrap(), Grid::rect([63.0, 63.0], [64, 64]).unwrap()] {
        let solver = HelmholtzSolver::new(grid);
        for _ in 0..100 {
            let u = random_field(grid, &mut rng, -1.0, 1.0);
            let v = solver.solve(&u);
            let res = max_abs_diff(&apply_helmholtz(&v), &u) / u.linf_norm();
            worst_res = worst_res.max(res);
            let (lo, hi) = (u.min(), u.max());
            let excess = v.values().iter().fold(0.0f64, |m, &x| m.max(lo - x).max(x - hi));
            worst_mp = worst_mp.max(excess);
        }
    }
    ensure(worst_res <= 1e-12, || format!("relative residual {worst_res:.3e} > 1e-12"))?;
    ensure(worst_mp <= 1e-12, || format!("maximum principle excess {worst_mp:.3e} > 1e-12"))?;
    Ok(format!("max relative residual {worst_res:.2e}, max-principle excess {worst_mp:.2e}"))
}

fn logistic_run() -> Recorded {
    let grid = Grid::line(1.0, 64).unwrap();
    let mut cfg = StepperConfig::default();
    cfg.dt_max = 1e-4;
    record(grid, exp_params(1.0, 1.0, 2.0), cfg, &ScalarField::constant(grid, 0.5), 1.0, 0.1)
}

fn homogeneous_logistic(run: &Recorded) -> Outcome {
    let u = &run.final_state.u;
    let exact = 1.0 / (1.0 + (-1.0f64).exp());
    let err = u.values().iter().fold(0.0f64, |m, x| m.max((x - exact).abs()));
    let spread = u.max() - u.min();
    ensure(run.final_state.t == 1.0, || format!("final time {}", run.final_state.t))?;
    ensure(err <= 1e-3, || format!("|u(1) - exact| = {err:.3e} > 1e-3"))?;
    ensure(spread <= 1e-13, || format!("spatial variation {spread:.3e} > 1e-13"))?;
    Ok(format!("max error {err:.2e}, spatial variation {spread:.1e}"))
}

fn bernoulli_runs() -> Vec<(f64, Recorded)> {
    let grid = Grid::line(1.0, 128).unwrap();
    let u0 = ScalarField::from_fn(grid, |x| 2.0 + 0.5 * (PI * x[0]).cos());
    [1.5, 2.5]
        .into_iter()
        .map(|sigma| {
            (
                sigma,
                record(grid, exp_params(1.0, 1.0, sigma), StepperConfig::default(), &u0, 5.0, 0.05),
            )
        })
        .collect()
}

fn bernoulli_mass_bound(runs: &[(f64, Recorded)]) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for (sigma, run) in runs {
        let mass0 = run.rows[0].mass;
        for r in &run.rows {
            let y = mass_bound(r.t, 1.0, 1.0, *sigma, mass0, 1.0);
            let excess = r.mass / y - 1.0;
            worst = worst.max(excess);
            ensure(r.mass <= y * (1.0 + 1e-8), || {
                format!("sigma={sigma}, t={}: mass {} > y(t) {}", r.t, r.mass, y)
            })?;
        }
    }
    Ok(format!("max (mass/y - 1) = {worst:.2e} over {} runs", runs.len()))
}

fn plane_run() -> Recorded {
    let grid = Grid::rect([1.0, 1.0], [64, 64]).unwrap();
    let u0 = ScalarField::from_fn(grid, |x| 2.0 + 0.5 * (PI * x[0]).cos() * (PI * x[1]).cos());
    record(grid, exp_params(1.0, 1.0, 2.0), StepperConfig::default(), &u0, 1.0, 0.05)
}

fn v_below_q(runs: &[&Recorded]) -> Outcome {
    let mut worst = 0.0f64;
    for run in runs {
        for r in &run.rows {
            worst = worst.max(r.linf_v / run.q_bound);
            ensure(r.linf_v <= run.q_bound * (1.0 + 1e-6), || {
                format!("t={}: max v {} > Q {}", r.t, r.linf_v, run.q_bound)
            })?;
        }
    }
    Ok(format!("max (max v / Q) = {worst:.3}"))
}

fn discrete_mass_law(runs: &[&Recorded]) -> Outcome {
    let mut worst = 0.0f64;
    let mut min_u = f64::INFINITY;
    let mut steps = 0;
    for run in runs {
        steps += run.audit.steps;
        worst = worst.max(run.audit.worst_residual);
        min_u = min_u.min(run.audit.min_u);
    }
    ensure(steps > 0, || "no steps taken".into())?;
    ensure(worst <= 1e-12, || format!("mass-law residual {worst:.3e} > 1e-12"))?;
    ensure(min_u >= 0.0, || format!("min u = {min_u:e} < 0"))?;
    Ok(format!("{steps} steps, worst relative residual {worst:.2e}, min u {min_u:.3e}"))
}

fn convergence_scenario(scheme: &str, dt_max: f64) -> (Grid, Stepper, ScalarField) {
    let grid = Grid::line(1.0, 32).unwrap();
    let mut cfg = StepperConfig::with_scheme(scheme);
    cfg.dt_max = dt_max;
    let stepper = Stepper::new(grid, exp_params(1.0, 1.0, 2.0), cfg).unwrap();
    let u0 = ScalarField::from_fn(grid, |x| 1.0 + 0.3 * (PI * x[0]).cos());
    (grid, stepper, u0)
}

fn equilibrium_convergence() -> Outcome {
    let b2 = compute_b2(1.0, 2.0, &MotilitySpec::exponential(1.0).unwrap(), 1.0, 1.0).unwrap();
    // independent evaluation: (1/4)^{1/2} · 1^{1/2} · (sup χ²e^{-χv} = 1)^{1/2}
    ensure((b2 - 0.5).abs() <= 1e-15, || format!("b2 = {b2}, expected 0.5"))?;
    let (grid, stepper, u0) = convergence_scenario(EXPLICIT_EULER, f64::INFINITY);
    let params = stepper.params().clone();
    ensure(params.b > b2, || "b must exceed b2".into())?;
    let mut rec = DiagnosticsRecorder::new(&params, &u0).unwrap();
    stepper.run(&u0, 50.0, &Schedule::every(0.5), &mut [&mut rec]).map_err(|e| e.to_string())?;
    let rows = rec.rows();
    let last = rows.last().unwrap();
    ensure(last.t == 50.0, || format!("final time {}", last.t))?;
    ensure(last.dist_u < 1e-3 && last.dist_v < 1e-3, || {
        format!("dist_u {:.3e}, dist_v {:.3e} at t=50", last.dist_u, last.dist_v)
    })?;
    let t_star = detect_entry_time(rows, 2.0, params.u_star(), grid.measure())
        .unwrap()
        .ok_or("mass never entered 2u*|Ω|")?;
    let decay = lyapunov_decay_check(rows, t_star);
    ensure(decay.monotone, || format!("F increased at t = {:?}", decay.first_violation))?;
    ensure(decay.dist_integral.is_finite(), || "time integral not finite".into())?;
    Ok(format!(
        "b2 = {b2}, T* = {t_star}, dist_u {:.2e}, dist_v {:.2e}, F monotone over {} pairs",
        last.dist_u, last.dist_v, decay.checked_pairs
    ))
}

fn coercivity() -> Outcome {
    let grid = Grid::line(1.0, 64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for sigma in [1.5, 2.0, 3.0] {
        let k1 = compute_k1(sigma, 1.0).unwrap();
        let q = compute_q(sigma).unwrap();
        for i in 0..200 {
            let raw = match i % 3 {
                0 => random_field(grid, &mut rng, 0.0, 1.0),
                1 => random_field(grid, &mut rng, 0.0, 1.0).map(|x| x.powi(6)),
                _ => {
                    let (k, ph) = (rng.gen_range(1..8) as f64, rng.gen_range(0.0..PI));
                    ScalarField::from_fn(grid, |x| 1.0 + (PI * k * x[0] + ph).cos())
                }
            };
            let target = rng.gen_range(0.0..2.0);
            let u = raw.map(|x| x * target / raw.integrate());
            ensure(u.integrate() <= 2.0 * (1.0 + 1e-14), || "mass constraint".into())?;
            let c = check_coercivity(&u, 1.0, sigma, k1, q).unwrap();
            worst = worst.max(c.lhs / c.rhs);
            ensure(c.ok, || format!("sigma={sigma}: lhs {} > rhs {}", c.lhs, c.rhs))?;
        }
    }
    Ok(format!("600 fields, max lhs/rhs = {worst:.3e}"))
}

fn signal_energy() -> Outcome {
    let grid = Grid::line(1.0, 128).unwrap();
    let solver = HelmholtzSolver::new(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let u = if i % 2 == 0 {
            random_field(grid, &mut rng, 0.0, 3.0)
        } else {
            let k = rng.gen_range(1..20) as f64;
            ScalarField::from_fn(grid, |x| 1.0 + 0.9 * (PI * k * x[0]).cos())
        };
        let v = solver.solve(&u);
        let c = check_signal_energy(&u, &v, 1.0, 1.0, 2.0).unwrap();
        worst = worst.max(c.lhs / c.rhs);
        ensure(c.ok, || format!("lhs {} > rhs {}", c.lhs, c.rhs))?;
    }
    Ok(format!("100 fields, max lhs/rhs = {worst:.3}"))
}

fn poincare() -> Outcome {
    let grid = Grid::line(1.0, 256).unwrap();
    let est = estimate_poincare(&grid, 2.0).map_err(|e| e.to_string())?;
    let eig = est.eigen_value.ok_or("no eigenvalue cross-check")?;
    let rel_eig = (est.xi - eig).abs() / eig;
    let rel_pi = (est.xi * PI - 1.0).abs();
    ensure(rel_eig <= 1e-6, || format!("xi {} vs 1/sqrt(λ1) {}: rel {rel_eig:.2e}", est.xi, eig))?;
    ensure(rel_pi <= 0.01, || format!("xi {} vs 1/π: rel {rel_pi:.2e}", est.xi))?;
    Ok(format!("xi = {:.10}, rel. to 1/sqrt(λ1) {rel_eig:.1e}, rel. to 1/π {rel_pi:.1e}", est.xi))
}

fn solution_at_one(scheme: &str, dt_max: f64) -> Result<ScalarField, String> {
    let (_, stepper, u0) = convergence_scenario(scheme, dt_max);
    let out = stepper.run(&u0, 1.0, &Schedule::default(), &mut []).map_err(|e| e.to_string())?;
    Ok(out.final_state.u)
}

fn observed_orders(scheme: &str) -> Result<Vec<f64>, String> {
    let reference = solution_at_one(scheme, 1e-5)?;
    let errors = [4e-4, 2e-4, 1e-4]
        .iter()
        .map(|&dt| solution_at_one(scheme, dt).map(|u| max_abs_diff(&u, &reference)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect())
}

fn self_convergence() -> Outcome {
    let heun = observed_orders(HEUN)?;
    let euler = observed_orders(EXPLICIT_EULER)?;
    ensure(heun.iter().all(|p| (1.7..=2.2).contains(p)), || format!("Heun orders {heun:.3?}"))?;
    ensure(euler.iter().all(|p| (0.8..=1.2).contains(p)), || format!("Euler orders {euler:.3?}"))?;
    Ok(format!("Heun orders {heun:.3?}, Euler orders {euler:.3?}"))
}

fn synthetic_report(b2: f64, b1: f64, convexity: f64) -> ConstantsReport {
    ConstantsReport {
        dim: 3,
        omega_measure: 1.0,
        a: 1.0,
        b: 1.0,
        sigma: 2.0,
        u_star: 1.0,
        q_bound: 1.0,
        q_exponent: 2.0,
        k1: 1.0,
        k2: 1.0,
        xi: 1.0,
        b2,
        kappa_est: 2.0 * (b1 - 1.0),
        b1_est: b1,
        sup_ratio_q: 1.0,
        sup_ratio_inf: 1.0,
        convexity_inf: convexity,
        estimated: EstimatedFlags {
            xi: false,
            kappa_est: true,
            b1_est: true,
        },
    }
}

fn regime_table() -> Outcome {
    let table: [(usize, f64, f64, (f64, f64, f64), Regime, &str); 9] = [
        (1, 1.5, 0.1, (0.5, 3.0, 1.0), Regime::GlobalBounded(1), "global boundedness case (1)"),
        (3, 2.5, 0.1, (0.5, 3.0, 1.0), Regime::GlobalBounded(2), "global boundedness case (2)"),
        (3, 2.0, 5.0, (10.0, 3.0, 1.0), Regime::GlobalBounded(3), "global boundedness case (3)"),
        (2, 1.5, 1.0, (0.5, 3.0, 1.0), Regime::Converges(1), "convergence to equilibrium case (1)"),
        (3, 2.5, 1.0, (0.5, 3.0, 1.0), Regime::Converges(2), "convergence to equilibrium case (2)"),
        (3, 2.0, 5.0, (0.5, 3.0, 1.0), Regime::Converges(3), "convergence to equilibrium case (3)"),
        (3, 1.9, 1.0, (0.5, 3.0, 2.0), Regime::Converges(4), "convergence to equilibrium case (4)"),
        (3, 1.9, 1.0, (0.5, 3.0, 1.0), Regime::Unclassified, "unclassified"),
        (3, 2.0, 2.0, (0.5, 3.0, 1.0), Regime::Unclassified, "unclassified"),
    ];
    for (n, sigma, b, (b2, b1, conv), expect, prefix) in table {
        let params = exp_params(1.0, b, sigma);
        let c = classify_regime(n, &params, &synthetic_report(b2, b1, conv));
        ensure(c.regime == expect && c.label.starts_with(prefix), || {
            format!("n={n}, sigma={sigma}, b={b}: got {:?} `{}`, expected {expect:?}", c.regime, c.label)
        })?;
        let uses_b1 = n >= 3 && sigma == 2.0;
        ensure(c.provisional == uses_b1, || format!("provisional flag wrong for `{}`", c.label))?;
    }
    // and on constants computed from an actual configuration
    let grid = Grid::line(1.0, 32).unwrap();
    let params = exp_params(1.0, 1.0, 2.0);
    let report = ConstantsReport::compute(&ScalarField::constant(grid, 1.0), &params).map_err(|e| e.to_string())?;
    let c = classify_regime(1, &params, &report);
    ensure(c.regime == Regime::Converges(1), || format!("computed report gave `{}`", c.label))?;
    Ok(format!("9 table rows plus computed report: `{}`", c.label))
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let start = Instant::now();
    let mut out = f();
    let took = start.elapsed();
    if let (Ok(_), Some(limit)) = (&out, limit) {
        if took > limit {
            out = Err(format!("took {took:.2?}, limit {limit:?}"));
        }
    }
    (out, took)
}

fn main() {
    let secs = |s: u64| Some(Duration::from_secs(s));
    let mut results: Vec<(u32, &str, Outcome, Duration)> = Vec::new();
    let mut push = |id, name, (out, took)| results.push((id, name, out, took));

    push(1, "Helmholtz exactness", timed(secs(5), helmholtz_exactness));

    let start = Instant::now();
    let logistic = logistic_run();
    let logistic_time = start.elapsed();
    let (out, took) = timed(None, || homogeneous_logistic(&logistic));
    let total = logistic_time + took;
    let out = match out {
        Ok(_) if total > Duration::from_secs(10) => Err(format!("took {total:.2?}, limit 10s")),
        o => o,
    };
    push(2, "homogeneous logistic oracle", (out, total));

    let start = Instant::now();
    let bern = bernoulli_runs();
    let bern_time = start.elapsed();
    let (out, took) = timed(None, || bernoulli_mass_bound(&bern));
    let total = bern_time + took;
    let out = match out {
        Ok(_) if total > Duration::from_secs(30) => Err(format!("took {total:.2?}, limit 30s")),
        o => o,
    };
    push(3, "Bernoulli mass bound", (out, total));

    let start = Instant::now();
    let plane = plane_run();
    let plane_time = start.elapsed();
    let (out, took) = timed(None, || v_below_q(&[&bern[0].1, &bern[1].1, &plane]));
    push(4, "signal bounded by Q", (out, plane_time + took));

    push(
        5,
        "discrete mass law and positivity",
        timed(None, || discrete_mass_law(&[&logistic, &bern[0].1, &bern[1].1, &plane])),
    );
    push(6, "convergence to equilibrium", timed(secs(60), equilibrium_convergence));
    push(7, "L^q coercivity inequality", timed(secs(5), coercivity));
    push(8, "signal energy estimate", timed(None, signal_energy));
    push(9, "Poincaré estimator", timed(secs(10), poincare));
    push(10, "time-step self-convergence", timed(None, self_convergence));
    push(11, "regime classifier table", timed(None, regime_table));

    let mut failed = 0;
    for (id, name, out, took) in &results {
        match out {
            Ok(detail) => println!("PASS {id:>2} {name}: {detail} [{took:.2?}]"),
            Err(why) => {
                failed += 1;
                println!("FAIL {id:>2} {name}: {why} [{took:.2?}]");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
