use std::io::Write;
use std::path::{Path, PathBuf};

use chemotaxis_core::constants::{
    classify_regime, compute_b2, compute_k1, compute_k2, compute_q, estimate_gagliardo_nirenberg, estimate_poincare,
    estimate_regularity, ConstantsReport,
};
use chemotaxis_core::diagnostics::{self, detect_entry_time, lyapunov_decay_check, DiagnosticsRecorder};
use chemotaxis_core::stepper::{Event, Observer, Schedule, SimState, Stepper};
use chemotaxis_core::{solve_helmholtz, Error, Result, ScalarField};
use rayon::prelude::*;

use crate::config::{OutputSpec, ScenarioConfig};
use crate::snapshot;

/// Mass level, in units of `u*|Ω|`, after which energy decay is checked.
const ENTRY_ALPHA: f64 = 2.0;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn stdout_err(source: std::io::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<stdout>"),
        source,
    }
}

struct SnapshotWriter<'a> {
    output: &'a OutputSpec,
    pending: Vec<f64>,
}

impl<'a> SnapshotWriter<'a> {
    fn new(output: &'a OutputSpec) -> Self {
        Self {
            output,
            pending: output.snapshot_times.clone(),
        }
    }
}

impl Observer for SnapshotWriter<'_> {
    fn observe(&mut self, state: &SimState) -> Result<()> {
        let hits: Vec<f64> = self
            .pending
            .iter()
            .copied()
            .filter(|t| (t - state.t).abs() <= 1e-12 * t.abs().max(1.0))
            .collect();
        for t in hits {
            if let Some(path) = self.output.snapshot_path(t) {
                snapshot::write(&path, &state.u, &state.v)?;
            }
            self.pending.retain(|&p| p != t);
        }
        Ok(())
    }
}

fn schedule_for(cfg: &ScenarioConfig) -> Result<Schedule> {
    if let Some(&t) = cfg.output.snapshot_times.iter().find(|&&t| t > cfg.t_end) {
        return Err(Error::param("snapshot_times", format!("{t} lies beyond t_end = {}", cfg.t_end)));
    }
    Ok(Schedule {
        every: cfg.observe_every,
        extra: cfg.output.snapshot_times.clone(),
    })
}

/// Runs the scenario, writes diagnostics and snapshots, and prints a summary.
/// A detected blow-up is returned as an error after the diagnostics gathered
/// so far have been written.
pub fn run(cfg: &ScenarioConfig, out: &mut impl Write) -> Result<()> {
    let schedule = schedule_for(cfg)?;
    let stepper = Stepper::new(cfg.grid, cfg.params.clone(), cfg.stepper.clone())?;
    let mut recorder = DiagnosticsRecorder::new(&cfg.params, &cfg.u0)?;
    let mut snapshots = SnapshotWriter::new(&cfg.output);
    let outcome = stepper.run(&cfg.u0, cfg.t_end, &schedule, &mut [&mut recorder, &mut snapshots]);
    if let Some(path) = &cfg.output.diagnostics {
        diagnostics::write_csv(path, recorder.rows())?;
    }
    let summary = outcome?;
    let rows = recorder.rows();
    let last = rows.last().expect("initial state is always observed");
    let u_star = cfg.params.u_star();
    let t_star = detect_entry_time(rows, ENTRY_ALPHA, u_star, cfg.grid.measure())?;
    let decay = t_star.map(|t| lyapunov_decay_check(rows, t));
    let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(stdout_err);
    w(out, format!("initial={}", cfg.initial.kind()))?;
    w(out, format!("t_end={}", summary.final_state.t))?;
    w(out, format!("steps={}", summary.steps))?;
    w(out, format!("observations={}", rows.len()))?;
    w(out, format!("u_star={u_star}"))?;
    w(out, format!("Q={}", recorder.q_bound()))?;
    w(out, format!("final_mass={}", last.mass))?;
    w(out, format!("final_dist_u={}", last.dist_u))?;
    w(out, format!("final_dist_v={}", last.dist_v))?;
    w(out, format!("final_lyapunov={}", last.lyapunov))?;
    w(out, format!("mass_bound_ok={}", rows.iter().all(|r| r.mass_ok())))?;
    w(out, format!("v_bound_ok={}", rows.iter().all(|r| r.v_bound_ok)))?;
    w(
        out,
        format!(
            "coercivity_ok={}",
            rows.iter().all(|r| r.ineq115.map_or(true, |c| c.ok))
        ),
    )?;
    match (t_star, &decay) {
        (Some(t), Some(d)) => {
            w(out, format!("t_star={t}"))?;
            w(out, format!("lyapunov_monotone={}", d.monotone))?;
        }
        _ => w(out, "t_star=none".into())?,
    }
    let violations = summary
        .events
        .iter()
        .filter(|e| matches!(e, Event::PositivityViolation { .. }))
        .count();
    w(out, format!("positivity_violations={violations}"))?;
    if let Some(path) = &cfg.output.diagnostics {
        w(out, format!("diagnostics={}", path.display()))?;
    }
    Ok(())
}

/// Prints every constant and the regime classification for the grid dimension.
pub fn constants(cfg: &ScenarioConfig, out: &mut impl Write) -> Result<()> {
    let report = ConstantsReport::compute(&cfg.u0, &cfg.params)?;
    let hypothesis = cfg.params.motility.check_hypothesis(report.q_bound);
    let class = classify_regime(cfg.grid.dim(), &cfg.params, &report);
    write!(out, "{report}").map_err(stdout_err)?;
    writeln!(out, "motility_hypothesis_ok={}", hypothesis.ok).map_err(stdout_err)?;
    writeln!(out, "{class}").map_err(stdout_err)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

pub fn sweep_values(lo: f64, hi: f64, count: usize, scale: Scale) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::param("count", "must be at least 1"));
    }
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::param("lo/hi", "must be finite"));
    }
    if scale == Scale::Log && !(lo > 0.0 && hi > 0.0) {
        return Err(Error::param("lo/hi", "a log sweep needs positive end points"));
    }
    let frac = |i: usize| if count == 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
    Ok((0..count)
        .map(|i| match scale {
            Scale::Linear => lo + (hi - lo) * frac(i),
            Scale::Log => lo * (hi / lo).powf(frac(i)),
        })
        .collect())
}

#[derive(Debug, Clone)]
struct SweepRow {
    value: f64,
    b2: f64,
    final_t: f64,
    finals: Option<(f64, f64, f64)>,
    t_star: Option<f64>,
    lyap_monotone: bool,
    blowup: bool,
}

fn b2_for(cfg: &ScenarioConfig) -> Result<f64> {
    let sigma = cfg.params.sigma;
    let k1 = compute_k1(sigma, cfg.grid.measure())?;
    let xi = if sigma < 2.0 {
        estimate_poincare(&cfg.grid, compute_q(sigma)?)?.xi
    } else {
        1.0
    };
    compute_b2(cfg.params.a, sigma, &cfg.params.motility, k1, compute_k2(sigma, xi)?)
}

fn sweep_point(cfg: &ScenarioConfig, value: f64) -> Result<SweepRow> {
    let b2 = b2_for(cfg)?;
    let stepper = Stepper::new(cfg.grid, cfg.params.clone(), cfg.stepper.clone())?;
    let mut recorder = DiagnosticsRecorder::new(&cfg.params, &cfg.u0)?;
    let schedule = Schedule {
        every: cfg.observe_every,
        extra: Vec::new(),
    };
    match stepper.run(&cfg.u0, cfg.t_end, &schedule, &mut [&mut recorder]) {
        Ok(summary) => {
            let rows = recorder.rows();
            let last = rows.last().expect("initial state is always observed");
            let t_star = detect_entry_time(rows, ENTRY_ALPHA, cfg.params.u_star(), cfg.grid.measure())?;
            Ok(SweepRow {
                value,
                b2,
                final_t: summary.final_state.t,
                finals: Some((last.dist_u, last.dist_v, last.lyapunov)),
                t_star,
                lyap_monotone: t_star.map_or(false, |t| lyapunov_decay_check(rows, t).monotone),
                blowup: false,
            })
        }
        Err(Error::BlowUp { t, .. }) => Ok(SweepRow {
            value,
            b2,
            final_t: t,
            finals: None,
            t_star: None,
            lyap_monotone: false,
            blowup: true,
        }),
        Err(e) => Err(e),
    }
}

/// Runs one scenario per sweep value in parallel and writes one summary row
/// per value, in sweep order.
pub fn sweep(
    cfg: &ScenarioConfig,
    param: &str,
    values: &[f64],
    out_path: &Path,
    out: &mut impl Write,
) -> Result<()> {
    let configs = values
        .iter()
        .map(|&v| cfg.with_parameter(param, v))
        .collect::<Result<Vec<_>>>()?;
    let rows = configs
        .par_iter()
        .zip(values.par_iter())
        .map(|(c, &v)| sweep_point(c, v))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let num = |x: f64| format!("{x:.16e}");
    let opt = |x: Option<f64>| x.map_or(String::new(), num);
    let mut w = csv::Writer::from_path(out_path).map_err(|source| Error::Csv {
        path: out_path.to_path_buf(),
        source,
    })?;
    let csv_err = |source| Error::Csv {
        path: out_path.to_path_buf(),
        source,
    };
    w.write_record([
        "index",
        "param",
        "value",
        "b2",
        "final_t",
        "dist_u",
        "dist_v",
        "lyapunov",
        "t_star",
        "lyap_monotone",
        "blowup",
    ])
    .map_err(csv_err)?;
    for (i, r) in rows.iter().enumerate() {
        w.write_record([
            i.to_string(),
            param.to_string(),
            num(r.value),
            num(r.b2),
            num(r.final_t),
            opt(r.finals.map(|f| f.0)),
            opt(r.finals.map(|f| f.1)),
            opt(r.finals.map(|f| f.2)),
            opt(r.t_star),
            r.lyap_monotone.to_string(),
            r.blowup.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_err(out_path))?;
    let blowups = rows.iter().filter(|r| r.blowup).count();
    writeln!(out, "points={}", rows.len()).map_err(stdout_err)?;
    writeln!(out, "blowups={blowups}").map_err(stdout_err)?;
    writeln!(out, "sweep={}", out_path.display()).map_err(stdout_err)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Xi,
    G,
    R,
}

/// Runs one numerical constant estimator and stores its extremal field.
pub fn estimate_constant(cfg: &ScenarioConfig, which: Which, snapshot_path: &Path, out: &mut impl Write) -> Result<()> {
    let grid = cfg.grid;
    let p = grid.dim() / 2 + 1;
    let (name, value, starts, best, lines): (&str, f64, usize, ScalarField, Vec<String>) = match which {
        Which::Xi => {
            let q = compute_q(cfg.params.sigma)?;
            let e = estimate_poincare(&grid, q)?;
            let mut lines = vec![format!("d={}", e.d), format!("estimated={}", e.estimated)];
            if let Some(eig) = e.eigen_value {
                lines.push(format!("eigenvalue_check={eig}"));
            }
            ("xi", e.xi, e.starts, e.best, lines)
        }
        Which::G => {
            let e = estimate_gagliardo_nirenberg(&grid, p)?;
            ("G", e.value, e.trials, e.best, vec![format!("p={p}"), "estimated=true".into()])
        }
        Which::R => {
            let e = estimate_regularity(&grid, p)?;
            ("R", e.value, e.trials, e.best, vec![format!("p={p}"), "estimated=true".into()])
        }
    };
    snapshot::write(snapshot_path, &best, &solve_helmholtz(&best))?;
    writeln!(out, "constant={name}").map_err(stdout_err)?;
    writeln!(out, "estimate={value}").map_err(stdout_err)?;
    for l in lines {
        writeln!(out, "{l}").map_err(stdout_err)?;
    }
    writeln!(out, "starts={starts}").map_err(stdout_err)?;
    writeln!(out, "snapshot={}", snapshot_path.display()).map_err(stdout_err)?;
    Ok(())
}
