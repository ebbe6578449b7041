//! Runtime checks of the analytical bounds along a trajectory.
//!
//! [`DiagnosticsRecorder`] is an [`Observer`] that turns every observed state
//! into a [`DiagnosticsRow`]: mass against the Bernoulli envelope, `v ≤ Q`,
//! the energy `F(u) = ∫(u - u* - u* ln(u/u*))`, distances to the equilibrium
//! and both sides of the `L^q` coercivity inequality. Trajectory-level checks
//! ([`detect_entry_time`], [`lyapunov_decay_check`]) run on the finished rows.

use std::io::Write;
use std::path::Path;

use crate::constants::{compute_k1, compute_q, compute_q_bound};
use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::stepper::{Observer, Parameters, SimState};

/// Nodes below this value enter `F` at this value and flag the row.
pub const LYAPUNOV_FLOOR: f64 = 1e-300;
/// Relative slack of the mass comparison.
pub const MASS_TOLERANCE: f64 = 1e-10;
/// Relative slack of `v ≤ Q`.
pub const V_BOUND_TOLERANCE: f64 = 1e-6;
/// Relative slack of the integral inequalities.
pub const INEQUALITY_TOLERANCE: f64 = 1e-8;
/// Absolute-plus-relative slack of the energy decrease.
pub const DECAY_SLACK: f64 = 1e-10;
/// Mass threshold factor after which the coercivity inequality applies.
pub const COERCIVITY_ALPHA: f64 = 2.0;

#[inline]
fn energy_density(x: f64, u_star: f64) -> f64 {
    let d = x - u_star;
    if d.abs() <= 0.5 * u_star {
        d - u_star * (d / u_star).ln_1p()
    } else {
        d - u_star * (x / u_star).ln()
    }
}

/// `F(u)` by trapezoidal quadrature, and whether any node was floored.
pub fn lyapunov(u: &ScalarField, u_star: f64) -> (f64, bool) {
    let floored = u.min() < LYAPUNOV_FLOOR;
    let phi = u.map(|x| energy_density(x.max(LYAPUNOV_FLOOR), u_star));
    (phi.integrate(), floored)
}

/// Solution of the mass comparison equation `y' = a y - b |Ω|^{1-σ} y^σ`,
/// `y(0) = mass0`.
pub fn mass_bound(t: f64, a: f64, b: f64, sigma: f64, mass0: f64, omega_measure: f64) -> f64 {
    let s1 = sigma - 1.0;
    let limit = b / (a * omega_measure.powf(s1));
    (limit + (mass0.powf(-s1) - limit) * (-a * s1 * t).exp()).powf(-1.0 / s1)
}

/// Time at which the comparison solution started from `mass0` reaches
/// `level`, or `None` if it never does.
pub fn bernoulli_crossing_time(level: f64, a: f64, b: f64, sigma: f64, mass0: f64, omega_measure: f64) -> Option<f64> {
    let s1 = sigma - 1.0;
    let limit = b / (a * omega_measure.powf(s1));
    let ratio = (level.powf(-s1) - limit) / (mass0.powf(-s1) - limit);
    if !(ratio > 0.0 && ratio <= 1.0) {
        return None;
    }
    Some(-ratio.ln() / (a * s1))
}

pub fn check_mass_bound(mass: f64, bound: f64) -> bool {
    mass <= bound * (1.0 + MASS_TOLERANCE)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

impl InequalityCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            ok: lhs <= rhs * (1.0 + INEQUALITY_TOLERANCE),
        }
    }
}

/// `‖u - u*‖²_{L^q} ≤ K1 u*^{2-σ} ∫(u^{σ-1} - u*^{σ-1})(u - u*)`, valid once
/// `∫u ≤ 2u*|Ω|`.
pub fn check_coercivity(u: &ScalarField, u_star: f64, sigma: f64, k1: f64, q: f64) -> Result<InequalityCheck> {
    let lhs = u.map(|x| x - u_star).lp_norm(q)?.powi(2);
    let us1 = u_star.powf(sigma - 1.0);
    let integrand = u.map(|x| (x.max(0.0).powf(sigma - 1.0) - us1) * (x - u_star));
    let rhs = k1 * u_star.powf(2.0 - sigma) * integrand.integrate();
    Ok(InequalityCheck::new(lhs, rhs))
}

/// `∫|∇v|² + ∫(v - v̄)² ≤ K2 ‖u - u*‖²_{L^q}` for `v = (I-Δ)^{-1}u`.
pub fn check_signal_energy(u: &ScalarField, v: &ScalarField, u_star: f64, k2: f64, q: f64) -> Result<InequalityCheck> {
    let v_mean = v.mean();
    let lhs = v.gradient_sq_integral() + v.map(|x| (x - v_mean).powi(2)).integrate();
    let rhs = k2 * u.map(|x| x - u_star).lp_norm(q)?.powi(2);
    Ok(InequalityCheck::new(lhs, rhs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub mass: f64,
    pub linf_u: f64,
    pub linf_v: f64,
    pub l2_u: f64,
    pub lyapunov: f64,
    pub mass_bound: f64,
    pub v_bound_ok: bool,
    pub dist_u: f64,
    pub dist_v: f64,
    pub grad_v_sq: f64,
    /// Both sides of the coercivity inequality; `None` before the mass first
    /// drops to `2u*|Ω|`.
    pub ineq115: Option<InequalityCheck>,
    pub lyap_decreasing: bool,
    pub floored: bool,
    /// `∫(v - v̄)²`.
    pub v_dev_sq: f64,
    /// `‖u - u*‖²_{L^q}`.
    pub dist_lq_sq: f64,
}

impl DiagnosticsRow {
    pub fn mass_ok(&self) -> bool {
        check_mass_bound(self.mass, self.mass_bound)
    }
}

pub const CSV_HEADER: [&str; 15] = [
    "t",
    "mass",
    "linf_u",
    "linf_v",
    "l2_u",
    "lyapunov",
    "mass_bound",
    "v_bound_ok",
    "dist_u",
    "dist_v",
    "grad_v_sq",
    "ineq115_lhs",
    "ineq115_rhs",
    "lyap_decreasing",
    "floored",
];

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes rows as CSV; inapplicable inequality sides are left empty.
pub fn write_rows<W: Write>(out: W, rows: &[DiagnosticsRow]) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        let (lhs, rhs) = match r.ineq115 {
            Some(c) => (num(c.lhs), num(c.rhs)),
            None => (String::new(), String::new()),
        };
        w.write_record([
            num(r.t),
            num(r.mass),
            num(r.linf_u),
            num(r.linf_v),
            num(r.l2_u),
            num(r.lyapunov),
            num(r.mass_bound),
            r.v_bound_ok.to_string(),
            num(r.dist_u),
            num(r.dist_v),
            num(r.grad_v_sq),
            lhs,
            rhs,
            r.lyap_decreasing.to_string(),
            r.floored.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(path: &Path, rows: &[DiagnosticsRow]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_rows(std::io::BufWriter::new(file), rows).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}

/// Builds a [`DiagnosticsRow`] for every observed state.
#[derive(Debug, Clone)]
pub struct DiagnosticsRecorder {
    params: Parameters,
    u_star: f64,
    q_bound: f64,
    k1: f64,
    q: f64,
    mass0: f64,
    omega_measure: f64,
    coercivity_active: bool,
    rows: Vec<DiagnosticsRow>,
}

impl DiagnosticsRecorder {
    pub fn new(params: &Parameters, u0: &ScalarField) -> Result<Self> {
        params.validate()?;
        let grid = u0.grid();
        Ok(Self {
            params: params.clone(),
            u_star: params.u_star(),
            q_bound: compute_q_bound(u0, params)?,
            k1: compute_k1(params.sigma, grid.measure())?,
            q: compute_q(params.sigma)?,
            mass0: u0.integrate(),
            omega_measure: grid.measure(),
            coercivity_active: false,
            rows: Vec::new(),
        })
    }

    pub fn q_bound(&self) -> f64 {
        self.q_bound
    }

    pub fn rows(&self) -> &[DiagnosticsRow] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<DiagnosticsRow> {
        self.rows
    }

    pub fn row_for(&mut self, state: &SimState) -> Result<DiagnosticsRow> {
        let (u, v) = (&state.u, &state.v);
        let us = self.u_star;
        let p = &self.params;
        let mass = u.integrate();
        let (lyap, floored) = lyapunov(u, us);
        let linf_v = v.linf_norm();
        if mass <= COERCIVITY_ALPHA * us * self.omega_measure {
            self.coercivity_active = true;
        }
        let ineq115 = if self.coercivity_active {
            Some(check_coercivity(u, us, p.sigma, self.k1, self.q)?)
        } else {
            None
        };
        let v_mean = v.mean();
        let dist_lq_sq = u.map(|x| x - us).lp_norm(self.q)?.powi(2);
        let lyap_decreasing = self
            .rows
            .last()
            .map_or(true, |prev| lyap <= prev.lyapunov + DECAY_SLACK * (1.0 + prev.lyapunov));
        Ok(DiagnosticsRow {
            t: state.t,
            mass,
            linf_u: u.linf_norm(),
            linf_v,
            l2_u: u.lp_norm(2.0)?,
            lyapunov: lyap,
            mass_bound: mass_bound(state.t, p.a, p.b, p.sigma, self.mass0, self.omega_measure),
            v_bound_ok: linf_v <= self.q_bound * (1.0 + V_BOUND_TOLERANCE),
            dist_u: u.map(|x| x - us).linf_norm(),
            dist_v: v.map(|x| x - us).linf_norm(),
            grad_v_sq: v.gradient_sq_integral(),
            ineq115,
            lyap_decreasing,
            floored,
            v_dev_sq: v.map(|x| (x - v_mean).powi(2)).integrate(),
            dist_lq_sq,
        })
    }
}

impl Observer for DiagnosticsRecorder {
    fn observe(&mut self, state: &SimState) -> Result<()> {
        let row = self.row_for(state)?;
        self.rows.push(row);
        Ok(())
    }
}

/// First observation time with `∫u ≤ α u*|Ω|`.
///
/// From such a time the comparison solution restarted at the observed mass
/// stays below `max(mass, u*|Ω|) ≤ α u*|Ω|`, so the bound persists.
pub fn detect_entry_time(rows: &[DiagnosticsRow], alpha: f64, u_star: f64, omega_measure: f64) -> Result<Option<f64>> {
    if !(alpha > 1.0) {
        return Err(Error::param("alpha", format!("must exceed 1, got {alpha}")));
    }
    let level = alpha * u_star * omega_measure;
    Ok(rows
        .iter()
        .find(|r| r.mass <= level && r.mass.max(u_star * omega_measure) <= level)
        .map(|r| r.t))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    pub monotone: bool,
    /// Time of the first observation where `F` rose beyond the slack.
    pub first_violation: Option<f64>,
    /// Consecutive pairs compared (floored rows excluded).
    pub checked_pairs: usize,
    /// Trapezoidal time integral of `∫(v - v̄)²` from the start time.
    pub v_dev_integral: f64,
    /// Trapezoidal time integral of `‖u - u*‖²_{L^q}` from the start time.
    pub dist_integral: f64,
}

/// Checks `F(t_{k+1}) ≤ F(t_k) + 1e-10 (1 + F(t_k))` over observations with
/// `t ≥ t_start` and integrates the dissipated quantities in time.
pub fn lyapunov_decay_check(rows: &[DiagnosticsRow], t_start: f64) -> DecayReport {
    let tail: Vec<&DiagnosticsRow> = rows.iter().filter(|r| r.t >= t_start).collect();
    let mut report = DecayReport {
        monotone: true,
        first_violation: None,
        checked_pairs: 0,
        v_dev_integral: 0.0,
        dist_integral: 0.0,
    };
    for pair in tail.windows(2) {
        let (prev, next) = (pair[0], pair[1]);
        let dt = next.t - prev.t;
        report.v_dev_integral += 0.5 * dt * (prev.v_dev_sq + next.v_dev_sq);
        report.dist_integral += 0.5 * dt * (prev.dist_lq_sq + next.dist_lq_sq);
        if prev.floored || next.floored {
            continue;
        }
        report.checked_pairs += 1;
        if next.lyapunov > prev.lyapunov + DECAY_SLACK * (1.0 + prev.lyapunov) && report.monotone {
            report.monotone = false;
            report.first_violation = Some(next.t);
        }
    }
    report
}
