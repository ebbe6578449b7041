//! Explicit time integration of
//! `u_t = Δ(γ(v)u) + a u - b u^σ` with `v = (I - Δ_h)^{-1} u` re-solved after
//! every stage.
//!
//! Schemes implement [`TimeScheme`] and are selected by name from
//! [`schemes`]. With [`Stepper::stable_dt`] the forward Euler update is a
//! convex-like combination with nonnegative coefficients, so `u ≥ 0` holds
//! without clamping.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{Grid, ScalarField};
use crate::helmholtz::HelmholtzSolver;
use crate::motility::MotilitySpec;
use crate::registry::{Args, Registry};

pub const EXPLICIT_EULER: &str = "explicit-euler";
pub const HEUN: &str = "heun";

/// Heun silently zeroes negatives no deeper than this.
pub const CLAMP_FLOOR: f64 = -1e-13;

#[derive(Debug, Clone)]
pub struct Parameters {
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
    pub motility: MotilitySpec,
}

impl Parameters {
    pub fn new(a: f64, b: f64, sigma: f64, motility: MotilitySpec) -> Result<Self> {
        let p = Self { a, b, sigma, motility };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(Error::param("a", "a must be positive"));
        }
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(Error::param("b", "b must be positive"));
        }
        if !(self.sigma.is_finite() && self.sigma > 1.0) {
            return Err(Error::param("sigma", "sigma must exceed 1"));
        }
        Ok(())
    }

    /// Positive equilibrium `(a/b)^{1/(σ-1)}`.
    pub fn u_star(&self) -> f64 {
        (self.a / self.b).powf(1.0 / (self.sigma - 1.0))
    }

    #[inline]
    fn damping(&self, u: f64) -> f64 {
        let u = u.max(0.0);
        if self.sigma == 2.0 {
            u * u
        } else {
            u.powf(self.sigma)
        }
    }

    /// `a u - b u^σ`.
    #[inline]
    pub fn reaction(&self, u: f64) -> f64 {
        self.a * u - self.b * self.damping(u)
    }
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub u: ScalarField,
    pub v: ScalarField,
    pub dt_last: f64,
}

#[derive(Debug, Clone)]
pub struct StepperConfig {
    /// Registry name of the time scheme.
    pub scheme: String,
    pub cfl_safety: f64,
    pub dt_max: f64,
    pub blowup_threshold: f64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            scheme: EXPLICIT_EULER.to_string(),
            cfl_safety: 0.9,
            dt_max: f64::INFINITY,
            blowup_threshold: 1e8,
        }
    }
}

impl StepperConfig {
    pub fn with_scheme(scheme: &str) -> Self {
        Self {
            scheme: scheme.to_string(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::param("cfl_safety", "cfl_safety must lie in (0, 1]"));
        }
        if !(self.dt_max > 0.0) {
            return Err(Error::param("dt_max", "dt_max must be positive"));
        }
        if !(self.blowup_threshold > 0.0) {
            return Err(Error::param("blowup_threshold", "blowup_threshold must be positive"));
        }
        Ok(())
    }
}

/// Right-hand side of the cell equation with the elliptic constraint.
pub struct Model<'a> {
    params: &'a Parameters,
    solver: &'a HelmholtzSolver,
}

impl<'a> Model<'a> {
    pub fn params(&self) -> &Parameters {
        self.params
    }

    /// `(I - Δ_h)^{-1} u`.
    pub fn elliptic(&self, u: &ScalarField) -> ScalarField {
        self.solver.solve(u)
    }

    /// `Δ_h(γ(v) u) + a u - b u^σ`, node-wise.
    pub fn rhs(&self, u: &ScalarField, v: &ScalarField) -> Result<ScalarField> {
        let gamma = &self.params.motility;
        if let Some(end) = gamma.domain_end() {
            if v.max() > end {
                return Err(Error::Domain(format!(
                    "signal reached v = {} beyond the motility table end {end}",
                    v.max()
                )));
            }
        }
        let w = u.zip_map(v, |ui, vi| gamma.gamma_unchecked(vi.max(0.0)) * ui);
        let mut out = w.laplacian();
        for (o, &ui) in out.values_mut().iter_mut().zip(u.values()) {
            *o += self.params.reaction(ui);
        }
        Ok(out)
    }

    /// `∫(a u - b u^σ)`.
    pub fn source_integral(&self, u: &ScalarField) -> f64 {
        u.map(|x| self.params.reaction(x)).integrate()
    }
}

/// Result of advancing one step.
#[derive(Debug, Clone)]
pub struct Advance {
    pub u: ScalarField,
    pub v: ScalarField,
    /// The `∫(a u - b u^σ)` combination the scheme applied over the step.
    pub source_integral: f64,
    /// Nodes zeroed by clamping.
    pub clamped: usize,
    /// Most negative value clamped, when deeper than [`CLAMP_FLOOR`].
    pub violation: Option<f64>,
}

pub trait TimeScheme: Send + Sync {
    fn name(&self) -> &'static str;
    /// Formal order of accuracy in time.
    fn order(&self) -> u32;
    fn advance(&self, model: &Model<'_>, state: &SimState, dt: f64) -> Result<Advance>;
}

fn axpy(u: &ScalarField, dt: f64, k: &ScalarField) -> ScalarField {
    u.zip_map(k, |a, b| a + dt * b)
}

pub struct ExplicitEuler;

impl TimeScheme for ExplicitEuler {
    fn name(&self) -> &'static str {
        EXPLICIT_EULER
    }
    fn order(&self) -> u32 {
        1
    }
    fn advance(&self, model: &Model<'_>, state: &SimState, dt: f64) -> Result<Advance> {
        let k = model.rhs(&state.u, &state.v)?;
        let u = axpy(&state.u, dt, &k);
        let v = model.elliptic(&u);
        Ok(Advance {
            u,
            v,
            source_integral: model.source_integral(&state.u),
            clamped: 0,
            violation: None,
        })
    }
}

/// Explicit trapezoidal rule (two stages).
pub struct Heun;

impl TimeScheme for Heun {
    fn name(&self) -> &'static str {
        HEUN
    }
    fn order(&self) -> u32 {
        2
    }
    fn advance(&self, model: &Model<'_>, state: &SimState, dt: f64) -> Result<Advance> {
        let k1 = model.rhs(&state.u, &state.v)?;
        let u1 = axpy(&state.u, dt, &k1);
        let v1 = model.elliptic(&u1);
        let k2 = model.rhs(&u1, &v1)?;
        let mut u = state.u.zip_map(&k1.zip_map(&k2, |a, b| a + b), |x, s| x + 0.5 * dt * s);
        let mut clamped = 0;
        let mut worst = 0.0f64;
        for x in u.values_mut() {
            if *x < 0.0 {
                worst = worst.min(*x);
                *x = 0.0;
                clamped += 1;
            }
        }
        let v = model.elliptic(&u);
        Ok(Advance {
            u,
            v,
            source_integral: 0.5 * (model.source_integral(&state.u) + model.source_integral(&u1)),
            clamped,
            violation: (worst < CLAMP_FLOOR).then_some(worst),
        })
    }
}

/// Built-in time schemes keyed by name.
pub fn schemes() -> Registry<dyn TimeScheme> {
    let mut reg: Registry<dyn TimeScheme> = Registry::empty("time scheme");
    reg.register(EXPLICIT_EULER, "forward Euler, order 1, positivity preserving", |_| Ok(Arc::new(ExplicitEuler)));
    reg.register(HEUN, "Heun (explicit trapezoid), order 2", |_| Ok(Arc::new(Heun)));
    reg
}

/// Per-step bookkeeping handed to observers.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub mass_before: f64,
    pub mass_after: f64,
    pub source_integral: f64,
    pub min_u: f64,
    pub clamped: usize,
}

impl StepRecord {
    /// `|Δ∫u - dt·source| / max(∫u before, ∫u after)`.
    pub fn mass_law_residual(&self) -> f64 {
        let scale = self.mass_before.abs().max(self.mass_after.abs()).max(f64::MIN_POSITIVE);
        ((self.mass_after - self.mass_before) - self.dt * self.source_integral).abs() / scale
    }
}

pub trait Observer {
    /// Called at t = 0 and at every scheduled observation time.
    fn observe(&mut self, state: &SimState) -> Result<()>;

    fn on_step(&mut self, _record: &StepRecord) {}
}

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    /// Heun produced a negative value below [`CLAMP_FLOOR`].
    PositivityViolation { t: f64, min: f64 },
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub final_state: SimState,
    pub steps: usize,
    pub observations: usize,
    pub events: Vec<Event>,
}

/// Observation times in `(0, t_end]`: multiples of `every`, the extra times,
/// and `t_end` itself.
#[derive(Debug, Clone, Default)]
pub struct Schedule {
    pub every: Option<f64>,
    pub extra: Vec<f64>,
}

impl Schedule {
    pub fn every(dt: f64) -> Self {
        Self {
            every: Some(dt),
            extra: Vec::new(),
        }
    }

    pub fn times(&self, t_end: f64) -> Vec<f64> {
        let mut times: Vec<f64> = Vec::new();
        if let Some(every) = self.every.filter(|e| *e > 0.0) {
            let mut k = 1u64;
            loop {
                let t = every * k as f64;
                if t >= t_end {
                    break;
                }
                times.push(t);
                k += 1;
            }
        }
        times.extend(self.extra.iter().copied().filter(|&t| t > 0.0 && t < t_end));
        if t_end > 0.0 {
            times.push(t_end);
        }
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
        times
    }
}

pub struct Stepper {
    grid: Grid,
    params: Parameters,
    config: StepperConfig,
    scheme: Arc<dyn TimeScheme>,
    solver: HelmholtzSolver,
}

impl Stepper {
    pub fn new(grid: Grid, params: Parameters, config: StepperConfig) -> Result<Self> {
        params.validate()?;
        config.validate()?;
        let scheme = schemes().build(&config.scheme, &mut Args::new("stepper"))?;
        Ok(Self {
            grid,
            params,
            config,
            scheme,
            solver: HelmholtzSolver::new(grid),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn config(&self) -> &StepperConfig {
        &self.config
    }

    pub fn scheme(&self) -> &dyn TimeScheme {
        self.scheme.as_ref()
    }

    pub fn solver(&self) -> &HelmholtzSolver {
        &self.solver
    }

    fn model(&self) -> Model<'_> {
        Model {
            params: &self.params,
            solver: &self.solver,
        }
    }

    /// State at `t = 0`; `u0` must be finite, nonnegative and not identically zero.
    pub fn initial_state(&self, u0: &ScalarField) -> Result<SimState> {
        if u0.grid() != &self.grid {
            return Err(Error::InvalidField("initial data lives on a different grid".into()));
        }
        if !u0.is_finite() {
            return Err(Error::InvalidField("initial data is not finite".into()));
        }
        if u0.min() < 0.0 {
            return Err(Error::InvalidField(format!("initial data has negative value {}", u0.min())));
        }
        if u0.max() == 0.0 {
            return Err(Error::InvalidField("initial data vanishes identically".into()));
        }
        Ok(SimState {
            t: 0.0,
            u: u0.clone(),
            v: self.solver.solve(u0),
            dt_last: 0.0,
        })
    }

    /// Largest step keeping every forward-Euler diagonal coefficient
    /// nonnegative, scaled by `cfl_safety` and capped at `dt_max`.
    pub fn stable_dt(&self, state: &SimState) -> Result<f64> {
        if !(state.u.is_finite() && state.v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite state at t = {}", state.t)));
        }
        let gamma_max = self.params.motility.eval_gamma(state.v.min().max(0.0))?;
        let diffusion: f64 = self
            .grid
            .spacing()
            .iter()
            .map(|h| 2.0 * gamma_max / (h * h))
            .sum();
        let absorption = self.params.b * state.u.max().max(0.0).powf(self.params.sigma - 1.0);
        let dt = self.config.cfl_safety / (diffusion + absorption);
        Ok(dt.min(self.config.dt_max))
    }

    /// One step of size [`Self::stable_dt`].
    pub fn step(&self, state: &SimState) -> Result<(SimState, StepRecord)> {
        let dt = self.stable_dt(state)?;
        self.step_with_dt(state, dt)
    }

    pub fn step_with_dt(&self, state: &SimState, dt: f64) -> Result<(SimState, StepRecord)> {
        let adv = self.scheme.advance(&self.model(), state, dt)?;
        self.finish_step(state, adv, dt)
    }

    /// Integrates from `u0` to `t_end`, recomputing the step each time and
    /// landing exactly on every scheduled observation time.
    pub fn run(
        &self,
        u0: &ScalarField,
        t_end: f64,
        schedule: &Schedule,
        observers: &mut [&mut dyn Observer],
    ) -> Result<RunSummary> {
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::param("t_end", format!("must be finite and nonnegative, got {t_end}")));
        }
        let mut state = self.initial_state(u0)?;
        for obs in observers.iter_mut() {
            obs.observe(&state)?;
        }
        let mut steps = 0;
        let mut observations = 1;
        let mut events = Vec::new();
        for target in schedule.times(t_end) {
            while state.t < target {
                let remaining = target - state.t;
                let dt = self.stable_dt(&state)?;
                let last = dt >= remaining;
                let adv = self.scheme.advance(&self.model(), &state, dt.min(remaining))?;
                if let Some(min) = adv.violation {
                    events.push(Event::PositivityViolation {
                        t: state.t + dt.min(remaining),
                        min,
                    });
                }
                let (mut next, record) = self.finish_step(&state, adv, dt.min(remaining))?;
                if last {
                    next.t = target;
                }
                for obs in observers.iter_mut() {
                    obs.on_step(&record);
                }
                state = next;
                steps += 1;
            }
            for obs in observers.iter_mut() {
                obs.observe(&state)?;
            }
            observations += 1;
        }
        Ok(RunSummary {
            final_state: state,
            steps,
            observations,
            events,
        })
    }

    fn finish_step(&self, state: &SimState, adv: Advance, dt: f64) -> Result<(SimState, StepRecord)> {
        let t = state.t + dt;
        let finite = adv.u.is_finite();
        let linf = adv.u.linf_norm();
        if !finite || linf > self.config.blowup_threshold {
            return Err(Error::BlowUp {
                t,
                linf: if finite { linf } else { f64::NAN },
            });
        }
        let record = StepRecord {
            t,
            dt,
            mass_before: state.u.integrate(),
            mass_after: adv.u.integrate(),
            source_integral: adv.source_integral,
            min_u: adv.u.min(),
            clamped: adv.clamped,
        };
        Ok((
            SimState {
                t,
                u: adv.u,
                v: adv.v,
                dt_last: dt,
            },
            record,
        ))
    }
}
