//! Classical RK4 in time with a CFL step, breakdown detection and
//! scheduled norm reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{rhs, DensityBounds, EosSpec, FlowState};
use crate::gamma::{energy_report_with, NormOptions, NormReport};
use crate::spectral::{gradient, ScalarField, VectorField};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub cfl: f64,
    pub dt_max: f64,
    pub t_end: f64,
    pub dealias_each_stage: bool,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            cfl: 0.4,
            dt_max: 0.05,
            t_end: 10.0,
            dealias_each_stage: true,
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Config(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return Err(Error::Config(format!("dt_max must be positive, got {}", self.dt_max)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        Ok(())
    }
}

/// Largest characteristic speed `max(|u| + c)`.
pub fn max_wave_speed(state: &FlowState, eos: &EosSpec) -> Result<f64> {
    let rho = state.density(eos)?;
    let mut vmax = 0.0f64;
    for k in 0..rho.values().len() {
        let speed = state.u.c1.values()[k].hypot(state.u.c2.values()[k]) + eos.sound_speed(rho.values()[k]);
        vmax = vmax.max(speed);
    }
    Ok(vmax)
}

/// `dt = min(cfl · h / max(|u| + c), dt_max)`.
pub fn cfl_dt(state: &FlowState, eos: &EosSpec, control: &StepControl) -> Result<f64> {
    let v = max_wave_speed(state, eos)?;
    let h = state.grid().spacing();
    Ok((control.cfl * h / v).min(control.dt_max))
}

fn axpy(base: &FlowState, dt: f64, k: &(ScalarField, VectorField)) -> FlowState {
    let mut s = base.clone();
    for (a, b) in s.sigma.values_mut().iter_mut().zip(k.0.values()) {
        *a += dt * b;
    }
    for (a, b) in s.u.c1.values_mut().iter_mut().zip(k.1.c1.values()) {
        *a += dt * b;
    }
    for (a, b) in s.u.c2.values_mut().iter_mut().zip(k.1.c2.values()) {
        *a += dt * b;
    }
    s.t = base.t + dt;
    s
}

/// One RK4 step of size `dt`, each stage projected with the 2/3 rule.
pub fn step(state: &FlowState, eos: &EosSpec, dt: f64) -> Result<FlowState> {
    step_with(state, eos, dt, true)
}

pub fn step_with(state: &FlowState, eos: &EosSpec, dt: f64, dealias_each_stage: bool) -> Result<FlowState> {
    state.ensure_finite()?;
    let prep = |s: FlowState| if dealias_each_stage { s.dealiased() } else { s };
    let s0 = prep(state.clone());
    let k1 = rhs(&s0, eos)?;
    let s1 = prep(axpy(&s0, 0.5 * dt, &k1));
    let k2 = rhs(&s1, eos)?;
    let s2 = prep(axpy(&s0, 0.5 * dt, &k2));
    let k3 = rhs(&s2, eos)?;
    let s3 = prep(axpy(&s0, dt, &k3));
    let k4 = rhs(&s3, eos)?;
    let combo = (
        &(&k1.0 + &(2.0 * &k2.0)) + &(&(2.0 * &k3.0) + &k4.0),
        &(&k1.1 + &k2.1.scale(2.0)) + &(&k3.1.scale(2.0) + &k4.1),
    );
    let mut out = axpy(&s0, dt / 6.0, &combo);
    out.t = state.t + dt;
    out.ensure_finite()?;
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BreakdownReason {
    GradientThreshold,
    VacuumGuard,
    SpectralTail,
    NonFinite,
}

impl BreakdownReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::GradientThreshold => "gradient_threshold",
            Self::VacuumGuard => "vacuum_guard",
            Self::SpectralTail => "spectral_tail",
            Self::NonFinite => "non_finite",
        }
    }

    pub const ALL: [BreakdownReason; 4] = [
        Self::GradientThreshold,
        Self::VacuumGuard,
        Self::SpectralTail,
        Self::NonFinite,
    ];
}

impl std::str::FromStr for BreakdownReason {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown breakdown reason '{s}'")))
    }
}

/// The node and value that triggered a criterion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakdownReport {
    pub occurred: bool,
    pub t_break: Option<f64>,
    pub reason: Option<BreakdownReason>,
    pub witness: Option<Witness>,
}

impl BreakdownReport {
    pub fn none() -> Self {
        Self {
            occurred: false,
            t_break: None,
            reason: None,
            witness: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakdownCriteria {
    /// Gradient threshold as a multiple of the initial `‖∇u‖∞ + ‖∇σ‖∞`.
    pub gradient_factor: f64,
    pub bounds: DensityBounds,
    /// Allowed fraction of spectral energy in the top sixth of retained modes.
    pub tail_fraction: f64,
}

impl Default for BreakdownCriteria {
    fn default() -> Self {
        Self {
            gradient_factor: 50.0,
            bounds: DensityBounds::default(),
            tail_fraction: 0.1,
        }
    }
}

/// `max |∇u| + max |∇σ|` (pointwise Frobenius/Euclidean norms), with the
/// node attaining the larger of the two.
pub fn gradient_size(state: &FlowState) -> (f64, usize) {
    let gs = gradient(&state.sigma);
    let g1 = gradient(&state.u.c1);
    let g2 = gradient(&state.u.c2);
    let (mut su, mut ss, mut arg, mut best) = (0.0f64, 0.0f64, 0, 0.0f64);
    for k in 0..gs.c1.values().len() {
        let a = gs.c1.values()[k].hypot(gs.c2.values()[k]);
        let b = (g1.c1.values()[k].powi(2)
            + g1.c2.values()[k].powi(2)
            + g2.c1.values()[k].powi(2)
            + g2.c2.values()[k].powi(2))
        .sqrt();
        ss = ss.max(a);
        su = su.max(b);
        if a.max(b) > best {
            best = a.max(b);
            arg = k;
        }
    }
    (su + ss, arg)
}

/// Fraction of spectral energy of `(σ, u)` with `max(|m₁|, |m₂|)` in the top
/// sixth of the retained band.
pub fn spectral_tail_fraction(state: &FlowState) -> f64 {
    let grid = state.grid();
    let k = grid.dealias_cutoff();
    let lo = k - k / 6;
    let fields = [&state.sigma, &state.u.c1, &state.u.c2];
    let (mut tail, mut total) = (0.0, 0.0);
    for f in fields {
        let s = f.spectrum();
        tail += s.energy_where(|a, b| a.abs().max(b.abs()) > lo);
        total += s.energy_where(|a, b| a != 0 || b != 0);
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

/// Evaluates the breakdown criteria on successive states.
#[derive(Clone, Debug)]
pub struct BreakdownDetector {
    pub criteria: BreakdownCriteria,
    pub g_max: f64,
}

impl BreakdownDetector {
    pub fn new(initial: &FlowState, criteria: BreakdownCriteria) -> Self {
        let (g0, _) = gradient_size(initial);
        let g_max = if g0 > 0.0 {
            criteria.gradient_factor * g0
        } else {
            f64::INFINITY
        };
        Self { criteria, g_max }
    }

    /// Every criterion that fires on `state`, in priority order
    /// non-finite, vacuum guard, spectral tail, gradient threshold.
    pub fn fired(&self, state: &FlowState, eos: &EosSpec) -> Vec<(BreakdownReason, Witness)> {
        let n = state.grid().n();
        let node = |k: usize, value: f64| Witness {
            i: k % n,
            j: k / n,
            value,
        };
        for f in [&state.sigma, &state.u.c1, &state.u.c2] {
            if let Some((i, j, value)) = f.first_nonfinite() {
                return vec![(BreakdownReason::NonFinite, Witness { i, j, value })];
            }
        }
        let mut out = Vec::new();
        let b = self.criteria.bounds;
        let mut worst: Option<(usize, f64)> = None;
        for (k, &s) in state.sigma.values().iter().enumerate() {
            let rho = eos.density_of(s);
            let bad = !(rho.is_finite() && rho > b.rho_min && rho < b.rho_max);
            if bad {
                let dist = if rho.is_finite() {
                    (b.rho_min - rho).max(rho - b.rho_max)
                } else {
                    f64::INFINITY
                };
                if worst.is_none_or(|(_, d)| dist > d) {
                    worst = Some((k, dist));
                }
            }
        }
        if let Some((k, _)) = worst {
            out.push((BreakdownReason::VacuumGuard, node(k, eos.density_of(state.sigma.values()[k]))));
        }
        let tail = spectral_tail_fraction(state);
        if tail > self.criteria.tail_fraction {
            let (k, _) = state.sigma.argmax_abs();
            out.push((BreakdownReason::SpectralTail, node(k, tail)));
        }
        let (g, k) = gradient_size(state);
        if g > self.g_max {
            out.push((BreakdownReason::GradientThreshold, node(k, g)));
        }
        out
    }

    pub fn check(&self, state: &FlowState, eos: &EosSpec) -> Option<BreakdownReport> {
        self.fired(state, eos).first().map(|&(reason, witness)| BreakdownReport {
            occurred: true,
            t_break: Some(state.t),
            reason: Some(reason),
            witness: Some(witness),
        })
    }
}

/// Everything needed to drive a run.
#[derive(Clone, Copy, Debug)]
pub struct RunConfig {
    pub control: StepControl,
    /// Time between norm reports; `t = 0` is always reported.
    pub report_every: f64,
    pub m_max: usize,
    pub norms: NormOptions,
    pub criteria: BreakdownCriteria,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            control: StepControl::default(),
            report_every: 1.0,
            m_max: 1,
            norms: NormOptions::default(),
            criteria: BreakdownCriteria::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub reports: Vec<NormReport>,
    pub breakdown: BreakdownReport,
    pub final_state: FlowState,
    pub steps: usize,
}

/// What the observer is told after each accepted step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Event {
    Start,
    Step,
    Report,
    Finish,
}

/// Integrates to `t_end` or the first breakdown, reporting norms on a fixed
/// schedule (step sizes are cut to land on report times).
pub fn run(initial: &FlowState, eos: &EosSpec, control: &StepControl, report_every: f64) -> Result<RunOutcome> {
    let cfg = RunConfig {
        control: *control,
        report_every,
        ..RunConfig::default()
    };
    run_observed(initial, eos, &cfg, |_, _| Ok(()))
}

pub fn run_observed(
    initial: &FlowState,
    eos: &EosSpec,
    cfg: &RunConfig,
    mut observer: impl FnMut(&FlowState, Event) -> Result<()>,
) -> Result<RunOutcome> {
    eos.validate()?;
    cfg.control.validate()?;
    if !(cfg.report_every > 0.0) {
        return Err(Error::Config(format!("report interval must be positive, got {}", cfg.report_every)));
    }
    initial.ensure_finite()?;
    initial.check_admissible(eos, &cfg.criteria.bounds)?;
    let detector = BreakdownDetector::new(initial, cfg.criteria);
    let t_end = cfg.control.t_end;
    let mut state = if cfg.control.dealias_each_stage {
        initial.dealiased()
    } else {
        initial.clone()
    };
    let mut reports = vec![energy_report_with(&state, eos, cfg.m_max, &cfg.norms)?];
    observer(&state, Event::Start)?;
    let mut next_report = initial.t + cfg.report_every;
    let mut steps = 0;
    let mut breakdown = BreakdownReport::none();
    // tolerance for landing on report/end times
    let eps_t = 1e-12 * (1.0 + t_end.abs());
    while state.t < t_end - eps_t {
        let mut dt = cfl_dt(&state, eos, &cfg.control)?;
        let target = next_report.min(t_end);
        if state.t + dt > target - eps_t {
            dt = target - state.t;
        }
        let next = match step_with(&state, eos, dt, cfg.control.dealias_each_stage) {
            Ok(s) => s,
            Err(Error::NonFinite { i, j, value, .. }) => {
                breakdown = BreakdownReport {
                    occurred: true,
                    t_break: Some(state.t + dt),
                    reason: Some(BreakdownReason::NonFinite),
                    witness: Some(Witness { i, j, value }),
                };
                break;
            }
            Err(Error::Vacuum { i, j, value }) | Err(Error::NonPositiveDensity { i, j, value }) => {
                // a stage left the admissible set before the step completed
                breakdown = BreakdownReport {
                    occurred: true,
                    t_break: Some(state.t + dt),
                    reason: Some(BreakdownReason::VacuumGuard),
                    witness: Some(Witness { i, j, value }),
                };
                break;
            }
            Err(e) => return Err(e),
        };
        state = next;
        if (state.t - target).abs() <= eps_t {
            state.t = target;
        }
        steps += 1;
        observer(&state, Event::Step)?;
        if let Some(b) = detector.check(&state, eos) {
            breakdown = b;
            break;
        }
        if (state.t - next_report).abs() <= eps_t {
            reports.push(energy_report_with(&state, eos, cfg.m_max, &cfg.norms)?);
            observer(&state, Event::Report)?;
            next_report += cfg.report_every;
        }
    }
    observer(&state, Event::Finish)?;
    Ok(RunOutcome {
        reports,
        breakdown,
        final_state: state,
        steps,
    })
}
