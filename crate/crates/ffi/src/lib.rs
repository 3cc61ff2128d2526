//! C ABI over the `chaplygin` crate.
//!
//! Every fallible entry point returns a [`ChStatus`]; on failure the message
//! is kept per thread and read back with [`ch_last_error_message`]. Handles
//! are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use chaplygin::flow::{EosSpec, FlowState};
use chaplygin::gamma::energy_report;
use chaplygin::harness::{fit_powerlaw, make_initial_data, Preset, ScenarioConfig, SweepParam, SweepRecord};
use chaplygin::integrator::{run_observed, step, BreakdownReason, RunConfig, StepControl};
use chaplygin::spectral::{Grid, ScalarField, VectorField};
use chaplygin::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidGrid = 3,
    NonFinite = 4,
    Vacuum = 5,
    InvalidEos = 6,
    OrderTooLarge = 7,
    Config = 8,
    Normalization = 9,
    TooFewPoints = 10,
    Io = 11,
    BufferTooSmall = 12,
    Panic = 13,
    Other = 14,
}

impl From<&Error> for ChStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidGrid(_) | Error::GridMismatch(..) => Self::InvalidGrid,
            Error::NonFinite { .. } => Self::NonFinite,
            Error::Vacuum { .. } | Error::NonPositiveDensity { .. } => Self::Vacuum,
            Error::InvalidEos(_) => Self::InvalidEos,
            Error::OrderTooLarge { .. } => Self::OrderTooLarge,
            Error::Config(_) => Self::Config,
            Error::Normalization { .. } => Self::Normalization,
            Error::TooFewPoints(_) => Self::TooFewPoints,
            Error::Io(_) | Error::Json(_) | Error::Checkpoint { .. } | Error::Csv { .. } => Self::Io,
            _ => Self::Other,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: ChStatus, msg: impl Into<String>) -> ChStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> Result<(), ChStatus>) -> ChStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ChStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(ChStatus::Panic, "internal panic"),
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, ChStatus>;
}

impl<T> OrStatus<T> for chaplygin::Result<T> {
    fn or_status(self) -> Result<T, ChStatus> {
        self.map_err(|e| fail(ChStatus::from(&e), e.to_string()))
    }
}

unsafe fn nonnull<'a, T>(p: *const T, what: &str) -> Result<&'a T, ChStatus> {
    p.as_ref().ok_or_else(|| fail(ChStatus::NullPointer, format!("{what} is null")))
}

unsafe fn nonnull_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, ChStatus> {
    p.as_mut().ok_or_else(|| fail(ChStatus::NullPointer, format!("{what} is null")))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, ChStatus> {
    if p.is_null() {
        return Err(fail(ChStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(ChStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Length in bytes of the last error message on this thread, including the
/// terminating NUL; 0 when there is none.
#[no_mangle]
pub extern "C" fn ch_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |s| s.as_bytes_with_nul().len()))
}

/// Copies the last error message into `buf` (NUL terminated). Returns the
/// number of bytes written, or 0 if there is no message or `len` is too small.
///
/// # Safety
/// `buf` must be valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ch_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        Some(s) if !buf.is_null() && s.as_bytes_with_nul().len() <= len => {
            let bytes = s.as_bytes_with_nul();
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, bytes.len());
            bytes.len()
        }
        _ => 0,
    })
}

/// Static NUL-terminated version string.
#[no_mangle]
pub extern "C" fn ch_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChEosKind {
    Chaplygin = 0,
    Polytropic = 1,
}

/// Chaplygin uses `p0`, `b`; polytropic uses `a`, `gamma`.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct ChEos {
    pub kind: ChEosKind,
    pub p0: f64,
    pub b: f64,
    pub a: f64,
    pub gamma: f64,
}

impl ChEos {
    fn to_spec(self) -> Result<EosSpec, ChStatus> {
        let spec = match self.kind {
            ChEosKind::Chaplygin => EosSpec::Chaplygin { p0: self.p0, b: self.b },
            ChEosKind::Polytropic => EosSpec::Polytropic {
                a: self.a,
                gamma: self.gamma,
            },
        };
        spec.validate().or_status()?;
        Ok(spec)
    }

    fn from_spec(spec: EosSpec) -> Self {
        match spec {
            EosSpec::Chaplygin { p0, b } => Self {
                kind: ChEosKind::Chaplygin,
                p0,
                b,
                a: 0.0,
                gamma: 0.0,
            },
            EosSpec::Polytropic { a, gamma } => Self {
                kind: ChEosKind::Polytropic,
                p0: 0.0,
                b: 0.0,
                a,
                gamma,
            },
        }
    }
}

/// The normalized Chaplygin law `P = 2 − 1/ρ`.
#[no_mangle]
pub extern "C" fn ch_eos_chaplygin() -> ChEos {
    ChEos::from_spec(EosSpec::chaplygin())
}

/// Polytropic law with unit sound speed at unit density.
#[no_mangle]
pub extern "C" fn ch_eos_polytropic(gamma: f64) -> ChEos {
    ChEos::from_spec(EosSpec::polytropic(gamma))
}

/// A flow state together with its equation of state.
pub struct ChState {
    state: FlowState,
    eos: EosSpec,
}

/// Builds a state on the `n × n` grid over `[-half_width, half_width)²` from
/// `n*n` values per field, stored with the first coordinate fastest.
///
/// # Safety
/// `sigma`, `u1`, `u2` must each hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ch_state_new(
    n: usize,
    half_width: f64,
    eos: *const ChEos,
    sigma: *const f64,
    u1: *const f64,
    u2: *const f64,
    len: usize,
    out: *mut *mut ChState,
) -> ChStatus {
    guard(|| {
        let out = nonnull_mut(out, "out")?;
        *out = ptr::null_mut();
        let eos = nonnull(eos, "eos")?.to_spec()?;
        let grid = Grid::new(n, half_width).or_status()?;
        if len != grid.len() {
            return Err(fail(ChStatus::InvalidArgument, format!("expected {} values, got {len}", grid.len())));
        }
        let field = |p: *const f64, what: &str| -> Result<ScalarField, ChStatus> {
            nonnull(p, what)?;
            ScalarField::from_values(grid, slice::from_raw_parts(p, len).to_vec()).or_status()
        };
        let u = VectorField::new(field(u1, "u1")?, field(u2, "u2")?).or_status()?;
        let state = FlowState::new(field(sigma, "sigma")?, u, 0.0).or_status()?;
        state.ensure_finite().or_status()?;
        *out = Box::into_raw(Box::new(ChState { state, eos }));
        Ok(())
    })
}

/// # Safety
/// `state` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ch_state_free(state: *mut ChState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// # Safety
/// `state` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ch_state_time(state: *const ChState) -> f64 {
    state.as_ref().map_or(f64::NAN, |s| s.state.t)
}

/// Points per axis, 0 for a null handle.
///
/// # Safety
/// `state` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ch_state_grid_n(state: *const ChState) -> usize {
    state.as_ref().map_or(0, |s| s.state.grid().n())
}

/// Copies the fields out; any of the buffers may be null to skip it.
///
/// # Safety
/// Non-null buffers must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ch_state_fields(
    state: *const ChState,
    sigma: *mut f64,
    u1: *mut f64,
    u2: *mut f64,
    len: usize,
) -> ChStatus {
    guard(|| {
        let s = &nonnull(state, "state")?.state;
        if len < s.grid().len() {
            return Err(fail(ChStatus::BufferTooSmall, format!("need {} values, got {len}", s.grid().len())));
        }
        for (dst, src) in [(sigma, &s.sigma), (u1, &s.u.c1), (u2, &s.u.c2)] {
            if !dst.is_null() {
                ptr::copy_nonoverlapping(src.values().as_ptr(), dst, src.values().len());
            }
        }
        Ok(())
    })
}

/// One dealiased RK4 step of size `dt`.
///
/// # Safety
/// `state` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ch_state_step(state: *mut ChState, dt: f64) -> ChStatus {
    guard(|| {
        let s = nonnull_mut(state, "state")?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(fail(ChStatus::InvalidArgument, format!("dt must be positive, got {dt}")));
        }
        s.state = step(&s.state, &s.eos, dt).or_status()?;
        Ok(())
    })
}

/// Breakdown reason codes; `None` when no criterion fired.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChBreakdownReason {
    None = 0,
    GradientThreshold = 1,
    VacuumGuard = 2,
    SpectralTail = 3,
    NonFinite = 4,
}

impl From<Option<BreakdownReason>> for ChBreakdownReason {
    fn from(r: Option<BreakdownReason>) -> Self {
        match r {
            None => Self::None,
            Some(BreakdownReason::GradientThreshold) => Self::GradientThreshold,
            Some(BreakdownReason::VacuumGuard) => Self::VacuumGuard,
            Some(BreakdownReason::SpectralTail) => Self::SpectralTail,
            Some(BreakdownReason::NonFinite) => Self::NonFinite,
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct ChBreakdown {
    pub occurred: bool,
    /// NaN when nothing fired.
    pub t_break: f64,
    pub reason: ChBreakdownReason,
    pub witness_i: usize,
    pub witness_j: usize,
    pub witness_value: f64,
    pub steps: usize,
}

/// Integrates until `t_end` or breakdown with the default detector and
/// leaves the final state in the handle.
///
/// # Safety
/// `state` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ch_state_advance(
    state: *mut ChState,
    t_end: f64,
    cfl: f64,
    dt_max: f64,
    out: *mut ChBreakdown,
) -> ChStatus {
    guard(|| {
        let s = nonnull_mut(state, "state")?;
        let out = nonnull_mut(out, "out")?;
        let cfg = RunConfig {
            control: StepControl {
                cfl,
                dt_max,
                t_end,
                ..StepControl::default()
            },
            report_every: (t_end - s.state.t).max(f64::MIN_POSITIVE),
            m_max: 0,
            ..RunConfig::default()
        };
        let outcome = run_observed(&s.state, &s.eos, &cfg, |_, _| Ok(())).or_status()?;
        let b = outcome.breakdown;
        let w = b.witness;
        *out = ChBreakdown {
            occurred: b.occurred,
            t_break: b.t_break.unwrap_or(f64::NAN),
            reason: b.reason.into(),
            witness_i: w.map_or(0, |w| w.i),
            witness_j: w.map_or(0, |w| w.j),
            witness_value: w.map_or(f64::NAN, |w| w.value),
            steps: outcome.steps,
        };
        s.state = outcome.final_state;
        Ok(())
    })
}

/// Cumulative energies `E_0..E_m` written to `energies[0..=m_max]`.
///
/// # Safety
/// `energies` must hold `m_max + 1` doubles.
#[no_mangle]
pub unsafe extern "C" fn ch_state_energies(state: *const ChState, m_max: usize, energies: *mut f64) -> ChStatus {
    guard(|| {
        let s = nonnull(state, "state")?;
        nonnull(energies, "energies")?;
        let r = energy_report(&s.state, &s.eos, m_max).or_status()?;
        ptr::copy_nonoverlapping(r.energy.as_ptr(), energies, r.energy.len().min(m_max + 1));
        Ok(())
    })
}

/// A resolved scenario configuration.
pub struct ChConfig {
    cfg: ScenarioConfig,
}

fn new_config(cfg: ScenarioConfig, out: *mut *mut ChConfig) {
    // SAFETY: callers checked `out`
    unsafe { *out = Box::into_raw(Box::new(ChConfig { cfg })) };
}

/// Shipped preset by name ("chaplygin-delta", "polytropic-eps", "smoke").
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ch_config_preset(name: *const c_char, out: *mut *mut ChConfig) -> ChStatus {
    guard(|| {
        nonnull_mut(out, "out")?;
        *out = ptr::null_mut();
        let preset: Preset = str_arg(name, "name")?.parse().or_status()?;
        new_config(preset.config(), out);
        Ok(())
    })
}

/// Configuration from TOML text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ch_config_from_toml(text: *const c_char, out: *mut *mut ChConfig) -> ChStatus {
    guard(|| {
        nonnull_mut(out, "out")?;
        *out = ptr::null_mut();
        let cfg = ScenarioConfig::from_toml_str(str_arg(text, "text")?).or_status()?;
        new_config(cfg, out);
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ch_config_free(cfg: *mut ChConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Overrides grid size, data targets and seed; the result is validated.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ch_config_set(
    cfg: *mut ChConfig,
    n: usize,
    half_width: f64,
    eps_target: f64,
    delta_target: f64,
    seed: u64,
) -> ChStatus {
    guard(|| {
        let c = nonnull_mut(cfg, "cfg")?;
        let mut next = c.cfg.clone();
        next.grid.n = n;
        next.grid.half_width = half_width;
        next.data.eps_target = eps_target;
        next.data.delta_target = delta_target;
        next.seed = seed;
        next.validate().or_status()?;
        c.cfg = next;
        Ok(())
    })
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct ChDataSize {
    pub eps: f64,
    pub delta: f64,
    pub amplitude_irrotational: f64,
    pub amplitude_vortical: f64,
    pub iterations: usize,
}

/// Generates the initial data of a configuration. `size` may be null.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ch_config_initial_state(
    cfg: *const ChConfig,
    out: *mut *mut ChState,
    size: *mut ChDataSize,
) -> ChStatus {
    guard(|| {
        let c = nonnull(cfg, "cfg")?;
        let out = nonnull_mut(out, "out")?;
        *out = ptr::null_mut();
        let d = make_initial_data(&c.cfg).or_status()?;
        if let Some(size) = size.as_mut() {
            *size = ChDataSize {
                eps: d.measured.eps,
                delta: d.measured.delta,
                amplitude_irrotational: d.a,
                amplitude_vortical: d.b,
                iterations: d.iterations,
            };
        }
        *out = Box::into_raw(Box::new(ChState {
            state: d.state,
            eos: c.cfg.eos,
        }));
        Ok(())
    })
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct ChFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

/// Fits `ln t = slope · ln v + intercept`; non-finite `t` entries are skipped.
///
/// # Safety
/// `values` and `times` must hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ch_fit_powerlaw(values: *const f64, times: *const f64, len: usize, out: *mut ChFit) -> ChStatus {
    guard(|| {
        let out = nonnull_mut(out, "out")?;
        nonnull(values, "values")?;
        nonnull(times, "times")?;
        let (v, t) = (slice::from_raw_parts(values, len), slice::from_raw_parts(times, len));
        let records: Vec<SweepRecord> = v
            .iter()
            .zip(t)
            .map(|(&v, &t)| SweepRecord {
                param_name: SweepParam::Delta,
                param_value: v,
                t_break: t.is_finite().then_some(t),
                reason: String::new(),
                measured_eps: f64::NAN,
                measured_delta: f64::NAN,
                wall_time_s: 0.0,
            })
            .collect();
        let f = fit_powerlaw(&records).or_status()?;
        *out = ChFit {
            slope: f.slope,
            intercept: f.intercept,
            r2: f.r2,
            points: f.points,
        };
        Ok(())
    })
}
