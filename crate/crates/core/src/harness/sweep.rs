//! Single scenarios, concurrent sweeps and the lifespan power-law fit.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::sync::mpsc;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{validate_sweep_values, ScenarioConfig, SweepParam};
use super::initial::make_initial_data;
use super::io::{save_checkpoint, write_norms_csv, RunSummary};
use crate::error::{Error, Result};
use crate::gamma::NormOptions;
use crate::integrator::{max_wave_speed, run_observed, BreakdownReport, Event, RunConfig, RunOutcome};

/// Radius beyond which the shipped profiles are below `1e-14`.
pub const PROFILE_RADIUS: f64 = 6.0;

/// Slack on the initial wave speed when sizing the window.
const SPEED_SLACK: f64 = 1.05;

pub const NO_BREAKDOWN_IN_WINDOW: &str = "no_breakdown_in_window";
pub const NO_BREAKDOWN_BEFORE_END: &str = "no_breakdown_before_t_end";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub param_name: SweepParam,
    pub param_value: f64,
    pub t_break: Option<f64>,
    pub reason: String,
    pub measured_eps: f64,
    pub measured_delta: f64,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug)]
pub struct ScenarioOutcome {
    pub summary: RunSummary,
    pub run: RunOutcome,
}

/// Time before periodic images of the data can interact:
/// `(L − R)/(1.05 · max(|u| + c))` with `R` the profile radius plus jitter.
pub fn dependence_window(cfg: &ScenarioConfig, initial_speed: f64) -> f64 {
    let r = PROFILE_RADIUS + cfg.data.jitter;
    ((cfg.grid.half_width - r) / (SPEED_SLACK * initial_speed)).max(0.0)
}

/// Generates the data, integrates, and writes norms/checkpoints under `out`
/// with file names starting with `label`.
pub fn run_scenario(cfg: &ScenarioConfig, label: &str, out: Option<&Path>) -> Result<ScenarioOutcome> {
    let start = Instant::now();
    let data = make_initial_data(cfg)?;
    let rel = |m: f64, t: f64| if t > 0.0 { (m - t).abs() / t } else { m.abs() };
    if rel(data.measured.eps, cfg.data.eps_target) > 0.01 || rel(data.measured.delta, cfg.data.delta_target) > 0.01 {
        warn!("{label}: measured (eps, delta) = ({}, {}) misses the targets", data.measured.eps, data.measured.delta);
    }
    let speed = max_wave_speed(&data.state, &cfg.eos)?;
    let t_window = dependence_window(cfg, speed);
    let t_end = cfg.control.t_end.map_or(t_window, |t| t.min(t_window));
    let run_cfg = RunConfig {
        control: cfg.step_control(t_end),
        report_every: cfg.diagnostics.report_every,
        m_max: cfg.diagnostics.m_max,
        norms: NormOptions {
            cap: cfg.diagnostics.order_cap,
            ..NormOptions::default()
        },
        criteria: cfg.breakdown.criteria(),
    };
    info!(
        "{label}: a = {:.6e}, b = {:.6e}, eps = {:.6}, delta = {:.6}, t_end = {t_end:.3}",
        data.a, data.b, data.measured.eps, data.measured.delta
    );

    let mut next_checkpoint = cfg.diagnostics.checkpoint_every;
    let checkpoint_dir = out.filter(|_| cfg.diagnostics.checkpoint_every.is_some());
    let run = run_observed(&data.state, &cfg.eos, &run_cfg, |state, event| {
        if let (Some(dir), Some(tc)) = (checkpoint_dir, next_checkpoint) {
            let due = state.t >= tc - 1e-12 || event == Event::Finish;
            if due && event != Event::Start {
                save_checkpoint(&dir.join(format!("{label}_t{:010.4}.chk", state.t)), state)?;
                let every = cfg.diagnostics.checkpoint_every.expect("set");
                next_checkpoint = Some(tc + every * ((state.t - tc) / every).floor().max(0.0) + every);
            }
        }
        Ok(())
    })?;
    if let (Some(dir), true) = (out, cfg.output.norms) {
        write_norms_csv(BufWriter::new(File::create(dir.join(format!("{label}_norms.csv")))?), &run.reports)?;
    }
    let summary = RunSummary {
        label: label.to_string(),
        param_value: None,
        amplitude_irrotational: data.a,
        amplitude_vortical: data.b,
        measured_eps: data.measured.eps,
        measured_delta: data.measured.delta,
        normalization_iterations: data.iterations,
        t_window,
        t_end,
        steps: run.steps,
        breakdown: run.breakdown,
        wall_time_s: start.elapsed().as_secs_f64(),
        error: None,
    };
    Ok(ScenarioOutcome { summary, run })
}

/// One sweep point: the CSV record and the manifest entry.
#[derive(Clone, Debug)]
pub struct SweepRun {
    pub record: SweepRecord,
    pub summary: RunSummary,
}

fn sweep_point(base: &ScenarioConfig, param: SweepParam, idx: usize, value: f64, out: Option<&Path>) -> SweepRun {
    let start = Instant::now();
    let mut cfg = base.clone();
    match param {
        SweepParam::Delta => cfg.data.delta_target = value,
        SweepParam::Eps => cfg.data.eps_target = value,
    }
    cfg.sweep.values.clear();
    let label = format!("{}_{idx:02}", param.as_str());
    let keep_wall = base.output.wall_time;
    match cfg.validate().and_then(|_| run_scenario(&cfg, &label, out)) {
        Ok(o) => {
            let mut summary = o.summary;
            summary.param_value = Some(value);
            let b = summary.breakdown;
            let reason = match (b.occurred, b.reason) {
                (true, Some(r)) => r.as_str().to_string(),
                _ if (summary.t_end - summary.t_window).abs() <= 1e-12 * summary.t_window.max(1.0) => {
                    NO_BREAKDOWN_IN_WINDOW.to_string()
                }
                _ => NO_BREAKDOWN_BEFORE_END.to_string(),
            };
            SweepRun {
                record: SweepRecord {
                    param_name: param,
                    param_value: value,
                    t_break: if b.occurred { b.t_break } else { None },
                    reason,
                    measured_eps: summary.measured_eps,
                    measured_delta: summary.measured_delta,
                    wall_time_s: if keep_wall { summary.wall_time_s } else { 0.0 },
                },
                summary,
            }
        }
        Err(e) => {
            warn!("{label}: run failed: {e}");
            let wall = start.elapsed().as_secs_f64();
            SweepRun {
                record: SweepRecord {
                    param_name: param,
                    param_value: value,
                    t_break: None,
                    reason: format!("failed: {}", e.to_string().replace([',', '\n'], ";")),
                    measured_eps: f64::NAN,
                    measured_delta: f64::NAN,
                    wall_time_s: if keep_wall { wall } else { 0.0 },
                },
                summary: RunSummary {
                    label,
                    param_value: Some(value),
                    amplitude_irrotational: f64::NAN,
                    amplitude_vortical: f64::NAN,
                    measured_eps: f64::NAN,
                    measured_delta: f64::NAN,
                    normalization_iterations: 0,
                    t_window: f64::NAN,
                    t_end: f64::NAN,
                    steps: 0,
                    breakdown: BreakdownReport::none(),
                    wall_time_s: wall,
                    error: Some(e.to_string()),
                },
            }
        }
    }
}

/// Runs one scenario per value on up to `threads` workers (0: all cores).
/// `sink` sees the records in input order as soon as each prefix is done.
pub fn run_sweep(
    base: &ScenarioConfig,
    param: SweepParam,
    values: &[f64],
    threads: usize,
    out: Option<&Path>,
    mut sink: impl FnMut(&SweepRun) -> Result<()>,
) -> Result<Vec<SweepRun>> {
    validate_sweep_values(values)?;
    if values.is_empty() {
        return Ok(Vec::new());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let (tx, rx) = mpsc::channel::<(usize, SweepRun)>();
    let mut slots: Vec<Option<SweepRun>> = vec![None; values.len()];
    let mut emitted = 0;
    std::thread::scope(|scope| -> Result<()> {
        scope.spawn(move || {
            pool.install(|| {
                values.par_iter().enumerate().for_each_with(tx, |tx, (idx, &v)| {
                    let run = sweep_point(base, param, idx, v, out);
                    // the receiver outlives every sender
                    let _ = tx.send((idx, run));
                });
            });
        });
        for (idx, run) in rx {
            slots[idx] = Some(run);
            while emitted < slots.len() {
                match &slots[emitted] {
                    Some(r) => {
                        sink(r)?;
                        emitted += 1;
                    }
                    None => break,
                }
            }
        }
        Ok(())
    })?;
    Ok(slots.into_iter().map(|s| s.expect("every point reported")).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

/// Least squares of `ln t_break` against `ln param_value` over records with
/// a finite breakdown time.
pub fn fit_powerlaw(records: &[SweepRecord]) -> Result<PowerLawFit> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| match r.t_break {
            Some(t) if t.is_finite() && t > 0.0 && r.param_value > 0.0 => Some((r.param_value.ln(), t.ln())),
            _ => None,
        })
        .collect();
    if pts.len() < 3 {
        return Err(Error::TooFewPoints(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Config("power-law fit needs at least two distinct parameter values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(PowerLawFit {
        slope,
        intercept,
        r2,
        points: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(v: f64, t: Option<f64>) -> SweepRecord {
        SweepRecord {
            param_name: SweepParam::Delta,
            param_value: v,
            t_break: t,
            reason: String::new(),
            measured_eps: 0.0,
            measured_delta: 0.0,
            wall_time_s: 0.0,
        }
    }

    #[test]
    fn exact_power_laws() {
        let inv: Vec<_> = [0.04, 0.02, 0.01, 0.005].iter().map(|&d| rec(d, Some(3.0 / d))).collect();
        let f = fit_powerlaw(&inv).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        let sq: Vec<_> = [0.4, 0.28, 0.2, 0.14].iter().map(|&e| rec(e, Some(2.0 / (e * e)))).collect();
        assert!((fit_powerlaw(&sq).unwrap().slope + 2.0).abs() < 1e-12);
    }

    #[test]
    fn missing_points_are_excluded() {
        let r = vec![rec(0.04, Some(1.0)), rec(0.02, None), rec(0.01, Some(4.0))];
        assert!(matches!(fit_powerlaw(&r), Err(Error::TooFewPoints(2))));
    }

    #[test]
    fn empty_sweep() {
        let out = run_sweep(&super::super::Preset::Smoke.config(), SweepParam::Delta, &[], 1, None, |_| Ok(())).unwrap();
        assert!(out.is_empty());
    }
}
