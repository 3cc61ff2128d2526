//! One line per criterion; exits non-zero if any fails. Run with
//! `cargo test --test acceptance`.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use chaplygin::flow::EosSpec;
use chaplygin::gamma::{apply_omega, apply_omega_tilde};
use chaplygin::harness::io::SweepCsvWriter;
use chaplygin::harness::{fit_powerlaw, run_sweep, Preset, SweepParam, SweepRecord};
use chaplygin::helmholtz::{bernoulli_residual, curl2d, div2d, helmholtz, qlw_residual, vector_identity_residual, wave_residual};
use chaplygin::spectral::{gradient, sup_abs_interpolated, Grid, ScalarField, VectorField};
use chaplygin::wave::{duhamel_inh, weighted_ratio_grad_hom, weighted_ratio_hom, WaveData};
use common::*;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn a1() -> Verdict {
    let g = Grid::new(256, 16.0).unwrap();
    let mut r = rng(1);
    let start = Instant::now();
    let (mut split, mut pyth) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let u = band_limited_vector(g, &mut r);
        let h = helmholtz(&u);
        let n2 = u.l2_norm_sq();
        split = split.max((&(&u - &h.p1) - &h.p2).l2_norm() / n2.sqrt());
        pyth = pyth.max((n2 - h.p1.l2_norm_sq() - h.p2.l2_norm_sq()).abs() / n2);
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        split <= 1e-12 && pyth <= 1e-10 && secs <= 10.0,
        format!("split {split:.2e} (<= 1e-12), norm identity {pyth:.2e} (<= 1e-10), {secs:.1} s (<= 10 s)"),
    )
}

fn a2() -> Verdict {
    let g = Grid::new(256, 16.0).unwrap();
    let mut r = rng(2);
    let (mut c1, mut c2, mut c3) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let u = &gradient(&windowed(g, &mut r)) + &gradient(&windowed(g, &mut r)).perp();
        let ot = apply_omega_tilde(&u);
        c1 = c1.max(rel_vec(&apply_omega_tilde(&helmholtz(&u).p1), &helmholtz(&ot).p1));
        c2 = c2.max(rel(&apply_omega(&div2d(&u)), &div2d(&ot)));
        c3 = c3.max(rel(&apply_omega(&curl2d(&u)), &curl2d(&ot)));
    }
    verdict(
        c1.max(c2).max(c3) <= 1e-8,
        format!("[Omega~,P1] {c1:.2e}, Omega div - div Omega~ {c2:.2e}, Omega curl - curl Omega~ {c3:.2e} (each <= 1e-8)"),
    )
}

fn a3() -> Verdict {
    let g = Grid::new(128, 8.0).unwrap();
    let mut r = rng(3);
    let worst = (0..50)
        .map(|_| {
            let u = VectorField::new(half_band(g, &mut r), half_band(g, &mut r)).unwrap();
            vector_identity_residual(&u).relative()
        })
        .fold(0.0, f64::max);
    verdict(worst <= 1e-8, format!("max relative residual {worst:.2e} (<= 1e-8)"))
}

fn a4() -> Verdict {
    let g = Grid::new(128, 16.0).unwrap();
    let eos = EosSpec::chaplygin();
    let mut r = rng(4);
    let (mut b, mut w, mut q) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..20 {
        let s0 = pulse_state(g, 0.05, 0.5, &mut r);
        let s = advance(&s0, &eos, 0.25 * (1 + k % 4) as f64);
        b = b.max(bernoulli_residual(&s).relative());
        w = w.max(wave_residual(&s).relative());
        let irr = pulse_state(g, 0.05, 0.0, &mut r);
        let si = advance(&irr, &eos, 0.5);
        q = q.max(qlw_residual(&si).map(|x| x.relative()).unwrap_or(f64::INFINITY));
    }
    verdict(
        b <= 1e-6 && w <= 1e-4 && q <= 1e-3,
        format!("bernoulli {b:.2e} (<= 1e-6), wave {w:.2e} (<= 1e-4), quasilinear wave {q:.2e} (<= 1e-3)"),
    )
}

fn a5() -> Verdict {
    let g = Grid::new(512, 16.0).unwrap();
    let eos = EosSpec::chaplygin();
    let mut s = pulse_state(g, 0.05, 1.0, &mut rng(5));
    let w0 = sup_abs_interpolated(&s.specific_vorticity(&eos));
    let mut drift = 0.0f64;
    for k in 1..=5 {
        s = advance(&s, &eos, k as f64);
        let w = sup_abs_interpolated(&s.specific_vorticity(&eos));
        drift = drift.max((w - w0).abs() / w0);
    }
    verdict(drift <= 1e-3, format!("max relative change of sup|w| over [0, 5]: {drift:.2e} (<= 1e-3)"))
}

/// `(1/2π)∫₀ᵗ∫₀^{π/2}∫₀^{2π} (t−s) sin α F(s, x + (t−s) sin α θ̂) dθ dα ds`,
/// the Poisson formula after `|y − x| = (t−s) sin α`.
fn poisson(f: impl Fn(f64, f64, f64) -> f64, t: f64, x: (f64, f64)) -> f64 {
    let (ns, na, nt) = (48, 48, 96);
    let (gs, ws) = gauss_legendre(ns);
    let (ga, wa) = gauss_legendre(na);
    let mut total = 0.0;
    for (xs, wsk) in gs.iter().zip(&ws) {
        let s = 0.5 * t * (xs + 1.0);
        let tau = t - s;
        let mut inner = 0.0;
        for (xa, wak) in ga.iter().zip(&wa) {
            let a = 0.25 * std::f64::consts::PI * (xa + 1.0);
            let rad = tau * a.sin();
            let mut ring = 0.0;
            for m in 0..nt {
                let th = std::f64::consts::TAU * m as f64 / nt as f64;
                ring += f(s, x.0 + rad * th.cos(), x.1 + rad * th.sin());
            }
            inner += wak * 0.25 * std::f64::consts::PI * tau * a.sin() * ring * std::f64::consts::TAU / nt as f64;
        }
        total += wsk * 0.5 * t * inner;
    }
    total / std::f64::consts::TAU
}

fn a6() -> Verdict {
    let start = Instant::now();
    let g = Grid::new(256, 16.0).unwrap();
    let forcing = |s: f64, x: f64, y: f64| (-(s - 1.0) * (s - 1.0)).exp() * (-((x - 0.5) * (x - 0.5) + y * y)).exp();
    let data = WaveData::forced(
        g,
        std::sync::Arc::new(move |s: f64| ScalarField::from_fn(g, |x, y| forcing(s, x, y))),
    );
    let mut worst = 0.0f64;
    for &t in &[0.5, 1.0, 2.0, 3.0, 4.0] {
        let phi = duhamel_inh(&data, t, 64).unwrap();
        let spec = phi.spectrum();
        let pts = [(0.0, 0.0), (1.0, 0.5), (-1.5, 0.0), (0.5, -2.5), (3.0, 1.0)];
        let exact: Vec<f64> = pts.iter().map(|&p| poisson(forcing, t, p)).collect();
        let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (p, e) in pts.iter().zip(&exact) {
            let (v, _, _) = spec.evaluate_with_derivatives(p.0, p.1);
            worst = worst.max((v - e).abs() / scale);
        }
    }
    // dilation 2 needs |x| <= L/4 to reach past the 1e-12 level
    let g = Grid::new(512, 48.0).unwrap();
    let times = [0.0, 1.0, 2.0, 4.0, 8.0, 12.0, 16.0];
    let base = WaveData::new(gauss(g, (0.0, 0.0), 1.0), ScalarField::zeros(g)).unwrap();
    let scaled = WaveData::new(gauss(g, (0.0, 0.0), 1.0).scale(10.0), ScalarField::zeros(g)).unwrap();
    let (r1, r10) = (weighted_ratio_hom(&base, &times).unwrap(), weighted_ratio_hom(&scaled, &times).unwrap());
    let invariance = (r1 - r10).abs() / r1;
    let mut family = Vec::new();
    let mut family_grad = Vec::new();
    for k in 0..10 {
        let c = (0.1 * k as f64, -0.05 * k as f64);
        let s = 1.0 + k as f64 / 9.0;
        let d = WaveData::new(gauss(g, c, s), ScalarField::zeros(g)).unwrap();
        family.push(weighted_ratio_hom(&d, &times).unwrap());
        family_grad.push(weighted_ratio_grad_hom(&d, &times).unwrap());
    }
    let spread = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max) / v.iter().cloned().fold(f64::INFINITY, f64::min);
    let (sp, spg) = (spread(&family), spread(&family_grad));
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-3 && invariance <= 1e-12 && sp <= 10.0 && spg <= 10.0 && secs <= 120.0,
        format!(
            "Poisson oracle {worst:.2e} (<= 1e-3, 25 samples), scaling {invariance:.1e} (<= 1e-12), \
             family spread {sp:.2} / gradient {spg:.2} (<= 10), ratio {r1:.4}, {secs:.1} s (<= 120 s)"
        ),
    )
}

fn sweep_line(name: &str, records: &[SweepRecord], lo: f64, hi: f64, need_order: bool) -> (bool, String) {
    let finite: Vec<&SweepRecord> = records.iter().filter(|r| r.t_break.is_some()).collect();
    let listing: Vec<String> = records
        .iter()
        .map(|r| match r.t_break {
            Some(t) => format!("{}: {t:.3} ({})", r.param_value, r.reason),
            None => format!("{}: none ({})", r.param_value, r.reason),
        })
        .collect();
    let ordered = !need_order
        || (finite.len() == records.len() && records.windows(2).all(|w| w[1].t_break.unwrap() > w[0].t_break.unwrap()));
    let (fit_ok, fit) = match fit_powerlaw(records) {
        Ok(f) => (
            f.slope >= lo && f.slope <= hi,
            format!("slope {:.3} in [{lo}, {hi}], r2 {:.3}", f.slope, f.r2),
        ),
        Err(e) => (false, format!("no fit ({e})")),
    };
    let pass = finite.len() >= 3 && ordered && fit_ok;
    (pass, format!("{name}: [{}], {} finite, {fit}", listing.join(", "), finite.len()))
}

fn a7() -> Verdict {
    let start = Instant::now();
    let chap = Preset::ChaplyginDelta.config();
    let chap_runs = run_sweep(&chap, SweepParam::Delta, &chap.sweep.values, 0, None, |_| Ok(())).unwrap();
    let chap_rec: Vec<SweepRecord> = chap_runs.into_iter().map(|r| r.record).collect();
    let (p1, l1) = sweep_line("chaplygin delta", &chap_rec, -1.3, -0.7, true);
    let poly = Preset::PolytropicEps.config();
    let poly_runs = run_sweep(&poly, SweepParam::Eps, &poly.sweep.values, 0, None, |_| Ok(())).unwrap();
    let poly_rec: Vec<SweepRecord> = poly_runs.into_iter().map(|r| r.record).collect();
    let (p2, l2) = sweep_line("polytropic eps", &poly_rec, -2.4, -1.6, false);
    let mins = start.elapsed().as_secs_f64() / 60.0;
    verdict(p1 && p2, format!("{l1}; {l2}; {mins:.1} min"))
}

fn a8() -> Verdict {
    let mut cfg = Preset::Smoke.config();
    cfg.sweep.values = vec![0.02, 0.01, 0.01];
    let csv = || {
        let mut w = SweepCsvWriter::new(Vec::new()).unwrap();
        run_sweep(&cfg, SweepParam::Delta, &cfg.sweep.values, 2, None, |r| w.write(&r.record)).unwrap();
        w.into_inner().unwrap()
    };
    let (a, b) = (csv(), csv());
    verdict(a == b && !a.is_empty(), format!("two sweeps, {} bytes each, identical: {}", a.len(), a == b))
}

fn main() -> ExitCode {
    let only: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with('A')).collect();
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("A1", a1),
        ("A2", a2),
        ("A3", a3),
        ("A4", a4),
        ("A5", a5),
        ("A6", a6),
        ("A7", a7),
        ("A8", a8),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        if !only.is_empty() && !only.iter().any(|o| o == name) {
            continue;
        }
        let v = f();
        println!("{name} {} {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
