#![allow(dead_code)]

use chaplygin::flow::{EosSpec, FlowState};
use chaplygin::integrator::{step, StepControl};
use chaplygin::spectral::{dealias, Grid, ScalarField, VectorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn noise(grid: Grid, rng: &mut ChaCha8Rng) -> ScalarField {
    ScalarField::from_values(grid, (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// White noise restricted to modes kept by the 2/3 rule.
pub fn band_limited(grid: Grid, rng: &mut ChaCha8Rng) -> ScalarField {
    dealias(&noise(grid, rng))
}

/// White noise restricted to `max(|m₁|, |m₂|) ≤ n/4`.
pub fn half_band(grid: Grid, rng: &mut ChaCha8Rng) -> ScalarField {
    let cut = grid.n() as i64 / 4;
    noise(grid, rng)
        .spectrum()
        .apply(|m1, m2| Complex64::new(if m1.abs() <= cut && m2.abs() <= cut { 1.0 } else { 0.0 }, 0.0))
        .to_field()
}

pub fn band_limited_vector(grid: Grid, rng: &mut ChaCha8Rng) -> VectorField {
    VectorField::new(band_limited(grid, rng), band_limited(grid, rng)).unwrap()
}

/// Random low trigonometric polynomial times `e^{−|x−c|²/(2s²)}`: smooth and
/// negligible at the box edge for `L ≥ 8s + |c|`.
pub fn windowed(grid: Grid, rng: &mut ChaCha8Rng) -> ScalarField {
    let c: (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let s: f64 = rng.gen_range(0.8..1.3);
    let modes: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    ScalarField::from_fn(grid, |x, y| {
        let p: f64 = modes.iter().map(|&(a, k1, k2, ph)| a * (k1 * x + k2 * y + ph).cos()).sum();
        let (dx, dy) = (x - c.0, y - c.1);
        p * (-(dx * dx + dy * dy) / (2.0 * s * s)).exp()
    })
}

pub fn gauss(grid: Grid, c: (f64, f64), s: f64) -> ScalarField {
    ScalarField::from_fn(grid, |x, y| {
        let (dx, dy) = (x - c.0, y - c.1);
        (-(dx * dx + dy * dy) / (s * s)).exp()
    })
}

/// A smooth Chaplygin-admissible state: density pulse, potential flow and a
/// vorticity blob of relative size `vort`.
pub fn pulse_state(grid: Grid, amp: f64, vort: f64, rng: &mut ChaCha8Rng) -> FlowState {
    let cx: f64 = rng.gen_range(-1.0..1.0);
    let cy: f64 = rng.gen_range(-1.0..1.0);
    let sigma = gauss(grid, (cx, cy), 1.5).scale(amp);
    let chi = gauss(grid, (-cy, cx), 1.5);
    let psi = gauss(grid, (cy, -cx), 1.2);
    let g = chaplygin::spectral::gradient(&chi).scale(amp);
    let r = chaplygin::spectral::gradient(&psi).perp().scale(amp * vort);
    FlowState::new(sigma, &g + &r, 0.0).unwrap()
}

/// Advances with fixed CFL steps up to `t`.
pub fn advance(state: &FlowState, eos: &EosSpec, t: f64) -> FlowState {
    let ctl = StepControl::default();
    let mut s = state.clone();
    while s.t < t - 1e-12 {
        let dt = chaplygin::integrator::cfl_dt(&s, eos, &ctl).unwrap().min(t - s.t);
        s = step(&s, eos, dt).unwrap();
    }
    s
}

pub fn rel(a: &ScalarField, b: &ScalarField) -> f64 {
    (a - b).l2_norm() / a.l2_norm().max(b.l2_norm())
}

pub fn rel_vec(a: &VectorField, b: &VectorField) -> f64 {
    (a - b).l2_norm() / a.l2_norm().max(b.l2_norm())
}

/// Nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        loop {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            let pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                x[i] = z;
                w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
                break;
            }
        }
    }
    (x, w)
}
