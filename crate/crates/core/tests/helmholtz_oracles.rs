mod common;

use chaplygin::flow::{EosSpec, FlowState};
use chaplygin::helmholtz::{curl2d, div2d, helmholtz, nonlocal_a, potential_phi, sigma_from_potential};
use chaplygin::spectral::{gradient, Grid, ScalarField};
use common::*;
use proptest::prelude::*;

/// `f = curl(u curl u)` for `u = ∇⊥e^{−r²}`, radial.
fn source(s: f64) -> f64 {
    let s2 = s * s;
    (32.0 * s2 * s2 - 64.0 * s2 + 16.0) * (-2.0 * s2).exp()
}

/// Whole-plane `Δ⁻¹f` for radial `f` of zero total mass:
/// `ln r ∫₀ʳ f s ds + ∫ᵣ^∞ ln s f s ds`.
fn newton_potential(r: f64) -> f64 {
    let (x, w) = gauss_legendre(96);
    let integrate = |a: f64, b: f64, g: &dyn Fn(f64) -> f64| -> f64 {
        let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
        x.iter().zip(&w).map(|(xi, wi)| wi * h * g(m + h * xi)).sum()
    };
    let inner = integrate(0.0, r, &|s| source(s) * s);
    let outer = integrate(r, r.max(3.0), &|s| s.ln() * source(s) * s) + integrate(r.max(3.0), 9.0, &|s| s.ln() * source(s) * s);
    r.ln() * inner + outer
}

#[test]
fn nonlocal_term_matches_newton_potential() {
    let grid = Grid::new(256, 16.0).unwrap();
    let psi = ScalarField::from_fn(grid, |x, y| (-(x * x + y * y)).exp());
    let u = gradient(&psi).perp();
    let state = FlowState::new(ScalarField::zeros(grid), u, 0.0).unwrap();
    let a = nonlocal_a(&state);
    let n = grid.n();
    let edge = (0..n).map(|i| a.at(i, 0)).sum::<f64>() / n as f64;

    let mut worst: f64 = 0.0;
    let mut peak: f64 = 0.0;
    for k in 0..grid.len() {
        let r = grid.radius(k);
        if !(0.3..=4.0).contains(&r) {
            continue;
        }
        let exact = newton_potential(r);
        peak = peak.max(exact.abs());
        worst = worst.max((a.values()[k] - edge - exact).abs());
    }
    assert!(peak > 0.1);
    assert!(worst / peak <= 1e-3, "relative error {}", worst / peak);
}

#[test]
fn newton_potential_solves_poisson() {
    // radial Laplacian by central differences
    for &r in &[0.5, 1.0, 1.7, 2.5] {
        let h = 1e-3;
        let (a, b, c) = (newton_potential(r - h), newton_potential(r), newton_potential(r + h));
        let lap = (c - 2.0 * b + a) / (h * h) + (c - a) / (2.0 * h * r);
        assert!((lap - source(r)).abs() <= 1e-4 * source(r).abs().max(1.0), "r = {r}: {lap} vs {}", source(r));
    }
}

#[test]
fn potential_gradient_is_curl_free_part() {
    let grid = Grid::new(64, 8.0).unwrap();
    let mut rng = rng(11);
    for _ in 0..5 {
        let u = band_limited_vector(grid, &mut rng);
        let state = FlowState::new(ScalarField::zeros(grid), u.clone(), 0.0).unwrap();
        let p1 = helmholtz(&u).p1;
        let g = gradient(&potential_phi(&state));
        assert!((&g - &p1).l2_norm() <= 1e-12 * u.l2_norm());
    }
}

#[test]
fn sigma_rebuilt_from_potential() {
    let grid = Grid::new(128, 16.0).unwrap();
    let mut rng = rng(5);
    let eos = EosSpec::chaplygin();
    for _ in 0..3 {
        let s = advance(&pulse_state(grid, 0.05, 0.5, &mut rng), &eos, 0.5);
        let r = rel(&sigma_from_potential(&s), &s.sigma);
        assert!(r <= 1e-10, "{r}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projections_split_div_and_curl(seed in any::<u64>()) {
        let grid = Grid::new(32, 4.0).unwrap();
        let mut rng = rng(seed);
        let u = band_limited_vector(grid, &mut rng);
        let pair = helmholtz(&u);
        let scale = u.l2_norm();
        prop_assert!((&(&pair.p1 + &pair.p2) - &u).l2_norm() <= 1e-13 * scale);
        prop_assert!(curl2d(&pair.p1).l2_norm() <= 1e-12 * scale);
        prop_assert!(div2d(&pair.p2).l2_norm() <= 1e-12 * scale);
        let again = helmholtz(&pair.p1);
        prop_assert!((&again.p1 - &pair.p1).l2_norm() <= 1e-13 * scale);
    }
}
