//! Helmholtz decomposition, the nonlocal term `𝒜`, the velocity potential
//! and residuals of the potential-flow identities.
//!
//! Every quadratic product is projected with the same 2/3 rule the solver
//! uses, so on solver states (band-limited to `n/3`) the Bernoulli and wave
//! identities hold to rounding. All `φ`-type quantities are mean-free.

use crate::error::{Error, Result};
use crate::flow::{rhs_unchecked, FlowState};
use crate::spectral::{dealias, gradient, Axis, ScalarField, VectorField};

/// `P₁U` (curl-free) and `P₂U` (divergence-free).
#[derive(Clone, Debug)]
pub struct HelmholtzPair {
    pub p1: VectorField,
    pub p2: VectorField,
}

/// `∂₁U₂ − ∂₂U₁`.
pub fn curl2d(u: &VectorField) -> ScalarField {
    let a = u.c2.spectrum().derivative(Axis::X1);
    let b = u.c1.spectrum().derivative(Axis::X2);
    a.sub(&b).to_field()
}

/// `∂₁U₁ + ∂₂U₂`.
pub fn div2d(u: &VectorField) -> ScalarField {
    let a = u.c1.spectrum().derivative(Axis::X1);
    let b = u.c2.spectrum().derivative(Axis::X2);
    a.add(&b).to_field()
}

/// `P₁U = ∇Φ` with `ΔΦ = div U`, and `P₂U = U − P₁U`.
pub fn helmholtz(u: &VectorField) -> HelmholtzPair {
    let a = u.c1.spectrum().derivative(Axis::X1);
    let b = u.c2.spectrum().derivative(Axis::X2);
    let phi = a.add(&b).inv_laplacian();
    let p1 = VectorField {
        c1: phi.derivative(Axis::X1).to_field(),
        c2: phi.derivative(Axis::X2).to_field(),
    };
    let p2 = u - &p1;
    HelmholtzPair { p1, p2 }
}

/// `Δ^{-1} curl(D(V))` for a vector product `V`.
fn inv_lap_curl(v: &VectorField) -> ScalarField {
    let a = v.c2.spectrum().dealias().derivative(Axis::X1);
    let b = v.c1.spectrum().dealias().derivative(Axis::X2);
    a.sub(&b).inv_laplacian().to_field()
}

fn inv_lap_div(v: &VectorField) -> ScalarField {
    let a = v.c1.spectrum().derivative(Axis::X1);
    let b = v.c2.spectrum().derivative(Axis::X2);
    a.add(&b).inv_laplacian().to_field()
}

fn times(u: &VectorField, f: &ScalarField) -> VectorField {
    VectorField {
        c1: &u.c1 * f,
        c2: &u.c2 * f,
    }
}

/// `𝒜 = −(−Δ)^{-1} curl(u curl u) = Δ^{-1} curl(u curl u)`, mean-free.
pub fn nonlocal_a(state: &FlowState) -> ScalarField {
    let w = curl2d(&state.u);
    inv_lap_curl(&times(&state.u, &w))
}

/// `φ = Δ^{-1} div u`, so `∇φ = P₁u`.
pub fn potential_phi(state: &FlowState) -> ScalarField {
    inv_lap_div(&state.u)
}

/// A residual field together with the size of the terms it balances.
#[derive(Clone, Debug)]
pub struct IdentityResidual {
    pub residual: ScalarField,
    /// Sum of the L² norms of the balanced terms.
    pub scale: f64,
}

impl IdentityResidual {
    /// `‖residual‖₂ / scale`, zero when every term vanishes.
    pub fn relative(&self) -> f64 {
        let r = self.residual.l2_norm();
        if self.scale == 0.0 {
            if r == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            r / self.scale
        }
    }
}

fn norms(fields: &[&ScalarField]) -> f64 {
    fields.iter().map(|f| f.l2_norm()).sum()
}

/// Terms of the Bernoulli relation `∂tφ + ½|u|² + σ − ½σ² = 𝒜`.
struct Bernoulli {
    dt_phi: ScalarField,
    half_u2: ScalarField,
    half_s2: ScalarField,
    a: ScalarField,
}

fn bernoulli_terms(state: &FlowState) -> Bernoulli {
    let (_, ut) = rhs_unchecked(state, 1.0);
    Bernoulli {
        dt_phi: inv_lap_div(&ut),
        half_u2: dealias(&state.u.norm_sq_pointwise().scale(0.5)),
        half_s2: dealias(&state.sigma.map(|s| 0.5 * s * s)),
        a: nonlocal_a(state),
    }
}

/// `∂tφ + ½|u|² + σ − ½σ² − 𝒜` with `∂tφ = Δ^{-1} div ∂tu`, after
/// subtracting its spatial mean. Chaplygin law.
pub fn bernoulli_residual(state: &FlowState) -> IdentityResidual {
    let b = bernoulli_terms(state);
    let sum = &(&(&b.dt_phi + &b.half_u2) + &(&state.sigma - &b.half_s2)) - &b.a;
    IdentityResidual {
        residual: sum.sub_mean(),
        scale: norms(&[&b.dt_phi, &b.half_u2, &state.sigma, &b.half_s2, &b.a]),
    }
}

/// `σ` rebuilt as `−∂tφ + 𝒜 − ½(|u|² − σ²)`, mean-adjusted to match `σ`'s mean.
pub fn sigma_from_potential(state: &FlowState) -> ScalarField {
    let b = bernoulli_terms(state);
    let rebuilt = &(&(&b.a - &b.dt_phi) - &b.half_u2) + &b.half_s2;
    let shift = state.sigma.mean() - rebuilt.mean();
    rebuilt.map(|v| v + shift)
}

/// `div(u·∇u) − ½Δ|u|² + curl(u curl u)`.
pub fn vector_identity_residual(u: &VectorField) -> IdentityResidual {
    let g1 = gradient(&u.c1);
    let g2 = gradient(&u.c2);
    let adv = VectorField {
        c1: &(&u.c1 * &g1.c1) + &(&u.c2 * &g1.c2),
        c2: &(&u.c1 * &g2.c1) + &(&u.c2 * &g2.c2),
    };
    let div_adv = div2d(&adv.map(dealias));
    let half_lap = u.norm_sq_pointwise().spectrum().dealias().laplacian().to_field().scale(0.5);
    let w = curl2d(u);
    let curl_uw = curl2d(&times(u, &w).map(dealias));
    let residual = &(&div_adv - &half_lap) + &curl_uw;
    IdentityResidual {
        scale: norms(&[&div_adv, &half_lap, &curl_uw]),
        residual,
    }
}

/// `∂t𝒜` by the product rule with `∂tu` from the equations.
fn dt_nonlocal_a(u: &VectorField, ut: &VectorField) -> ScalarField {
    let w = curl2d(u);
    let wt = curl2d(ut);
    let v = &times(ut, &w) + &times(u, &wt);
    inv_lap_curl(&v)
}

/// `∂t²φ − Δφ − F` with `F = ∂t𝒜 − (2−σ)Q₁ − u·Q₂`, mean-adjusted.
/// `∂t²φ` comes from differentiating the Bernoulli relation through the
/// equations. Chaplygin law.
pub fn wave_residual(state: &FlowState) -> IdentityResidual {
    let (st, ut) = rhs_unchecked(state, 1.0);
    let d = crate::flow::Derivs::of(&state.sigma, &state.u);
    let div_u = d.div();
    let q1 = &st + &div_u;
    let q2 = VectorField {
        c1: &ut.c1 + &d.s1,
        c2: &ut.c2 + &d.s2,
    };
    let dt_a = dt_nonlocal_a(&state.u, &ut);
    let dtt_phi = &(&(&dealias(&(&state.sigma * &st)) - &st) - &dealias(&state.u.dot(&ut))) + &dt_a;
    let lap_phi = div_u;
    let two_minus_sigma = state.sigma.map(|s| 2.0 - s);
    let f = &(&dt_a - &dealias(&(&two_minus_sigma * &q1))) - &dealias(&state.u.dot(&q2));
    let residual = (&(&dtt_phi - &lap_phi) - &f).sub_mean();
    IdentityResidual {
        scale: norms(&[&dtt_phi, &lap_phi, &f]),
        residual,
    }
}

/// Largest |curl u| accepted by [`qlw_residual`].
pub const IRROTATIONAL_TOL: f64 = 1e-10;

/// Residual of the second-order potential equation
/// `∂t²φ − Δφ + 2∂kφ∂t∂kφ − 2∂tφΔφ + ∂iφ∂jφ∂ijφ − |∇φ|²Δφ = 0`.
/// Requires an irrotational Chaplygin state. `∂tφ` uses the decaying gauge
/// `−σ + ½σ² − ½|u|²`.
pub fn qlw_residual(state: &FlowState) -> Result<IdentityResidual> {
    let max_curl = curl2d(&state.u).max_abs();
    if max_curl > IRROTATIONAL_TOL {
        return Err(Error::Rotational { max_curl });
    }
    let (st, ut) = rhs_unchecked(state, 1.0);
    let grad_phi = helmholtz(&state.u).p1;
    let dt_grad_phi = helmholtz(&ut).p1;
    let sigma = &state.sigma;
    let u2 = grad_phi.norm_sq_pointwise();
    let dt_phi = sigma.zip_map(&u2, |s, q| -s + 0.5 * s * s - 0.5 * q);
    let dtt_phi = &(&(sigma * &st) - &st) - &grad_phi.dot(&ut);

    let phi = potential_phi(state).spectrum();
    let p11 = phi.derivative(Axis::X1).derivative(Axis::X1).to_field();
    let p12 = phi.derivative(Axis::X1).derivative(Axis::X2).to_field();
    let p22 = phi.derivative(Axis::X2).derivative(Axis::X2).to_field();
    let lap = &p11 + &p22;

    let (g1, g2) = (grad_phi.c1.values(), grad_phi.c2.values());
    let (h1, h2) = (dt_grad_phi.c1.values(), dt_grad_phi.c2.values());
    let mut res = vec![0.0; sigma.values().len()];
    let mut nonlinear = vec![0.0; res.len()];
    for k in 0..res.len() {
        let l = lap.values()[k];
        let cross = 2.0 * (g1[k] * h1[k] + g2[k] * h2[k]) - 2.0 * dt_phi.values()[k] * l;
        let cubic = g1[k] * g1[k] * p11.values()[k]
            + 2.0 * g1[k] * g2[k] * p12.values()[k]
            + g2[k] * g2[k] * p22.values()[k]
            - (g1[k] * g1[k] + g2[k] * g2[k]) * l;
        nonlinear[k] = cross + cubic;
        res[k] = dtt_phi.values()[k] - l + cross + cubic;
    }
    let grid = *sigma.grid();
    let residual = ScalarField::from_values(grid, res)?;
    let nonlinear = ScalarField::from_values(grid, nonlinear)?;
    Ok(IdentityResidual {
        scale: norms(&[&dtt_phi, &lap, &nonlinear]),
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;

    fn gauss(x: f64, y: f64) -> f64 {
        (-(x * x + y * y)).exp()
    }

    fn grid() -> Grid {
        Grid::new(64, 8.0).unwrap()
    }

    #[test]
    fn curl_of_gradient_and_div_of_perp_gradient_vanish() {
        let g = grid();
        let f = ScalarField::from_fn(g, |x, y| gauss(x - 0.5, y) * (1.0 + x * y));
        let grad = gradient(&f);
        assert!(curl2d(&grad).max_abs() < 1e-12);
        let perp = grad.perp();
        assert!(div2d(&perp).max_abs() < 1e-12);
        let lap = crate::spectral::laplacian(&f);
        assert!((&curl2d(&perp) - &lap).max_abs() < 1e-12);
    }

    #[test]
    fn helmholtz_of_pure_parts() {
        let g = grid();
        let f = ScalarField::from_fn(g, gauss);
        let grad = gradient(&f);
        let pair = helmholtz(&grad);
        assert!(pair.p2.max_abs() < 1e-12);
        let pair = helmholtz(&grad.perp());
        assert!(pair.p1.max_abs() < 1e-12);
    }

    #[test]
    fn nonlocal_a_vanishes_for_irrotational_flow() {
        let g = grid();
        let u = gradient(&ScalarField::from_fn(g, |x, y| gauss(x, y - 1.0) * x));
        let st = FlowState::new(ScalarField::zeros(g), u, 0.0).unwrap();
        assert!(nonlocal_a(&st).max_abs() < 1e-12);
    }

    #[test]
    fn nonlocal_a_is_quadratic() {
        let g = grid();
        let u = gradient(&ScalarField::from_fn(g, |x, y| gauss(x, y) * (1.0 + 0.3 * x))).perp();
        let st = FlowState::new(ScalarField::zeros(g), u, 0.0).unwrap();
        let a = nonlocal_a(&st);
        let a3 = nonlocal_a(&st.scaled(3.0));
        assert!((&a3 - &a.scale(9.0)).max_abs() <= 1e-12 * a3.max_abs());
    }

    #[test]
    fn potential_of_gradient_field() {
        let g = grid();
        let psi = ScalarField::from_fn(g, |x, y| gauss(x, y) * y).sub_mean();
        let st = FlowState::new(ScalarField::zeros(g), gradient(&psi), 0.0).unwrap();
        assert!((&potential_phi(&st) - &psi).max_abs() < 1e-12);
        let st = FlowState::new(ScalarField::zeros(g), gradient(&psi).perp(), 0.0).unwrap();
        assert!(potential_phi(&st).max_abs() < 1e-12);
    }

    #[test]
    fn rest_state_residuals_vanish() {
        let st = FlowState::rest(grid());
        assert_eq!(bernoulli_residual(&st).relative(), 0.0);
        assert_eq!(wave_residual(&st).relative(), 0.0);
        assert_eq!(qlw_residual(&st).unwrap().relative(), 0.0);
        assert_eq!(vector_identity_residual(&st.u).relative(), 0.0);
    }

    #[test]
    fn constant_velocity_satisfies_vector_identity() {
        let g = grid();
        let u = VectorField::from_fn(g, |_, _| (0.4, -1.1));
        assert!(vector_identity_residual(&u).residual.max_abs() < 1e-13);
    }

    #[test]
    fn qlw_rejects_rotational_state() {
        let g = grid();
        let u = gradient(&ScalarField::from_fn(g, gauss)).perp();
        let st = FlowState::new(ScalarField::zeros(g), u, 0.0).unwrap();
        assert!(matches!(qlw_residual(&st), Err(Error::Rotational { .. })));
    }

    #[test]
    fn bernoulli_residual_gauge_invariant() {
        let g = grid();
        let sigma = dealias(&ScalarField::from_fn(g, |x, y| 0.05 * gauss(x, y)));
        let u = gradient(&ScalarField::from_fn(g, |x, y| 0.03 * gauss(x - 1.0, y))).map(dealias);
        let st = FlowState::new(sigma, u, 0.0).unwrap();
        let r = bernoulli_residual(&st);
        assert!(r.residual.mean().abs() < 1e-15);
    }
}
