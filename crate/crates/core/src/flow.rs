//! Physical state, equations of state and the reduced first-order system.
//!
//! Both gas laws are carried in a shared symmetric form. With the normalized
//! sound speed `c = 1 + βσ` and density `ρ = c^{1/β}`,
//!
//! ```text
//! ∂tσ + div u = Q₁ = α σ div u − u·∇σ
//! ∂tu + ∇σ   = Q₂ = α σ∇σ − u·∇u,        α = −β
//! ```
//!
//! Chaplygin gases have `β = −1`, so `σ = 1 − 1/ρ`; polytropic gases have
//! `β = (γ − 1)/2`, so `σ = (2/(γ−1))(c − 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{dealias, Axis, Grid, ScalarField, VectorField};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EosSpec {
    /// `P(ρ) = P₀ − B/ρ`.
    Chaplygin { p0: f64, b: f64 },
    /// `P(ρ) = Aρ^γ`.
    Polytropic { a: f64, gamma: f64 },
}

impl Default for EosSpec {
    fn default() -> Self {
        Self::chaplygin()
    }
}

impl EosSpec {
    /// `P₀ = 2`, `B = ρ̄² = 1`.
    pub fn chaplygin() -> Self {
        Self::Chaplygin { p0: 2.0, b: 1.0 }
    }

    /// Polytropic law normalized so that `c(1) = 1`, i.e. `A = 1/γ`.
    pub fn polytropic(gamma: f64) -> Self {
        Self::Polytropic {
            a: 1.0 / gamma,
            gamma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Chaplygin { p0, b } => {
                if !(p0 > 0.0 && b > 0.0) {
                    return Err(Error::InvalidEos(format!("Chaplygin needs P0 > 0, B > 0 (got {p0}, {b})")));
                }
                if (b - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidEos(format!("c(1) = 1 requires B = 1 (got {b})")));
                }
            }
            Self::Polytropic { a, gamma } => {
                if !(a > 0.0 && gamma > 1.0 && gamma < 3.0) {
                    return Err(Error::InvalidEos(format!(
                        "polytropic needs A > 0 and 1 < gamma < 3 (got {a}, {gamma})"
                    )));
                }
                if (a * gamma - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidEos(format!("c(1) = 1 requires A*gamma = 1 (got {})", a * gamma)));
                }
            }
        }
        Ok(())
    }

    pub fn is_chaplygin(&self) -> bool {
        matches!(self, Self::Chaplygin { .. })
    }

    /// `β` in `c = 1 + βσ`.
    pub fn beta(&self) -> f64 {
        match *self {
            Self::Chaplygin { .. } => -1.0,
            Self::Polytropic { gamma, .. } => 0.5 * (gamma - 1.0),
        }
    }

    /// Coefficient `α` of the self-interaction terms in `Q₁`, `Q₂`.
    pub fn alpha(&self) -> f64 {
        -self.beta()
    }

    pub fn pressure(&self, rho: f64) -> f64 {
        match *self {
            Self::Chaplygin { p0, b } => p0 - b / rho,
            Self::Polytropic { a, gamma } => a * rho.powf(gamma),
        }
    }

    pub fn sound_speed(&self, rho: f64) -> f64 {
        match *self {
            Self::Chaplygin { b, .. } => b.sqrt() / rho,
            Self::Polytropic { a, gamma } => (a * gamma * rho.powf(gamma - 1.0)).sqrt(),
        }
    }

    pub fn density_of(&self, sigma: f64) -> f64 {
        let beta = self.beta();
        (1.0 + beta * sigma).powf(1.0 / beta)
    }

    pub fn sigma_of(&self, rho: f64) -> f64 {
        let beta = self.beta();
        (rho.powf(beta) - 1.0) / beta
    }

    /// `1/ρ` and its first three derivatives with respect to `σ`.
    pub fn inverse_density_derivatives(&self, sigma: f64) -> [f64; 4] {
        let beta = self.beta();
        let c = 1.0 + beta * sigma;
        let p = -1.0 / beta;
        let mut out = [0.0; 4];
        let mut coef = 1.0;
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = coef * c.powf(p - k as f64);
            coef *= (p - k as f64) * beta;
        }
        out
    }
}

/// Breakdown thresholds on the density; not physical claims.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityBounds {
    pub rho_min: f64,
    pub rho_max: f64,
}

impl Default for DensityBounds {
    fn default() -> Self {
        Self {
            rho_min: 0.05,
            rho_max: 20.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub sigma: ScalarField,
    pub u: VectorField,
    pub t: f64,
}

impl FlowState {
    pub fn new(sigma: ScalarField, u: VectorField, t: f64) -> Result<Self> {
        if sigma.grid() != u.grid() {
            return Err(Error::GridMismatch(sigma.grid().n(), u.grid().n()));
        }
        Ok(Self { sigma, u, t })
    }

    pub fn rest(grid: Grid) -> Self {
        Self {
            sigma: ScalarField::zeros(grid),
            u: VectorField::zeros(grid),
            t: 0.0,
        }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        self.sigma.grid()
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            sigma: self.sigma.scale(lambda),
            u: self.u.scale(lambda),
            t: self.t,
        }
    }

    pub fn dealiased(&self) -> Self {
        Self {
            sigma: dealias(&self.sigma),
            u: self.u.map(dealias),
            t: self.t,
        }
    }

    pub fn ensure_finite(&self) -> Result<()> {
        self.sigma.ensure_finite("sigma")?;
        self.u.ensure_finite("velocity")
    }

    pub fn density(&self, eos: &EosSpec) -> Result<ScalarField> {
        density(eos, &self.sigma)
    }

    /// Checks finiteness and the density window.
    pub fn check_admissible(&self, eos: &EosSpec, bounds: &DensityBounds) -> Result<()> {
        self.ensure_finite()?;
        let rho = self.density(eos)?;
        let n = self.grid().n();
        for (idx, &r) in rho.values().iter().enumerate() {
            if !(r >= bounds.rho_min && r <= bounds.rho_max) {
                return Err(Error::Vacuum {
                    i: idx % n,
                    j: idx / n,
                    value: self.sigma.values()[idx],
                });
            }
        }
        Ok(())
    }

    /// `∫ρ dx`.
    pub fn mass(&self, eos: &EosSpec) -> Result<f64> {
        Ok(crate::spectral::integrate(&self.density(eos)?))
    }

    pub fn curl(&self) -> ScalarField {
        crate::helmholtz::curl2d(&self.u)
    }

    /// Specific vorticity `w = curl u / ρ`.
    pub fn specific_vorticity(&self, eos: &EosSpec) -> ScalarField {
        let curl = self.curl();
        let inv_rho = self.sigma.map(|s| eos.inverse_density_derivatives(s)[0]);
        &curl * &inv_rho
    }
}

fn worst_node(field: &ScalarField, bad: impl Fn(f64) -> bool) -> Option<(usize, usize, f64)> {
    let n = field.grid().n();
    let mut worst: Option<(usize, f64)> = None;
    for (idx, &v) in field.values().iter().enumerate() {
        if bad(v) {
            match worst {
                Some((_, w)) if !(v > w) && w.is_finite() => {}
                _ => worst = Some((idx, v)),
            }
        }
    }
    worst.map(|(idx, v)| (idx % n, idx / n, v))
}

/// `ρ = 1/(1 − σ)`, the Chaplygin relation.
pub fn rho_from_sigma(sigma: &ScalarField) -> Result<ScalarField> {
    density(&EosSpec::chaplygin(), sigma)
}

/// Density of a sound-speed variable under the given law.
pub fn density(eos: &EosSpec, sigma: &ScalarField) -> Result<ScalarField> {
    let beta = eos.beta();
    if let Some((i, j, value)) = worst_node(sigma, |s| !(1.0 + beta * s > 0.0)) {
        return Err(Error::Vacuum { i, j, value });
    }
    Ok(sigma.map(|s| eos.density_of(s)))
}

pub fn sigma_from_density(eos: &EosSpec, rho: &ScalarField) -> Result<ScalarField> {
    if let Some((i, j, value)) = worst_node(rho, |r| !(r > 0.0)) {
        return Err(Error::NonPositiveDensity { i, j, value });
    }
    Ok(rho.map(|r| eos.sigma_of(r)))
}

/// Pointwise `(P(ρ), c(ρ))`.
pub fn pressure_and_sound_speed(eos: &EosSpec, rho: &ScalarField) -> Result<(ScalarField, ScalarField)> {
    if let Some((i, j, value)) = worst_node(rho, |r| !(r > 0.0)) {
        return Err(Error::NonPositiveDensity { i, j, value });
    }
    Ok((rho.map(|r| eos.pressure(r)), rho.map(|r| eos.sound_speed(r))))
}

/// Spectral first derivatives of `(σ, u)`.
pub(crate) struct Derivs {
    pub s1: ScalarField,
    pub s2: ScalarField,
    pub u11: ScalarField,
    pub u12: ScalarField,
    pub u21: ScalarField,
    pub u22: ScalarField,
}

impl Derivs {
    pub fn of(sigma: &ScalarField, u: &VectorField) -> Self {
        let ss = sigma.spectrum();
        let s1s = u.c1.spectrum();
        let s2s = u.c2.spectrum();
        Self {
            s1: ss.derivative(Axis::X1).to_field(),
            s2: ss.derivative(Axis::X2).to_field(),
            u11: s1s.derivative(Axis::X1).to_field(),
            u12: s1s.derivative(Axis::X2).to_field(),
            u21: s2s.derivative(Axis::X1).to_field(),
            u22: s2s.derivative(Axis::X2).to_field(),
        }
    }

    pub fn div(&self) -> ScalarField {
        &self.u11 + &self.u22
    }
}

/// Pointwise (not yet dealiased) `B(A, B')`:
/// `(α σ_A div u_B − u_A·∇σ_B,  α σ_A ∇σ_B − u_A·∇u_B)`.
pub(crate) fn bilinear_raw(
    alpha: f64,
    sigma_a: &ScalarField,
    u_a: &VectorField,
    db: &Derivs,
) -> [Vec<f64>; 3] {
    let len = sigma_a.values().len();
    let s = sigma_a.values();
    let (a1, a2) = (u_a.c1.values(), u_a.c2.values());
    let mut q1 = vec![0.0; len];
    let mut q21 = vec![0.0; len];
    let mut q22 = vec![0.0; len];
    for k in 0..len {
        let (s1, s2) = (db.s1.values()[k], db.s2.values()[k]);
        let (u11, u12, u21, u22) = (
            db.u11.values()[k],
            db.u12.values()[k],
            db.u21.values()[k],
            db.u22.values()[k],
        );
        q1[k] = alpha * s[k] * (u11 + u22) - (a1[k] * s1 + a2[k] * s2);
        q21[k] = alpha * s[k] * s1 - (a1[k] * u11 + a2[k] * u12);
        q22[k] = alpha * s[k] * s2 - (a1[k] * u21 + a2[k] * u22);
    }
    [q1, q21, q22]
}

pub(crate) fn dealias_raw(grid: Grid, raw: [Vec<f64>; 3]) -> (ScalarField, VectorField) {
    let [a, b, c] = raw;
    let f = |v: Vec<f64>| dealias(&ScalarField::from_values(grid, v).expect("length"));
    (f(a), VectorField { c1: f(b), c2: f(c) })
}

fn chaplygin_q(state: &FlowState) -> (ScalarField, VectorField) {
    let d = Derivs::of(&state.sigma, &state.u);
    dealias_raw(*state.grid(), bilinear_raw(1.0, &state.sigma, &state.u, &d))
}

/// `Q₁ = σ div u − u·∇σ`, dealiased.
pub fn q1(state: &FlowState) -> ScalarField {
    chaplygin_q(state).0
}

/// `Q₂ = σ∇σ − u·∇u`, dealiased.
pub fn q2(state: &FlowState) -> VectorField {
    chaplygin_q(state).1
}

/// `(∂tσ, ∂tu) = (−div u + Q₁, −∇σ + Q₂)` with the law's `α`.
pub fn rhs(state: &FlowState, eos: &EosSpec) -> Result<(ScalarField, VectorField)> {
    density(eos, &state.sigma)?;
    Ok(rhs_unchecked(state, eos.alpha()))
}

pub(crate) fn rhs_unchecked(state: &FlowState, alpha: f64) -> (ScalarField, VectorField) {
    let d = Derivs::of(&state.sigma, &state.u);
    let (q1, q2) = dealias_raw(*state.grid(), bilinear_raw(alpha, &state.sigma, &state.u, &d));
    let st = &q1 - &d.div();
    let ut = VectorField {
        c1: &q2.c1 - &d.s1,
        c2: &q2.c2 - &d.s2,
    };
    (st, ut)
}

/// How time derivatives are generated from the equations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Closure {
    /// The full quadratic system.
    Full,
    /// Its linearization about the rest state, `∂tσ = −div u`, `∂tu = −∇σ`.
    Linear,
}

/// Time-Taylor data `(∂t^k σ, ∂t^k u)` for `k = 0..=depth`, generated by
/// substituting the semi-discrete equations (no time differencing).
#[derive(Clone, Debug)]
pub struct StateJet {
    pub sigma: Vec<ScalarField>,
    pub u: Vec<VectorField>,
    pub t: f64,
}

impl StateJet {
    pub fn new(state: &FlowState, eos: &EosSpec, depth: usize, closure: Closure) -> Self {
        let alpha = eos.alpha();
        let grid = *state.grid();
        let mut sigma = vec![state.sigma.clone()];
        let mut u = vec![state.u.clone()];
        let mut derivs: Vec<Derivs> = Vec::new();
        for j in 0..depth {
            derivs.push(Derivs::of(&sigma[j], &u[j]));
            let dj = &derivs[j];
            let mut st = -&dj.div();
            let mut ut = VectorField {
                c1: -&dj.s1,
                c2: -&dj.s2,
            };
            if closure == Closure::Full {
                // Leibniz rule for the bilinear part
                let mut acc = [vec![0.0; grid.len()], vec![0.0; grid.len()], vec![0.0; grid.len()]];
                for i in 0..=j {
                    let c = binomial(j, i) as f64;
                    let raw = bilinear_raw(alpha, &sigma[i], &u[i], &derivs[j - i]);
                    for (a, r) in acc.iter_mut().zip(raw.iter()) {
                        for (x, y) in a.iter_mut().zip(r) {
                            *x += c * y;
                        }
                    }
                }
                let (q1, q2) = dealias_raw(grid, acc);
                st = &st + &q1;
                ut = &ut + &q2;
            }
            sigma.push(st);
            u.push(ut);
        }
        Self { sigma, u, t: state.t }
    }

    pub fn depth(&self) -> usize {
        self.sigma.len() - 1
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> u64 {
    let mut r = 1u64;
    for i in 0..k {
        r = r * (n - i) as u64 / (i + 1) as u64;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::new(64, 8.0).unwrap()
    }

    #[test]
    fn rest_density_and_half_sigma() {
        let g = grid();
        let rho = rho_from_sigma(&ScalarField::zeros(g)).unwrap();
        assert!(rho.values().iter().all(|&r| r == 1.0));
        let rho = rho_from_sigma(&ScalarField::constant(g, 0.5)).unwrap();
        assert!(rho.values().iter().all(|&r| (r - 2.0).abs() < 1e-15));
    }

    #[test]
    fn vacuum_names_worst_node() {
        let g = grid();
        let mut s = ScalarField::zeros(g);
        s.values_mut()[3 * 64 + 5] = 1.2;
        s.values_mut()[10] = 1.0;
        match rho_from_sigma(&s) {
            Err(Error::Vacuum { i: 5, j: 3, value }) => assert_eq!(value, 1.2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sigma_density_round_trip() {
        let g = grid();
        let s = ScalarField::from_fn(g, |x, y| 0.4 * (x * 0.7).sin() * (y * 1.3).cos());
        for eos in [EosSpec::chaplygin(), EosSpec::polytropic(2.0), EosSpec::polytropic(1.4)] {
            let rho = density(&eos, &s).unwrap();
            let back = sigma_from_density(&eos, &rho).unwrap();
            assert!((&back - &s).max_abs() < 1e-14);
        }
    }

    #[test]
    fn pressure_and_sound_speed_values() {
        let g = grid();
        let one = ScalarField::constant(g, 1.0);
        let (p, c) = pressure_and_sound_speed(&EosSpec::chaplygin(), &one).unwrap();
        assert_eq!((p.values()[0], c.values()[0]), (1.0, 1.0));
        let (p, c) = pressure_and_sound_speed(&EosSpec::polytropic(2.0), &one).unwrap();
        assert_eq!(p.values()[0], 0.5);
        assert!((c.values()[0] - 1.0).abs() < 1e-15);
        let (_, c) = pressure_and_sound_speed(&EosSpec::chaplygin(), &ScalarField::constant(g, 2.0)).unwrap();
        assert_eq!(c.values()[0], 0.5);
        assert!(pressure_and_sound_speed(&EosSpec::chaplygin(), &ScalarField::zeros(g)).is_err());
    }

    #[test]
    fn sound_speed_is_linear_in_sigma() {
        for eos in [EosSpec::chaplygin(), EosSpec::polytropic(2.0), EosSpec::polytropic(1.4)] {
            for s in [-0.3, 0.0, 0.2] {
                let rho = eos.density_of(s);
                assert!((eos.sound_speed(rho) - (1.0 + eos.beta() * s)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn eos_validation() {
        assert!(EosSpec::chaplygin().validate().is_ok());
        assert!(EosSpec::polytropic(2.0).validate().is_ok());
        assert!(EosSpec::Chaplygin { p0: 2.0, b: 2.0 }.validate().is_err());
        assert!(EosSpec::Polytropic { a: 0.5, gamma: 3.5 }.validate().is_err());
    }

    #[test]
    fn inverse_density_derivatives_match_finite_differences() {
        for eos in [EosSpec::chaplygin(), EosSpec::polytropic(2.0), EosSpec::polytropic(1.4)] {
            let s = 0.13;
            let h = 1e-4;
            let g = |x: f64| eos.inverse_density_derivatives(x);
            let d = g(s);
            for k in 0..3 {
                let fd = (g(s + h)[k] - g(s - h)[k]) / (2.0 * h);
                assert!((fd - d[k + 1]).abs() < 1e-6 * (1.0 + d[k + 1].abs()), "{eos:?} k={k}");
            }
        }
    }

    #[test]
    fn q_vanish_for_constant_velocity() {
        let g = grid();
        let st = FlowState::new(ScalarField::zeros(g), VectorField::from_fn(g, |_, _| (0.3, -0.2)), 0.0).unwrap();
        assert!(q1(&st).max_abs() < 1e-14);
        assert!(q2(&st).max_abs() < 1e-14);
    }

    #[test]
    fn q2_is_gradient_of_half_sigma_squared_at_rest_velocity() {
        let g = grid();
        let sigma = dealias(&ScalarField::from_fn(g, |x, y| 0.2 * (-(x * x + y * y) / 2.0).exp()));
        let st = FlowState::new(sigma.clone(), VectorField::zeros(g), 0.0).unwrap();
        assert!(q1(&st).max_abs() < 1e-14);
        let half_sq = sigma.map(|s| 0.5 * s * s);
        let grad = crate::spectral::gradient(&half_sq);
        let diff = &q2(&st) - &grad.map(dealias);
        assert!(diff.max_abs() < 1e-10);
    }

    #[test]
    fn rest_state_is_fixed_point() {
        let g = grid();
        let (st, ut) = rhs(&FlowState::rest(g), &EosSpec::chaplygin()).unwrap();
        assert_eq!(st.max_abs(), 0.0);
        assert_eq!(ut.max_abs(), 0.0);
    }

    #[test]
    fn plane_wave_rhs_closed_form() {
        let g = grid();
        let l = g.half_width();
        let a = 1e-3;
        let k = PI / l;
        let sigma = ScalarField::from_fn(g, |x, _| a * (k * x).sin());
        let st = FlowState::new(sigma, VectorField::zeros(g), 0.0).unwrap();
        let (dst, dut) = rhs(&st, &EosSpec::chaplygin()).unwrap();
        assert!(dst.max_abs() < 1e-15);
        // −∂₁σ + σ∂₁σ
        let exact = ScalarField::from_fn(g, |x, _| {
            let s = a * (k * x).sin();
            let ds = a * k * (k * x).cos();
            -ds + s * ds
        });
        assert!((&dut.c1 - &exact).max_abs() < 1e-10);
        assert!(dut.c2.max_abs() < 1e-15);
    }

    #[test]
    fn plane_symmetric_data_stays_plane_symmetric() {
        let g = grid();
        let sigma = ScalarField::from_fn(g, |x, _| 0.1 * (-(x * x)).exp());
        let u = VectorField::from_fn(g, |x, _| (0.05 * (-(x - 1.0).powi(2)).exp(), 0.02 * (x * 0.4).cos()));
        let st = FlowState::new(sigma, u, 0.0).unwrap();
        let (dst, dut) = rhs(&st, &EosSpec::chaplygin()).unwrap();
        let n = g.n();
        for f in [&dst, &dut.c1, &dut.c2] {
            for j in 1..n {
                for i in 0..n {
                    assert!((f.at(i, j) - f.at(i, 0)).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn jet_first_level_matches_rhs() {
        let g = grid();
        let st = FlowState::new(
            dealias(&ScalarField::from_fn(g, |x, y| 0.1 * (-(x * x + y * y) / 3.0).exp())),
            VectorField::from_fn(g, |x, y| (0.05 * y * (-(x * x + y * y) / 3.0).exp(), 0.0)).map(dealias),
            0.0,
        )
        .unwrap();
        let eos = EosSpec::polytropic(2.0);
        let jet = StateJet::new(&st, &eos, 2, Closure::Full);
        let (dst, dut) = rhs(&st, &eos).unwrap();
        assert!((&jet.sigma[1] - &dst).max_abs() < 1e-15);
        assert!((&jet.u[1] - &dut).max_abs() < 1e-15);
    }
}
