//! Klainerman-type vector fields, the good unknown and the weighted norm
//! functionals used to monitor a solution.
//!
//! Vector fields act on [`ScalarJet`]/[`VectorJet`] values: a field together
//! with its time derivatives `∂t^k` generated from the equations. Spatial
//! fields act level by level; `∂t` shifts the jet and `S = t∂t + r∂r`
//! consumes one level,
//!
//! ```text
//! ∂t^j (S f) = t ∂t^{j+1} f + j ∂t^j f + r∂r ∂t^j f.
//! ```

use log::warn;
use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{binomial, Closure, EosSpec, FlowState, StateJet};
use crate::helmholtz::{curl2d, div2d};
use crate::spectral::{japanese, Axis, Grid, ScalarField, VectorField};

/// Default cap on `|a|` for the energy functionals.
pub const DEFAULT_ORDER_CAP: usize = 2;

/// Hard limit on the cap: jets of `1/ρ` are carried to third order.
pub const MAX_ORDER: usize = 3;

/// `Ωf = x¹∂₂f − x²∂₁f`.
pub fn apply_omega(f: &ScalarField) -> ScalarField {
    let s = f.spectrum();
    let d1 = s.derivative(Axis::X1).to_field();
    let d2 = s.derivative(Axis::X2).to_field();
    let g = *f.grid();
    let values = (0..g.len())
        .map(|k| {
            let (x1, x2) = g.node(k);
            x1 * d2.values()[k] - x2 * d1.values()[k]
        })
        .collect();
    ScalarField::from_values(g, values).expect("length")
}

/// `Ω̃U = ΩU − U^⊥ = (ΩU₁ + U₂, ΩU₂ − U₁)`.
pub fn apply_omega_tilde(u: &VectorField) -> VectorField {
    VectorField {
        c1: &apply_omega(&u.c1) + &u.c2,
        c2: &apply_omega(&u.c2) - &u.c1,
    }
}

/// `r∂r f = x¹∂₁f + x²∂₂f`.
pub fn apply_r_dr(f: &ScalarField) -> ScalarField {
    let s = f.spectrum();
    let d1 = s.derivative(Axis::X1).to_field();
    let d2 = s.derivative(Axis::X2).to_field();
    let g = *f.grid();
    let values = (0..g.len())
        .map(|k| {
            let (x1, x2) = g.node(k);
            x1 * d1.values()[k] + x2 * d2.values()[k]
        })
        .collect();
    ScalarField::from_values(g, values).expect("length")
}

/// Letters of the ordered word `Z^{a_z}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ZLetter {
    Dt,
    D1,
    D2,
    Omega,
}

impl ZLetter {
    pub const ALL: [ZLetter; 4] = [ZLetter::Dt, ZLetter::D1, ZLetter::D2, ZLetter::Omega];
}

/// `Γ^a = S^{s_count} Z_{w₀} Z_{w₁} ⋯` (the last letter acts first).
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MultiIndex {
    pub s_count: usize,
    pub z_word: Vec<ZLetter>,
}

impl MultiIndex {
    pub fn order(&self) -> usize {
        self.s_count + self.z_word.len()
    }

    /// Every index with `|a| ≤ m`.
    pub fn all_up_to(m: usize) -> Vec<MultiIndex> {
        let mut words: Vec<Vec<ZLetter>> = vec![vec![]];
        let mut frontier = words.clone();
        for _ in 0..m {
            let mut next = Vec::new();
            for w in &frontier {
                for l in ZLetter::ALL {
                    let mut v = vec![l];
                    v.extend_from_slice(w);
                    next.push(v);
                }
            }
            words.extend(next.iter().cloned());
            frontier = next;
        }
        let mut out = Vec::new();
        for w in words {
            for s in 0..=(m - w.len()) {
                out.push(MultiIndex {
                    s_count: s,
                    z_word: w.clone(),
                });
            }
        }
        out
    }
}

/// A scalar field with time derivatives `levels[k] = ∂t^k f` at time `t`.
#[derive(Clone, Debug)]
pub struct ScalarJet {
    pub levels: Vec<ScalarField>,
    pub t: f64,
}

/// A vector field with its time derivatives.
#[derive(Clone, Debug)]
pub struct VectorJet {
    pub levels: Vec<VectorField>,
    pub t: f64,
}

impl ScalarJet {
    /// A field with no time information; only usable by `S` at `t = 0`.
    pub fn spatial(f: ScalarField, t: f64) -> Self {
        Self { levels: vec![f], t }
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn value(&self) -> &ScalarField {
        &self.levels[0]
    }

    fn map(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self {
        Self {
            levels: self.levels.iter().map(f).collect(),
            t: self.t,
        }
    }

    pub fn dt(&self) -> Result<Self> {
        if self.depth() == 0 {
            return Err(Error::NotClosed("∂t of a field without a substituted time derivative"));
        }
        Ok(Self {
            levels: self.levels[1..].to_vec(),
            t: self.t,
        })
    }

    pub fn apply(&self, letter: ZLetter) -> Result<Self> {
        Ok(match letter {
            ZLetter::Dt => self.dt()?,
            ZLetter::D1 => self.map(|f| f.spectrum().derivative(Axis::X1).to_field()),
            ZLetter::D2 => self.map(|f| f.spectrum().derivative(Axis::X2).to_field()),
            ZLetter::Omega => self.map(apply_omega),
        })
    }

    /// `S = t∂t + r∂r`.
    pub fn apply_s(&self) -> Result<Self> {
        let t = self.t;
        if self.depth() == 0 {
            if t != 0.0 {
                return Err(Error::NotClosed("S needs ∂t of its argument when t ≠ 0"));
            }
            return Ok(self.map(apply_r_dr));
        }
        let levels = (0..self.depth())
            .map(|j| {
                let rdr = apply_r_dr(&self.levels[j]);
                let next = &self.levels[j + 1];
                let cur = &self.levels[j];
                let jf = j as f64;
                let mut out = rdr;
                for (k, v) in out.values_mut().iter_mut().enumerate() {
                    *v += t * next.values()[k] + jf * cur.values()[k];
                }
                out
            })
            .collect();
        Ok(Self { levels, t })
    }
}

impl VectorJet {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn value(&self) -> &VectorField {
        &self.levels[0]
    }

    fn components(&self) -> (ScalarJet, ScalarJet) {
        (
            ScalarJet {
                levels: self.levels.iter().map(|v| v.c1.clone()).collect(),
                t: self.t,
            },
            ScalarJet {
                levels: self.levels.iter().map(|v| v.c2.clone()).collect(),
                t: self.t,
            },
        )
    }

    fn from_components(a: ScalarJet, b: ScalarJet) -> Self {
        Self {
            t: a.t,
            levels: a
                .levels
                .into_iter()
                .zip(b.levels)
                .map(|(c1, c2)| VectorField { c1, c2 })
                .collect(),
        }
    }

    /// `Γ̃` letters: `Ω` acts as `Ω̃`, the others componentwise.
    pub fn apply(&self, letter: ZLetter) -> Result<Self> {
        if letter == ZLetter::Omega {
            return Ok(Self {
                levels: self.levels.iter().map(apply_omega_tilde).collect(),
                t: self.t,
            });
        }
        let (a, b) = self.components();
        Ok(Self::from_components(a.apply(letter)?, b.apply(letter)?))
    }

    pub fn apply_s(&self) -> Result<Self> {
        let (a, b) = self.components();
        Ok(Self::from_components(a.apply_s()?, b.apply_s()?))
    }
}

/// The unknowns on which vector fields can act.
#[derive(Clone, Debug)]
pub struct FieldBundle {
    pub sigma: ScalarJet,
    pub u: VectorJet,
    pub curl: ScalarJet,
    pub w: ScalarJet,
}

impl FieldBundle {
    /// Builds jets of `σ`, `u`, `curl u` and `w = curl u/ρ` to the given depth.
    pub fn new(state: &FlowState, eos: &EosSpec, depth: usize, closure: Closure) -> Result<Self> {
        if depth > MAX_ORDER {
            return Err(Error::OrderTooLarge {
                requested: depth,
                cap: MAX_ORDER,
                reason: "jets of 1/rho are carried to third order",
            });
        }
        let jet = StateJet::new(state, eos, depth, closure);
        let curl: Vec<ScalarField> = jet.u.iter().map(curl2d).collect();

        // (1/ρ)(σ(t)) by Faà di Bruno, then Leibniz for w
        let n = state.grid().len();
        let grid = *state.grid();
        let mut g = vec![vec![0.0; n]; depth + 1];
        for k in 0..n {
            let s0 = jet.sigma[0].values()[k];
            let d = eos.inverse_density_derivatives(s0);
            let s = |j: usize| jet.sigma.get(j).map(|f| f.values()[k]).unwrap_or(0.0);
            g[0][k] = d[0];
            if depth >= 1 {
                g[1][k] = d[1] * s(1);
            }
            if depth >= 2 {
                g[2][k] = d[2] * s(1) * s(1) + d[1] * s(2);
            }
            if depth >= 3 {
                g[3][k] = d[3] * s(1).powi(3) + 3.0 * d[2] * s(1) * s(2) + d[1] * s(3);
            }
        }
        let w: Vec<ScalarField> = (0..=depth)
            .map(|j| {
                let mut acc = vec![0.0; n];
                for i in 0..=j {
                    let c = binomial(j, i) as f64;
                    for (k, a) in acc.iter_mut().enumerate() {
                        *a += c * g[i][k] * curl[j - i].values()[k];
                    }
                }
                ScalarField::from_values(grid, acc).expect("length")
            })
            .collect();
        let t = state.t;
        Ok(Self {
            sigma: ScalarJet {
                levels: jet.sigma,
                t,
            },
            u: VectorJet { levels: jet.u, t },
            curl: ScalarJet { levels: curl, t },
            w: ScalarJet { levels: w, t },
        })
    }

    pub fn apply(&self, letter: ZLetter) -> Result<Self> {
        Ok(Self {
            sigma: self.sigma.apply(letter)?,
            u: self.u.apply(letter)?,
            curl: self.curl.apply(letter)?,
            w: self.w.apply(letter)?,
        })
    }

    pub fn apply_s(&self) -> Result<Self> {
        Ok(Self {
            sigma: self.sigma.apply_s()?,
            u: self.u.apply_s()?,
            curl: self.curl.apply_s()?,
            w: self.w.apply_s()?,
        })
    }

    /// `Γ^a` applied to every unknown.
    pub fn apply_index(&self, index: &MultiIndex) -> Result<Self> {
        let mut cur = self.clone();
        for letter in index.z_word.iter().rev() {
            cur = cur.apply(*letter)?;
        }
        for _ in 0..index.s_count {
            cur = cur.apply_s()?;
        }
        Ok(cur)
    }
}

/// `S` applied to `σ` (or `Γ^aσ`) with `∂t` substituted from the equations.
pub fn apply_s_sigma(state: &FlowState, eos: &EosSpec, index: &MultiIndex) -> Result<ScalarField> {
    let b = FieldBundle::new(state, eos, index.order() + 1, Closure::Full)?;
    Ok(b.apply_index(index)?.apply_s()?.sigma.levels[0].clone())
}

/// `S` applied to `u` (or `Γ̃^a u`).
pub fn apply_s_velocity(state: &FlowState, eos: &EosSpec, index: &MultiIndex) -> Result<VectorField> {
    let b = FieldBundle::new(state, eos, index.order() + 1, Closure::Full)?;
    Ok(b.apply_index(index)?.apply_s()?.u.levels[0].clone())
}

/// Values of the weighted functionals at one time. Index `m` of each list
/// holds the functional of order `m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub t: f64,
    pub m_max: usize,
    pub energy: Vec<f64>,
    pub cone: Vec<f64>,
    pub w: Vec<f64>,
    pub curl: Vec<f64>,
    pub curl_lp: Vec<f64>,
    pub w_lp: Vec<f64>,
    pub ghost_flux: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct NormOptions {
    pub cap: usize,
    pub closure: Closure,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_ORDER_CAP,
            closure: Closure::Full,
        }
    }
}

fn tuple_norm(parts: &[&ScalarField], weight: Option<&[f64]>, p: f64) -> f64 {
    let g = parts[0].grid();
    let n = g.len();
    let mut s = 0.0;
    for k in 0..n {
        let mut m2 = 0.0;
        for f in parts {
            let v = f.values()[k];
            m2 += v * v;
        }
        let mut m = m2.sqrt();
        if let Some(w) = weight {
            m *= w[k];
        }
        s += m.powf(p);
    }
    (g.cell_area() * s).powf(1.0 / p)
}

fn radial_weight(grid: &Grid, power: f64) -> Vec<f64> {
    (0..grid.len()).map(|k| japanese(grid.radius(k)).powf(power)).collect()
}

/// All functionals with `Γ̃` on `u` and `Γ` on `σ`, `curl u` and `w`.
pub fn energy_report(state: &FlowState, eos: &EosSpec, m_max: usize) -> Result<NormReport> {
    energy_report_with(state, eos, m_max, &NormOptions::default())
}

pub fn energy_report_with(state: &FlowState, eos: &EosSpec, m_max: usize, opts: &NormOptions) -> Result<NormReport> {
    let cap = opts.cap.min(MAX_ORDER);
    if m_max > cap {
        return Err(Error::OrderTooLarge {
            requested: m_max,
            cap,
            reason: "each order adds a nested time-derivative substitution and a spectral derivative of a weighted field",
        });
    }
    let grid = *state.grid();
    let t = state.t;
    let base = FieldBundle::new(state, eos, m_max, opts.closure)?;
    let w1 = radial_weight(&grid, 1.0);
    let w8 = radial_weight(&grid, 8.0);
    let cone: Vec<f64> = (0..grid.len()).map(|k| japanese(grid.radius(k) - t)).collect();

    let mut by_order = vec![[0.0f64; 6]; m_max + 1];
    // depth-first over Z-words, then S on top
    let mut stack: Vec<(FieldBundle, usize)> = vec![(base, 0)];
    while let Some((bundle, len)) = stack.pop() {
        let mut cur = bundle.clone();
        for s in 0..=(m_max - len) {
            if s > 0 {
                cur = cur.apply_s()?;
            }
            let order = len + s;
            let acc = &mut by_order[order];
            let (u0, s0) = (&cur.u.levels[0], &cur.sigma.levels[0]);
            acc[0] += tuple_norm(&[&u0.c1, &u0.c2, s0], None, 2.0);
            if order < m_max {
                let ut = &cur.u.levels[1];
                let st = &cur.sigma.levels[1];
                let divu = div2d(u0);
                let sg = s0.spectrum();
                let s1 = sg.derivative(Axis::X1).to_field();
                let s2 = sg.derivative(Axis::X2).to_field();
                acc[1] += tuple_norm(&[&ut.c1, &ut.c2, &divu, &s1, &s2, st], Some(&cone), 2.0);
            }
            let wv = &cur.w.levels[0];
            let cv = &cur.curl.levels[0];
            acc[2] += tuple_norm(&[wv], Some(&w1), 2.0);
            acc[3] += tuple_norm(&[cv], Some(&w1), 2.0);
            acc[4] += lp_family(cv, &w1, &w8);
            acc[5] += lp_family(wv, &w1, &w8);
        }
        if len < m_max {
            for l in ZLetter::ALL {
                stack.push((bundle.apply(l)?, len + 1));
            }
        }
    }

    let cumulative = |col: usize, shift: usize| -> Vec<f64> {
        (0..=m_max)
            .map(|m| {
                if m < shift {
                    0.0
                } else {
                    by_order[..=(m - shift)].iter().map(|r| r[col]).sum()
                }
            })
            .collect()
    };
    Ok(NormReport {
        t,
        m_max,
        energy: cumulative(0, 0),
        cone: cumulative(1, 1),
        w: cumulative(2, 0),
        curl: cumulative(3, 0),
        curl_lp: cumulative(4, 0),
        w_lp: cumulative(5, 0),
        ghost_flux: ghost_flux(state),
    })
}

/// `‖⟨x⟩⁸f‖_{L⁵} + Σ_{p ∈ {10/9, 10/7}} ‖⟨x⟩f‖_{Lᵖ}`.
fn lp_family(f: &ScalarField, w1: &[f64], w8: &[f64]) -> f64 {
    tuple_norm(&[f], Some(w8), 5.0) + tuple_norm(&[f], Some(w1), 10.0 / 9.0) + tuple_norm(&[f], Some(w1), 10.0 / 7.0)
}

/// `ω = x/|x|`, set to zero on nodes with `|x| < h/2`.
pub fn radial_direction(grid: &Grid) -> VectorField {
    let h = grid.spacing();
    VectorField::from_fn(*grid, |x1, x2| {
        let r = x1.hypot(x2);
        if r < 0.5 * h {
            (0.0, 0.0)
        } else {
            (x1 / r, x2 / r)
        }
    })
}

/// `g = u − ωσ`.
pub fn good_unknown(state: &FlowState) -> VectorField {
    let omega = radial_direction(state.grid());
    VectorField {
        c1: &state.u.c1 - &(&omega.c1 * &state.sigma),
        c2: &state.u.c2 - &(&omega.c2 * &state.sigma),
    }
}

/// Radius below which `ω`-based quantities are unreliable.
pub fn unreliable_radius(grid: &Grid) -> f64 {
    4.0 * grid.spacing()
}

// ---------------------------------------------------------------- ghost weight

/// `(1 + τ²)^{-3/4}` after `τ = sinh v`.
fn ghost_integrand_v(v: f64) -> f64 {
    v.cosh().powf(-0.5)
}

fn simpson_adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

const GHOST_V_CUT: f64 = 90.0;

/// `q(s) = ∫_{−∞}^{s} ⟨τ⟩^{−3/2} dτ` by adaptive quadrature.
pub fn ghost_q_quadrature(s: f64) -> f64 {
    let upper = s.asinh();
    // ∫_{−∞}^{−V} cosh^{−1/2} ≈ 2√2 e^{−V/2}
    let tail = 2.0 * 2f64.sqrt() * (-0.5 * GHOST_V_CUT).exp();
    if upper <= -GHOST_V_CUT {
        return 2.0 * 2f64.sqrt() * (0.5 * upper).exp();
    }
    tail + simpson_adaptive(&ghost_integrand_v, -GHOST_V_CUT, upper, 1e-15)
}

/// `∫_ℝ ⟨τ⟩^{−3/2} dτ`.
pub fn ghost_total() -> f64 {
    static TOTAL: Lazy<f64> = Lazy::new(|| 2.0 * ghost_q_quadrature(0.0));
    *TOTAL
}

const GHOST_TABLE_HALF: f64 = 64.0;
const GHOST_TABLE_STEP: f64 = 2.5e-4;

static GHOST_TABLE: Lazy<Vec<f64>> = Lazy::new(|| {
    let n = (2.0 * GHOST_TABLE_HALF / GHOST_TABLE_STEP).round() as usize;
    // 4-point Gauss–Legendre on each cell
    let nodes = [
        (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
        (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
        (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
        (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    ];
    let f = |tau: f64| (1.0 + tau * tau).powf(-0.75);
    let mut table = Vec::with_capacity(n + 1);
    let mut q = ghost_q_quadrature(-GHOST_TABLE_HALF);
    table.push(q);
    for i in 0..n {
        let a = -GHOST_TABLE_HALF + i as f64 * GHOST_TABLE_STEP;
        let mid = a + 0.5 * GHOST_TABLE_STEP;
        let half = 0.5 * GHOST_TABLE_STEP;
        q += nodes.iter().map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half;
        table.push(q);
    }
    table
});

/// Ghost-weight exponent `q(s)`: tabulated with linear interpolation on
/// `|s| ≤ 64`, direct quadrature outside.
pub fn ghost_q(s: f64) -> f64 {
    if s <= -GHOST_TABLE_HALF {
        return ghost_q_quadrature(s);
    }
    if s >= GHOST_TABLE_HALF {
        return ghost_total() - ghost_q_quadrature(-s);
    }
    let table = &*GHOST_TABLE;
    let x = (s + GHOST_TABLE_HALF) / GHOST_TABLE_STEP;
    let i = (x.floor() as usize).min(table.len() - 2);
    let frac = x - i as f64;
    table[i] + frac * (table[i + 1] - table[i])
}

/// The ghost weight `e^{q(s)}`.
pub fn ghost_weight(s: f64) -> f64 {
    ghost_q(s).exp()
}

/// Good-direction flux density at fixed `t`, order zero:
/// `Σᵢ ∫ e^{q(|x|−t)} |uᵢ − ωᵢσ|² ⟨|x|−t⟩^{−3/2} dx`.
pub fn ghost_flux(state: &FlowState) -> f64 {
    let g = good_unknown(state);
    let grid = *state.grid();
    let t = state.t;
    let mut acc = 0.0;
    for k in 0..grid.len() {
        let s = grid.radius(k) - t;
        let mag2 = g.c1.values()[k].powi(2) + g.c2.values()[k].powi(2);
        acc += ghost_weight(s) * mag2 * japanese(s).powf(-1.5);
    }
    grid.cell_area() * acc
}

// ---------------------------------------------------------------- profiles

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    /// Exponent on `⟨|x|⟩`.
    pub spatial_power: f64,
    /// Exponent on `⟨|x| − t⟩`.
    pub cone_power: f64,
    pub p: f64,
}

impl WeightSpec {
    pub const ALLOWED_P: [f64; 4] = [10.0 / 9.0, 10.0 / 7.0, 2.0, 5.0];

    pub fn new(spatial_power: f64, cone_power: f64, p: f64) -> Result<Self> {
        if !Self::ALLOWED_P.iter().any(|q| (q - p).abs() < 1e-12) {
            return Err(Error::Config(format!("Lebesgue exponent {p} is not one of 10/9, 10/7, 2, 5")));
        }
        if !(spatial_power.is_finite() && cone_power.is_finite()) {
            return Err(Error::Config("weight powers must be finite".into()));
        }
        Ok(Self {
            spatial_power,
            cone_power,
            p,
        })
    }

    pub fn sup_only(spatial_power: f64, cone_power: f64) -> Self {
        Self {
            spatial_power,
            cone_power,
            p: 2.0,
        }
    }
}

/// One row of a decay profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub radius: f64,
    pub weighted_sup: f64,
}

/// Pointwise magnitude of a vector field.
pub fn magnitude(u: &VectorField) -> ScalarField {
    u.c1.zip_map(&u.c2, f64::hypot)
}

/// Per annulus of width `width`, `max ⟨|x|⟩^β ⟨|x|−t⟩^γ |f|`. Nodes inside
/// the unreliable core `|x| < 4h` are skipped; annuli reach the inscribed
/// circle `|x| < L`.
pub fn decay_profile(f: &ScalarField, t: f64, weight: &WeightSpec, width: f64) -> Result<Vec<ProfileRow>> {
    let grid = *f.grid();
    if width < 2.0 * grid.spacing() {
        return Err(Error::Config(format!(
            "annulus width {width} is below two grid spacings ({})",
            2.0 * grid.spacing()
        )));
    }
    let bins = (grid.half_width() / width).floor() as usize;
    let mut sup = vec![0.0f64; bins];
    let core = unreliable_radius(&grid);
    for k in 0..grid.len() {
        let r = grid.radius(k);
        if r < core {
            continue;
        }
        let b = (r / width) as usize;
        if b >= bins {
            continue;
        }
        let v = japanese(r).powf(weight.spatial_power) * japanese(r - t).powf(weight.cone_power) * f.values()[k].abs();
        sup[b] = sup[b].max(v);
    }
    Ok(sup
        .into_iter()
        .enumerate()
        .map(|(b, s)| ProfileRow {
            radius: (b as f64 + 0.5) * width,
            weighted_sup: s,
        })
        .collect())
}

// ---------------------------------------------------------------- data size

/// Initial-data size functionals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSize {
    pub eps: f64,
    pub delta: f64,
    /// Largest `|x|` where the data exceed `1e-12` of their maximum.
    pub support_radius: f64,
}

/// Relative level below which spectral derivatives are treated as rounding
/// before the polynomial weights are applied.
const ROUNDING_FLOOR: f64 = 1e-13;

/// Multiple of the expected rounding noise treated as noise; covers the
/// largest of `n²` roughly Gaussian samples.
const NOISE_SAFETY: f64 = 30.0;

/// Expected size of rounding noise in `∂^q f` for `|f| ≤ amplitude`: the
/// white noise `ε · amplitude` of a stored field, spread over all modes and
/// multiplied by `|k|^q`.
fn rounding_noise(grid: &Grid, amplitude: f64, order: usize) -> f64 {
    let n = grid.n();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let k = grid.wavenumber(grid.mode(i)).hypot(grid.wavenumber(grid.mode(j)));
            acc += k.powi(2 * order as i32);
        }
    }
    NOISE_SAFETY * f64::EPSILON * amplitude * (acc / (n * n) as f64).sqrt()
}

/// Plain derivative `∂^β f` with values below the larger of `floor` and the
/// relative rounding floor zeroed.
fn clean(s: &crate::spectral::Spectrum, floor: f64) -> ScalarField {
    let f = s.to_field();
    let floor = (ROUNDING_FLOOR * f.max_abs()).max(floor);
    f.map(|v| if v.abs() < floor { 0.0 } else { v })
}

/// Largest `k` for which `(⟨x⟩∇)^k` is expanded in closed form.
pub const MAX_WEIGHTED_ORDER: usize = 3;

/// `(⟨x⟩∇)^k f` for `k = 0..=k_max`: level `k` holds all `2^k` ordered
/// compositions `⟨x⟩∂_a(⟨x⟩∂_b(⋯ f))`, innermost index slowest, expanded with the exact derivatives
/// of `w = ⟨x⟩` so no weighted field is ever differentiated numerically:
///
/// ```text
/// w∂_b(w f_c)               = w w_b f_c + w² f_bc
/// w∂_a(w∂_b(w f_c))         = w(w_a w_b + w w_ab) f_c + w² w_b f_ac + 2w² w_a f_bc + w³ f_abc
/// ```
fn weighted_gradient_tree(f: &ScalarField, k_max: usize, floors: &[f64]) -> Result<Vec<Vec<ScalarField>>> {
    if k_max > MAX_WEIGHTED_ORDER {
        return Err(Error::OrderTooLarge {
            requested: k_max,
            cap: MAX_WEIGHTED_ORDER,
            reason: "weighted derivatives are expanded in closed form up to third order",
        });
    }
    let grid = *f.grid();
    let n = grid.len();
    let s = f.spectrum();
    let ax = [Axis::X1, Axis::X2];
    let d1: Vec<_> = ax.iter().map(|&a| s.derivative(a)).collect();
    let amplitude = f.max_abs();
    let refs = |q: usize| floors.get(q).copied().unwrap_or(0.0).max(rounding_noise(&grid, amplitude, q));
    let f1: Vec<ScalarField> = d1.iter().map(|d| clean(d, refs(1))).collect();
    let mut f2 = vec![vec![]; 2];
    let mut f3 = vec![vec![vec![]; 2]; 2];
    if k_max >= 2 {
        for a in 0..2 {
            for b in 0..2 {
                let dab = d1[b].derivative(ax[a]);
                f2[a].push(clean(&dab, refs(2)));
                if k_max >= 3 {
                    for c in 0..2 {
                        f3[a][b].push(clean(&dab.derivative(ax[c]), refs(3)));
                    }
                }
            }
        }
    }
    let pts: Vec<(f64, f64)> = (0..n).map(|k| grid.node(k)).collect();
    let w = |k: usize| japanese(pts[k].0.hypot(pts[k].1));
    let wi = |k: usize, i: usize| {
        let x = [pts[k].0, pts[k].1];
        x[i] / w(k)
    };
    let wij = |k: usize, i: usize, j: usize| {
        let d = if i == j { 1.0 } else { 0.0 };
        (d - wi(k, i) * wi(k, j)) / w(k)
    };
    let build = |g: &dyn Fn(usize) -> f64| ScalarField::from_values(grid, (0..n).map(g).collect()).expect("length");

    let f0 = clean(&s, refs(0));
    let mut levels = vec![vec![f0]];
    if k_max >= 1 {
        levels.push((0..2).map(|c| build(&|k| w(k) * f1[c].values()[k])).collect());
    }
    if k_max >= 2 {
        let mut lvl = Vec::new();
        for c in 0..2 {
            for b in 0..2 {
                lvl.push(build(&|k| {
                    let wk = w(k);
                    wk * wi(k, b) * f1[c].values()[k] + wk * wk * f2[b][c].values()[k]
                }));
            }
        }
        levels.push(lvl);
    }
    if k_max >= 3 {
        let mut lvl = Vec::new();
        for c in 0..2 {
            for b in 0..2 {
                for a in 0..2 {
                    lvl.push(build(&|k| {
                        let wk = w(k);
                        wk * (wi(k, a) * wi(k, b) + wk * wij(k, a, b)) * f1[c].values()[k]
                            + wk * wk * wi(k, b) * f2[a][c].values()[k]
                            + 2.0 * wk * wk * wi(k, a) * f2[b][c].values()[k]
                            + wk * wk * wk * f3[a][b][c].values()[k]
                    }));
                }
            }
        }
        levels.push(lvl);
    }
    Ok(levels)
}

/// Shifts a periodic inverse Laplacian (mean free) by the constant that makes
/// it vanish on average along the box edge, where the whole-plane potential
/// of compactly supported data is `O(1/L)`.
fn decaying_gauge(f: &ScalarField) -> ScalarField {
    let n = f.grid().n();
    let edge: f64 = (0..n).map(|k| f.at(k, 0) + f.at(0, k)).sum::<f64>() - f.at(0, 0);
    let c = edge / (2 * n - 1) as f64;
    f.map(|v| v - c)
}

fn tree_sum(trees: &[&Vec<Vec<ScalarField>>], weight: &[f64], p: f64) -> f64 {
    let k_max = trees[0].len() - 1;
    (0..=k_max)
        .map(|k| {
            let parts: Vec<&ScalarField> = trees.iter().flat_map(|t| t[k].iter()).collect();
            tuple_norm(&parts, Some(weight), p)
        })
        .sum()
}

fn support_radius(fields: &[&ScalarField]) -> f64 {
    let max = fields.iter().map(|f| f.max_abs()).fold(0.0, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    let grid = *fields[0].grid();
    let mut r = 0.0f64;
    for f in fields {
        for (k, v) in f.values().iter().enumerate() {
            if v.abs() > 1e-12 * max {
                r = r.max(grid.radius(k));
            }
        }
    }
    r
}

/// `ε` and `δ` of initial data with every derivative count truncated at
/// `k_max`. `rho0` is the density perturbation about `ρ̄ = 1`.
pub fn eps_delta_functionals(rho0: &ScalarField, u0: &VectorField, k_max: usize) -> Result<DataSize> {
    let grid = *rho0.grid();
    rho0.ensure_finite("rho0")?;
    u0.ensure_finite("u0")?;
    let sigma0 = rho0.map(|r| r / (r + 1.0));
    sigma0.ensure_finite("rho0/(rho0+1)")?;
    let radius = support_radius(&[rho0, &u0.c1, &u0.c2]);
    if radius > 0.5 * grid.half_width() {
        warn!(
            "initial data extend to |x| = {radius:.3} beyond L/2 = {:.3}; weighted functionals see the periodic wrap",
            0.5 * grid.half_width()
        );
    }

    // curl u is a difference of derivatives of u: its rounding noise is that
    // of u one order up
    let u_max = u0.c1.max_abs().max(u0.c2.max_abs());
    let curl_refs: Vec<f64> = (0..=k_max).map(|q| rounding_noise(&grid, u_max, q + 1)).collect();
    let curl = clean(&curl2d(u0).spectrum(), curl_refs[0]);
    let phi = decaying_gauge(&crate::spectral::inv_laplacian(&div2d(u0))?);
    let a = {
        let v = VectorField {
            c1: &u0.c1 * &curl,
            c2: &u0.c2 * &curl,
        };
        let s = v.c2.spectrum().dealias().derivative(Axis::X1).sub(&v.c1.spectrum().dealias().derivative(Axis::X2));
        decaying_gauge(&s.inv_laplacian().to_field())
    };

    let t_u1 = weighted_gradient_tree(&u0.c1, k_max, &[])?;
    let t_u2 = weighted_gradient_tree(&u0.c2, k_max, &[])?;
    let t_s = weighted_gradient_tree(&sigma0, k_max, &[])?;
    let t_phi = weighted_gradient_tree(&phi, k_max, &[])?;
    let t_a = weighted_gradient_tree(&a, k_max, &[])?;
    let t_curl = weighted_gradient_tree(&curl, k_max, &curl_refs)?;

    let one = vec![1.0; grid.len()];
    let w1 = radial_weight(&grid, 1.0);
    let w2 = radial_weight(&grid, 2.0);
    let w8 = radial_weight(&grid, 8.0);

    let eps = tree_sum(&[&t_u1, &t_u2, &t_s], &one, 2.0)
        + tree_sum(&[&t_phi], &w2, 1.0)
        + tree_sum(&[&t_a, &t_u1, &t_u2, &t_s], &w2, 1.0);
    let delta = tree_sum(&[&t_curl], &w1, 2.0)
        + tree_sum(&[&t_curl], &w8, 10.0 / 9.0)
        + tree_sum(&[&t_curl], &w8, 10.0 / 7.0)
        + tree_sum(&[&t_curl], &w8, 5.0);
    Ok(DataSize {
        eps,
        delta,
        support_radius: radius,
    })
}

/// `‖⟨x⟩^β ∇U‖_p / (‖⟨x⟩^β div U‖_p + ‖⟨x⟩^β curl U‖_p)`.
pub fn div_curl_ratio(u: &VectorField, p: f64, beta: f64) -> f64 {
    let grid = *u.grid();
    let w = radial_weight(&grid, beta);
    let g1 = crate::spectral::gradient(&u.c1);
    let g2 = crate::spectral::gradient(&u.c2);
    let num = tuple_norm(&[&g1.c1, &g1.c2, &g2.c1, &g2.c2], Some(&w), p);
    let den = tuple_norm(&[&div2d(u)], Some(&w), p) + tuple_norm(&[&curl2d(u)], Some(&w), p);
    num / den
}
