//! Fourier-exact solutions of `∂t²φ − Δφ = F` on the periodic box and
//! weighted pointwise ratios probing decay estimates.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{japanese, Axis, Grid, ScalarField, Spectrum};

/// Source term `F(s, ·)`; `None` when no snapshot exists at `s`.
pub trait Forcing: Send + Sync {
    fn snapshot(&self, s: f64) -> Option<ScalarField>;
}

impl<F> Forcing for F
where
    F: Fn(f64) -> ScalarField + Send + Sync,
{
    fn snapshot(&self, s: f64) -> Option<ScalarField> {
        Some(self(s))
    }
}

/// Forcing known only at stored times.
#[derive(Clone, Debug)]
pub struct SnapshotTable {
    times: Vec<f64>,
    fields: Vec<ScalarField>,
}

impl SnapshotTable {
    pub fn new(times: Vec<f64>, fields: Vec<ScalarField>) -> Result<Self> {
        if times.len() != fields.len() {
            return Err(Error::InsufficientSnapshots(format!(
                "{} times for {} fields",
                times.len(),
                fields.len()
            )));
        }
        Ok(Self { times, fields })
    }
}

impl Forcing for SnapshotTable {
    fn snapshot(&self, s: f64) -> Option<ScalarField> {
        let tol = 1e-12 * (1.0 + s.abs());
        self.times.iter().position(|&t| (t - s).abs() <= tol).map(|k| self.fields[k].clone())
    }
}

#[derive(Clone)]
pub struct WaveData {
    pub phi0: ScalarField,
    pub phi1: ScalarField,
    pub forcing: Option<Arc<dyn Forcing>>,
}

impl std::fmt::Debug for WaveData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WaveData")
            .field("grid", self.phi0.grid())
            .field("forcing", &self.forcing.is_some())
            .finish()
    }
}

/// Relative size allowed outside `|x| ≤ L/4`.
const SUPPORT_TOL: f64 = 1e-12;

fn check_support(f: &ScalarField) -> Result<()> {
    let g = f.grid();
    let max = f.max_abs();
    let outside = f
        .values()
        .iter()
        .enumerate()
        .filter(|(k, _)| g.radius(*k) > 0.25 * g.half_width())
        .fold(0.0f64, |m, (_, v)| m.max(v.abs()));
    if outside > SUPPORT_TOL * max {
        return Err(Error::Config(format!(
            "Cauchy data reach {outside:e} (max {max:e}) outside |x| <= L/4 = {}",
            0.25 * g.half_width()
        )));
    }
    Ok(())
}

impl WaveData {
    pub fn new(phi0: ScalarField, phi1: ScalarField) -> Result<Self> {
        if phi0.grid() != phi1.grid() {
            return Err(Error::GridMismatch(phi0.grid().n(), phi1.grid().n()));
        }
        phi0.ensure_finite("phi0")?;
        phi1.ensure_finite("phi1")?;
        Ok(Self {
            phi0,
            phi1,
            forcing: None,
        })
    }

    /// Zero Cauchy data with a source.
    pub fn forced(grid: Grid, forcing: Arc<dyn Forcing>) -> Self {
        Self {
            phi0: ScalarField::zeros(grid),
            phi1: ScalarField::zeros(grid),
            forcing: Some(forcing),
        }
    }

    pub fn with_forcing(mut self, forcing: Arc<dyn Forcing>) -> Self {
        self.forcing = Some(forcing);
        self
    }

    pub fn grid(&self) -> &Grid {
        self.phi0.grid()
    }
}

fn modulus(g: &Grid, m1: i64, m2: i64) -> f64 {
    g.wavenumber(m1).hypot(g.wavenumber(m2))
}

/// `cos(|k|t)` and `sin(|k|t)/|k|` (limit `t` at `k = 0`).
fn propagators(k: f64, t: f64) -> (f64, f64) {
    if k == 0.0 {
        (1.0, t)
    } else {
        ((k * t).cos(), (k * t).sin() / k)
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Config(format!("time must be finite and non-negative, got {t}")));
    }
    Ok(())
}

/// `φ̂(t) = cos(|k|t)φ̂₀ + sin(|k|t)/|k| φ̂₁`.
pub fn wave_solve_hom(data: &WaveData, t: f64) -> Result<ScalarField> {
    check_time(t)?;
    let g = *data.grid();
    let a = data.phi0.spectrum().apply(|m1, m2| Complex64::new(propagators(modulus(&g, m1, m2), t).0, 0.0));
    let b = data.phi1.spectrum().apply(|m1, m2| Complex64::new(propagators(modulus(&g, m1, m2), t).1, 0.0));
    Ok(a.add(&b).to_field())
}

/// `∂tφ_hom(t)`.
pub fn wave_velocity_hom(data: &WaveData, t: f64) -> Result<ScalarField> {
    check_time(t)?;
    let g = *data.grid();
    let a = data.phi0.spectrum().apply(|m1, m2| {
        let k = modulus(&g, m1, m2);
        Complex64::new(-k * (k * t).sin(), 0.0)
    });
    let b = data.phi1.spectrum().apply(|m1, m2| {
        let k = modulus(&g, m1, m2);
        Complex64::new((k * t).cos(), 0.0)
    });
    Ok(a.add(&b).to_field())
}

/// `½∫((∂tφ)² + |∇φ|²)` of the homogeneous solution.
pub fn wave_energy_hom(data: &WaveData, t: f64) -> Result<f64> {
    let phi = wave_solve_hom(data, t)?;
    let v = wave_velocity_hom(data, t)?;
    let s = phi.spectrum();
    let g1 = s.derivative(Axis::X1).to_field();
    let g2 = s.derivative(Axis::X2).to_field();
    Ok(0.5 * (v.l2_norm_sq() + g1.l2_norm_sq() + g2.l2_norm_sq()))
}

/// Times `s_j = j t / n_sub` at which [`duhamel_inh`] samples the forcing.
pub fn duhamel_times(t: f64, n_sub: usize) -> Vec<f64> {
    (0..=n_sub).map(|j| t * j as f64 / n_sub as f64).collect()
}

/// `φ̂_inh(t) = ∫₀ᵗ sin(|k|(t−s))/|k| F̂(s) ds` by composite Simpson with
/// `n_sub` (even) panels.
pub fn duhamel_inh(data: &WaveData, t: f64, n_sub: usize) -> Result<ScalarField> {
    check_time(t)?;
    if n_sub < 2 || !n_sub.is_multiple_of(2) {
        return Err(Error::Config(format!("Simpson needs an even panel count >= 2, got {n_sub}")));
    }
    let g = *data.grid();
    let forcing = data
        .forcing
        .as_ref()
        .ok_or_else(|| Error::InsufficientSnapshots("no forcing attached".into()))?;
    let h = t / n_sub as f64;
    let mut acc: Option<Spectrum> = None;
    for (j, s) in duhamel_times(t, n_sub).into_iter().enumerate() {
        let w = if j == 0 || j == n_sub {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let f = forcing
            .snapshot(s)
            .ok_or_else(|| Error::InsufficientSnapshots(format!("forcing unavailable at s = {s}")))?;
        if f.grid() != &g {
            return Err(Error::GridMismatch(g.n(), f.grid().n()));
        }
        f.ensure_finite("forcing")?;
        let term = f.spectrum().apply(|m1, m2| {
            let k = modulus(&g, m1, m2);
            Complex64::new(w * h / 3.0 * propagators(k, t - s).1, 0.0)
        });
        acc = Some(match acc {
            None => term,
            Some(a) => a.add(&term),
        });
    }
    Ok(acc.expect("at least three nodes").to_field())
}

/// The weighted ratios need Cauchy data negligible outside `|x| ≤ L/4` and
/// times up to `L/2`.
fn validate_probe(data: &WaveData, t_list: &[f64]) -> Result<()> {
    check_support(&data.phi0)?;
    check_support(&data.phi1)?;
    let g = data.grid();
    if t_list.is_empty() {
        return Err(Error::Config("empty time list".into()));
    }
    for &t in t_list {
        check_time(t)?;
        if t > 0.5 * g.half_width() {
            return Err(Error::Config(format!(
                "t = {t} exceeds L/2 = {}; the periodic images would enter the cone weights",
                0.5 * g.half_width()
            )));
        }
    }
    Ok(())
}

/// `Σ_{|β|≤k} ‖∂^β (⟨y⟩^p f)‖_{L¹}` over unordered multi-indices.
pub fn weighted_w1_norm(f: &ScalarField, power: f64, k: usize) -> f64 {
    let weighted = f.map_with_coords(|x1, x2, v| japanese(x1.hypot(x2)).powf(power) * v);
    let mut total = 0.0;
    let mut level = vec![weighted.spectrum()];
    total += weighted.lp_norm(1.0);
    for _ in 0..k {
        // ∂₁ on the first entry, ∂₂ on every entry: each unordered index once
        let mut next = Vec::with_capacity(level.len() + 1);
        next.push(level[0].derivative(Axis::X1));
        for s in &level {
            next.push(s.derivative(Axis::X2));
        }
        total += next.iter().map(|s| s.to_field().lp_norm(1.0)).sum::<f64>();
        level = next;
    }
    total
}

fn sup_weighted(f: &ScalarField, t: f64, plus: f64, minus: f64, restrict: Option<f64>) -> f64 {
    let g = f.grid();
    let mut sup = 0.0f64;
    for (k, v) in f.values().iter().enumerate() {
        let r = g.radius(k);
        if restrict.is_some_and(|rmax| r > rmax) {
            continue;
        }
        sup = sup.max(japanese(r + t).powf(plus) * japanese(r - t).powf(minus) * v.abs());
    }
    sup
}

/// `sup ⟨|x|+t⟩^{1/2}⟨|x|−t⟩^{1/2}|φ_hom|` over grid and times, over
/// `‖⟨y⟩φ₀‖_{W^{2,1}} + ‖⟨y⟩φ₁‖_{W^{1,1}}`.
pub fn weighted_ratio_hom(data: &WaveData, t_list: &[f64]) -> Result<f64> {
    validate_probe(data, t_list)?;
    let rhs = weighted_w1_norm(&data.phi0, 1.0, 2) + weighted_w1_norm(&data.phi1, 1.0, 1);
    if rhs == 0.0 {
        return Err(Error::ZeroData);
    }
    let mut lhs = 0.0f64;
    for &t in t_list {
        lhs = lhs.max(sup_weighted(&wave_solve_hom(data, t)?, t, 0.5, 0.5, None));
    }
    Ok(lhs / rhs)
}

/// `sup ⟨|x|+t⟩^{1/2}⟨|x|−t⟩^{3/2}|∇φ_hom|` over
/// `‖⟨y⟩²φ₀‖_{W^{3,1}} + ‖⟨y⟩²φ₁‖_{W^{2,1}}`.
pub fn weighted_ratio_grad_hom(data: &WaveData, t_list: &[f64]) -> Result<f64> {
    validate_probe(data, t_list)?;
    let rhs = weighted_w1_norm(&data.phi0, 2.0, 3) + weighted_w1_norm(&data.phi1, 2.0, 2);
    if rhs == 0.0 {
        return Err(Error::ZeroData);
    }
    let mut lhs = 0.0f64;
    for &t in t_list {
        let s = wave_solve_hom(data, t)?.spectrum();
        let d1 = s.derivative(Axis::X1).to_field();
        let d2 = s.derivative(Axis::X2).to_field();
        let mag = d1.zip_map(&d2, f64::hypot);
        lhs = lhs.max(sup_weighted(&mag, t, 0.5, 1.5, None));
    }
    Ok(lhs / rhs)
}

/// Which part of the space-time partition a point belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    /// Near the light cone: `||y| − s| ≤ s/3` and `|y| ≥ 1`.
    Cone,
    Interior,
}

pub fn classify(s: f64, r: f64) -> Region {
    if (r - s).abs() <= s / 3.0 && r >= 1.0 {
        Region::Cone
    } else {
        Region::Interior
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcingFunctional {
    /// Supremum over the interior part with `|y| ≤ 3⟨t⟩`.
    pub interior: f64,
    /// Supremum over the cone part.
    pub cone: f64,
}

impl ForcingFunctional {
    pub fn total(&self) -> f64 {
        self.interior + self.cone
    }
}

/// Weighted suprema of a forcing over snapshot times `times ⊂ [0, t]`
/// (which must start at 0 and end at `t`) and grid nodes:
/// interior `⟨|y|⟩^{3/2}⟨|y|+s⟩^{1+λ}|F|`, cone `⟨s⟩^{3/2+λ}⟨|y|−s⟩|F|`,
/// with `λ = mu_plus_nu`.
pub fn cm_functional(forcing: &dyn Forcing, t: f64, mu_plus_nu: f64, times: &[f64]) -> Result<ForcingFunctional> {
    check_time(t)?;
    let tol = 1e-12 * (1.0 + t);
    match (times.first(), times.last()) {
        (Some(&a), Some(&b)) if a.abs() <= tol && (b - t).abs() <= tol => {}
        _ => {
            return Err(Error::InsufficientSnapshots(format!(
                "snapshot times must cover [0, {t}] from end to end"
            )))
        }
    }
    let r_max = 3.0 * japanese(t);
    let mut out = ForcingFunctional {
        interior: 0.0,
        cone: 0.0,
    };
    for &s in times {
        if s < -tol || s > t + tol {
            return Err(Error::InsufficientSnapshots(format!("snapshot time {s} outside [0, {t}]")));
        }
        let f = forcing
            .snapshot(s)
            .ok_or_else(|| Error::InsufficientSnapshots(format!("forcing unavailable at s = {s}")))?;
        let g = *f.grid();
        for (k, v) in f.values().iter().enumerate() {
            if *v == 0.0 {
                continue;
            }
            let r = g.radius(k);
            match classify(s, r) {
                Region::Cone => {
                    out.cone = out.cone.max(japanese(s).powf(1.5 + mu_plus_nu) * japanese(r - s) * v.abs());
                }
                Region::Interior if r <= r_max => {
                    out.interior = out.interior.max(japanese(r).powf(1.5) * japanese(r + s).powf(1.0 + mu_plus_nu) * v.abs());
                }
                Region::Interior => {}
            }
        }
    }
    Ok(out)
}

/// Exponents of the inhomogeneous probe.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InhExponents {
    pub mu1: f64,
    pub nu: f64,
    pub mu: f64,
}

impl Default for InhExponents {
    fn default() -> Self {
        Self {
            mu1: 0.25,
            nu: 1.0 / 16.0,
            mu: 1.0 / 16.0,
        }
    }
}

/// `sup_{|x| ≤ 2⟨t⟩} ⟨|x|+t⟩^{1/2−μ₁}⟨|x|−t⟩^ν|φ_inh(t)|` over the forcing
/// functional with exponent `μ + ν − μ₁`, both sampled on the Simpson nodes.
pub fn weighted_ratio_inh(data: &WaveData, t: f64, n_sub: usize, e: &InhExponents) -> Result<f64> {
    let phi = duhamel_inh(data, t, n_sub)?;
    let forcing = data.forcing.as_ref().expect("checked by duhamel_inh");
    let m = cm_functional(forcing.as_ref(), t, e.mu + e.nu - e.mu1, &duhamel_times(t, n_sub))?;
    if m.total() == 0.0 {
        return Err(Error::ZeroData);
    }
    let lhs = sup_weighted(&phi, t, 0.5 - e.mu1, e.nu, Some(2.0 * japanese(t)));
    Ok(lhs / m.total())
}
