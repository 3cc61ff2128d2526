//! Periodic-grid field algebra.
//!
//! The plane is truncated to the torus `[-L, L)²` sampled on `n × n` nodes.
//! Samples are stored row-major with `x¹` running fastest: node `(i, j)` sits
//! at `(−L + i·h, −L + j·h)` and lives at `values[j * n + i]`.
//!
//! Spectra use the real-to-complex half layout: `n/2 + 1` wavenumbers along
//! `x¹` and all `n` along `x²`, stored as `data[i * n + j]` with `i` the `k₁`
//! index. Coefficients are normalized so that
//! `f(x_node) = Σ_k f̂_k exp(i k·(x_node + L))` over the full spectrum.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex};

use once_cell::sync::Lazy;
use rayon::prelude::*;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grids at least this large run their transforms row-parallel.
const PARALLEL_MIN_N: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    half_width: f64,
}

impl Grid {
    pub fn new(n: usize, half_width: f64) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n = {n} must be a power of two and at least 16"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half-width L = {half_width} must be positive"
            )));
        }
        Ok(Self { n, half_width })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Area of one cell, the quadrature weight.
    #[inline]
    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    #[inline]
    pub fn node(&self, idx: usize) -> (f64, f64) {
        (self.coord(idx % self.n), self.coord(idx / self.n))
    }

    #[inline]
    pub fn radius(&self, idx: usize) -> f64 {
        let (x1, x2) = self.node(idx);
        x1.hypot(x2)
    }

    /// Signed integer mode number of spectral index `j` along the full axis.
    #[inline]
    pub fn mode(&self, j: usize) -> i64 {
        if j < self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    #[inline]
    pub fn wavenumber(&self, mode: i64) -> f64 {
        PI * mode as f64 / self.half_width
    }

    /// Number of `k₁` entries in the half spectrum.
    #[inline]
    pub fn half_modes(&self) -> usize {
        self.n / 2 + 1
    }

    /// Largest retained |mode| under the 2/3 rule.
    #[inline]
    pub fn dealias_cutoff(&self) -> i64 {
        (self.n / 3) as i64
    }

    fn check_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(self.n, other.n));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X1,
    X2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|idx| {
                let (x1, x2) = grid.node(idx);
                f(x1, x2)
            })
            .collect();
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.n + i]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise map with access to the node coordinates.
    pub fn map_with_coords(&self, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(idx, &v)| {
                let (x1, x2) = self.grid.node(idx);
                f(x1, x2, v)
            })
            .collect();
        Self {
            grid: self.grid,
            values,
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Returns the first non-finite sample as `(i, j, value)`.
    pub fn first_nonfinite(&self) -> Option<(usize, usize, f64)> {
        self.values
            .iter()
            .position(|v| !v.is_finite())
            .map(|idx| (idx % self.grid.n, idx / self.grid.n, self.values[idx]))
    }

    pub fn ensure_finite(&self, what: &'static str) -> Result<()> {
        match self.first_nonfinite() {
            Some((i, j, value)) => Err(Error::NonFinite { what, i, j, value }),
            None => Ok(()),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Index and value of the sample with the largest modulus.
    pub fn argmax_abs(&self) -> (usize, f64) {
        let mut best = (0, 0.0_f64);
        for (idx, v) in self.values.iter().enumerate() {
            if v.abs() > best.1.abs() {
                best = (idx, *v);
            }
        }
        best
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn sub_mean(&self) -> Self {
        let m = self.mean();
        self.map(|v| v - m)
    }

    /// `‖f‖_{L^p}` by periodic quadrature.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.abs().powf(p)).sum();
        (self.grid.cell_area() * s).powf(1.0 / p)
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.grid.cell_area() * self.values.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn inner(&self, other: &Self) -> f64 {
        self.grid.cell_area()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }

    pub fn spectrum(&self) -> Spectrum {
        Spectrum::forward(self)
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: Self) -> ScalarField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: Self) -> ScalarField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: Self) -> ScalarField {
        self.zip_map(rhs, |a, b| a * b)
    }
}

impl Mul<&ScalarField> for f64 {
    type Output = ScalarField;
    fn mul(self, rhs: &ScalarField) -> ScalarField {
        rhs.scale(self)
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.map(|v| -v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub c1: ScalarField,
    pub c2: ScalarField,
}

impl VectorField {
    pub fn new(c1: ScalarField, c2: ScalarField) -> Result<Self> {
        c1.grid.check_same(&c2.grid)?;
        Ok(Self { c1, c2 })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            c1: ScalarField::zeros(grid),
            c2: ScalarField::zeros(grid),
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        Self {
            c1: ScalarField::from_fn(grid, |a, b| f(a, b).0),
            c2: ScalarField::from_fn(grid, |a, b| f(a, b).1),
        }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        self.c1.grid()
    }

    pub fn map(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self {
        Self {
            c1: f(&self.c1),
            c2: f(&self.c2),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|f| f.scale(c))
    }

    /// `U^⊥ = (−U₂, U₁)`.
    pub fn perp(&self) -> Self {
        Self {
            c1: -&self.c2,
            c2: self.c1.clone(),
        }
    }

    pub fn dot(&self, other: &Self) -> ScalarField {
        &(&self.c1 * &other.c1) + &(&self.c2 * &other.c2)
    }

    pub fn norm_sq_pointwise(&self) -> ScalarField {
        self.dot(self)
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.c1.l2_norm_sq() + self.c2.l2_norm_sq()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    pub fn inner(&self, other: &Self) -> f64 {
        self.c1.inner(&other.c1) + self.c2.inner(&other.c2)
    }

    pub fn max_abs(&self) -> f64 {
        self.c1.max_abs().max(self.c2.max_abs())
    }

    pub fn ensure_finite(&self, what: &'static str) -> Result<()> {
        self.c1.ensure_finite(what)?;
        self.c2.ensure_finite(what)
    }
}

impl Add for &VectorField {
    type Output = VectorField;
    fn add(self, rhs: Self) -> VectorField {
        VectorField {
            c1: &self.c1 + &rhs.c1,
            c2: &self.c2 + &rhs.c2,
        }
    }
}

impl Sub for &VectorField {
    type Output = VectorField;
    fn sub(self, rhs: Self) -> VectorField {
        VectorField {
            c1: &self.c1 - &rhs.c1,
            c2: &self.c2 - &rhs.c2,
        }
    }
}

struct Plan {
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

static PLANS: Lazy<Mutex<HashMap<usize, Arc<Plan>>>> = Lazy::new(|| Mutex::new(HashMap::new()));

fn plan(n: usize) -> Arc<Plan> {
    let mut cache = PLANS.lock().expect("fft plan cache poisoned");
    cache
        .entry(n)
        .or_insert_with(|| {
            let mut real = RealFftPlanner::<f64>::new();
            let mut cplx = FftPlanner::<f64>::new();
            Arc::new(Plan {
                r2c: real.plan_fft_forward(n),
                c2r: real.plan_fft_inverse(n),
                fwd: cplx.plan_fft_forward(n),
                inv: cplx.plan_fft_inverse(n),
            })
        })
        .clone()
}

/// Runs `f` over equally sized chunks, in parallel on large grids.
fn for_chunks<T: Send>(data: &mut [T], chunk: usize, parallel: bool, f: impl Fn(usize, &mut [T]) + Sync) {
    if parallel {
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(k, c)| f(k, c));
    } else {
        data.chunks_mut(chunk).enumerate().for_each(|(k, c)| f(k, c));
    }
}

/// Half-spectrum of a real field; see the module docs for the layout.
#[derive(Clone, Debug)]
pub struct Spectrum {
    grid: Grid,
    data: Vec<Complex64>,
}

impl Spectrum {
    pub fn forward(field: &ScalarField) -> Self {
        let grid = field.grid;
        let n = grid.n;
        let m = grid.half_modes();
        let p = plan(n);
        let par = n >= PARALLEL_MIN_N;

        // rows along x¹
        let mut rows = vec![Complex64::new(0.0, 0.0); n * m];
        for_chunks(&mut rows, m, par, |j, out| {
            let mut input = field.values[j * n..(j + 1) * n].to_vec();
            let mut scratch = p.r2c.make_scratch_vec();
            p.r2c
                .process_with_scratch(&mut input, out, &mut scratch)
                .expect("r2c length");
        });

        // transpose to k₁-major, then transform along x²
        let mut data = vec![Complex64::new(0.0, 0.0); n * m];
        for j in 0..n {
            for i in 0..m {
                data[i * n + j] = rows[j * m + i];
            }
        }
        let norm = 1.0 / (n * n) as f64;
        for_chunks(&mut data, n, par, |_, col| {
            let mut scratch = vec![Complex64::new(0.0, 0.0); p.fwd.get_inplace_scratch_len()];
            p.fwd.process_with_scratch(col, &mut scratch);
            for c in col.iter_mut() {
                *c *= norm;
            }
        });
        Self { grid, data }
    }

    pub fn to_field(&self) -> ScalarField {
        let grid = self.grid;
        let n = grid.n;
        let m = grid.half_modes();
        let p = plan(n);
        let par = n >= PARALLEL_MIN_N;

        let mut data = self.data.clone();
        for_chunks(&mut data, n, par, |_, col| {
            let mut scratch = vec![Complex64::new(0.0, 0.0); p.inv.get_inplace_scratch_len()];
            p.inv.process_with_scratch(col, &mut scratch);
        });
        let mut rows = vec![Complex64::new(0.0, 0.0); n * m];
        for i in 0..m {
            for j in 0..n {
                rows[j * m + i] = data[i * n + j];
            }
        }
        let mut values = vec![0.0; n * n];
        let rows = &rows;
        for_chunks(&mut values, n, par, |j, out| {
            let mut input = rows[j * m..(j + 1) * m].to_vec();
            // DC and Nyquist bins of a real row are real
            input[0].im = 0.0;
            input[m - 1].im = 0.0;
            let mut scratch = p.c2r.make_scratch_vec();
            let _ = p.c2r.process_with_scratch(&mut input, out, &mut scratch);
        });
        ScalarField { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Coefficient at half-spectrum position (`k₁` index, `k₂` index).
    #[inline]
    pub fn coeff(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.grid.n + j]
    }

    /// Applies a diagonal multiplier `f(k₁ mode, k₂ mode)`.
    pub fn apply(&self, f: impl Fn(i64, i64) -> Complex64) -> Self {
        let n = self.grid.n;
        let mut data = self.data.clone();
        for (idx, c) in data.iter_mut().enumerate() {
            let i = idx / n;
            let j = idx % n;
            *c *= f(i as i64, self.grid.mode(j));
        }
        Self {
            grid: self.grid,
            data,
        }
    }

    pub fn derivative(&self, axis: Axis) -> Self {
        let g = self.grid;
        let nyq = (g.n / 2) as i64;
        self.apply(|m1, m2| {
            let m = match axis {
                Axis::X1 => m1,
                Axis::X2 => m2,
            };
            if m.abs() == nyq {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, g.wavenumber(m))
            }
        })
    }

    pub fn laplacian(&self) -> Self {
        let g = self.grid;
        self.apply(|m1, m2| {
            let (k1, k2) = (g.wavenumber(m1), g.wavenumber(m2));
            Complex64::new(-(k1 * k1 + k2 * k2), 0.0)
        })
    }

    /// Mean-free solution of `Δg = f − mean(f)`.
    pub fn inv_laplacian(&self) -> Self {
        let g = self.grid;
        self.apply(|m1, m2| {
            if m1 == 0 && m2 == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                let (k1, k2) = (g.wavenumber(m1), g.wavenumber(m2));
                Complex64::new(-1.0 / (k1 * k1 + k2 * k2), 0.0)
            }
        })
    }

    pub fn dealias(&self) -> Self {
        let cut = self.grid.dealias_cutoff();
        self.apply(|m1, m2| {
            if m1.abs() > cut || m2.abs() > cut {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Multiplicity of each half-spectrum entry in the full spectrum.
    #[inline]
    fn multiplicity(&self, i: usize) -> f64 {
        if i == 0 || i == self.grid.n / 2 {
            1.0
        } else {
            2.0
        }
    }

    /// `Σ_k |f̂_k|²` over the full spectrum.
    pub fn energy(&self) -> f64 {
        self.energy_where(|_, _| true)
    }

    /// Spectral energy restricted to modes selected by `keep(|m₁|, |m₂|)`.
    pub fn energy_where(&self, keep: impl Fn(i64, i64) -> bool) -> f64 {
        let n = self.grid.n;
        let mut acc = 0.0;
        for (idx, c) in self.data.iter().enumerate() {
            let i = idx / n;
            let j = idx % n;
            if keep(i as i64, self.grid.mode(j).abs()) {
                acc += self.multiplicity(i) * c.norm_sqr();
            }
        }
        acc
    }

    /// Evaluates the trigonometric interpolant with its gradient and Hessian
    /// at an arbitrary point: `(f, [f₁, f₂], [f₁₁, f₁₂, f₂₂])`.
    pub fn evaluate_with_derivatives(&self, x1: f64, x2: f64) -> (f64, [f64; 2], [f64; 3]) {
        let g = self.grid;
        let n = g.n;
        let (y1, y2) = (x1 + g.half_width, x2 + g.half_width);
        let mut f = 0.0;
        let mut grad = [0.0; 2];
        let mut hess = [0.0; 3];
        for (idx, c) in self.data.iter().enumerate() {
            if c.norm_sqr() == 0.0 {
                continue;
            }
            let i = idx / n;
            let j = idx % n;
            let w = self.multiplicity(i);
            let k1 = g.wavenumber(i as i64);
            let k2 = g.wavenumber(g.mode(j));
            let e = Complex64::from_polar(1.0, k1 * y1 + k2 * y2) * c * w;
            // Re(c e^{iθ}), derivatives bring down i k
            f += e.re;
            grad[0] += -k1 * e.im;
            grad[1] += -k2 * e.im;
            hess[0] += -k1 * k1 * e.re;
            hess[1] += -k1 * k2 * e.re;
            hess[2] += -k2 * k2 * e.re;
        }
        (f, grad, hess)
    }
}

pub fn ddx(f: &ScalarField, axis: Axis) -> Result<ScalarField> {
    f.ensure_finite("ddx input")?;
    Ok(f.spectrum().derivative(axis).to_field())
}

pub fn gradient(f: &ScalarField) -> VectorField {
    let s = f.spectrum();
    VectorField {
        c1: s.derivative(Axis::X1).to_field(),
        c2: s.derivative(Axis::X2).to_field(),
    }
}

pub fn laplacian(f: &ScalarField) -> ScalarField {
    f.spectrum().laplacian().to_field()
}

pub fn inv_laplacian(f: &ScalarField) -> Result<ScalarField> {
    f.ensure_finite("inv_laplacian input")?;
    Ok(f.spectrum().inv_laplacian().to_field())
}

/// Zeroes every mode with `|k₁|` or `|k₂|` above `⌊n/3⌋`.
pub fn dealias(f: &ScalarField) -> ScalarField {
    f.spectrum().dealias().to_field()
}

pub fn dealias_vector(u: &VectorField) -> VectorField {
    u.map(dealias)
}

/// `h² Σ f` over the periodic cell.
pub fn integrate(f: &ScalarField) -> f64 {
    f.grid.cell_area() * f.values.iter().sum::<f64>()
}

/// `sup |f|` of the trigonometric interpolant, refined by Newton iteration
/// from the best grid node. Falls back to the grid maximum when the
/// iteration leaves the neighbouring cell.
pub fn sup_abs_interpolated(f: &ScalarField) -> f64 {
    let (idx, v0) = f.argmax_abs();
    if v0 == 0.0 {
        return 0.0;
    }
    let g = *f.grid();
    let h = g.spacing();
    let spec = f.spectrum();
    let (x0, y0) = g.node(idx);
    let (mut x, mut y) = (x0, y0);
    let mut best = v0.abs();
    for _ in 0..12 {
        let (val, gr, he) = spec.evaluate_with_derivatives(x, y);
        best = best.max(val.abs());
        let det = he[0] * he[2] - he[1] * he[1];
        if det.abs() < f64::MIN_POSITIVE {
            break;
        }
        let dx = -(he[2] * gr[0] - he[1] * gr[1]) / det;
        let dy = -(-he[1] * gr[0] + he[0] * gr[1]) / det;
        x += dx;
        y += dy;
        if (x - x0).abs() > h || (y - y0).abs() > h {
            break;
        }
        if dx.hypot(dy) < 1e-13 * h {
            let (val, _, _) = spec.evaluate_with_derivatives(x, y);
            best = best.max(val.abs());
            break;
        }
    }
    best
}

/// `⟨s⟩ = √(1 + s²)`.
#[inline]
pub fn japanese(s: f64) -> f64 {
    (1.0 + s * s).sqrt()
}
