//! Periodic fields on the unit torus `[0,1)^2` stored as Fourier coefficients.
//!
//! Basis `e^{2 pi i k.x}`, modes `k in {-N/2, .., N/2-1}^2`. Coefficients are
//! normalized so that `f(x) = sum_k c(k) e^{2 pi i k.x}`.
//!
//! Odd-order derivatives and products act on the band `|k_i| < N/2`; the
//! Nyquist lines are dropped there so that real fields stay real.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::sync::Arc;

pub const TAU: f64 = 2.0 * PI;

struct Plans {
    n: usize,
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    fwd_pad: Arc<dyn Fft<f64>>,
    inv_pad: Arc<dyn Fft<f64>>,
}

/// An `N x N` collocation grid together with its FFT plans.
#[derive(Clone)]
pub struct Grid(Arc<Plans>);

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Grid({})", self.0.n)
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.0.n == other.0.n
    }
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidGrid(n));
        }
        let m = 3 * n / 2;
        let mut planner = FftPlanner::new();
        Ok(Grid(Arc::new(Plans {
            n,
            m,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            fwd_pad: planner.plan_fft_forward(m),
            inv_pad: planner.plan_fft_inverse(m),
        })))
    }

    pub fn n(&self) -> usize {
        self.0.n
    }

    /// Number of modes (and of collocation points).
    pub fn len(&self) -> usize {
        self.0.n * self.0.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn padded_n(&self) -> usize {
        self.0.m
    }

    pub fn wavenumber(&self, i: usize) -> i64 {
        let n = self.0.n;
        if i < n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    pub fn mode(&self, idx: usize) -> (i64, i64) {
        let n = self.0.n;
        (self.wavenumber(idx / n), self.wavenumber(idx % n))
    }

    pub fn index_of(&self, k1: i64, k2: i64) -> Option<usize> {
        let h = (self.0.n / 2) as i64;
        if k1 < -h || k1 >= h || k2 < -h || k2 >= h {
            return None;
        }
        let n = self.0.n as i64;
        Some((k1.rem_euclid(n) * n + k2.rem_euclid(n)) as usize)
    }

    /// Index of the mode `-k` (wrapping the Nyquist line onto itself).
    pub fn neg_index(&self, idx: usize) -> usize {
        let n = self.0.n;
        let (i, j) = (idx / n, idx % n);
        ((n - i) % n) * n + (n - j) % n
    }

    pub fn is_nyquist(&self, i: usize) -> bool {
        i == self.0.n / 2
    }

    /// True when neither component of the mode sits on the Nyquist line.
    pub fn retained(&self, idx: usize) -> bool {
        let n = self.0.n;
        !self.is_nyquist(idx / n) && !self.is_nyquist(idx % n)
    }

    pub fn point(&self, idx: usize) -> (f64, f64) {
        let n = self.0.n;
        ((idx / n) as f64 / n as f64, (idx % n) as f64 / n as f64)
    }

    fn fft2(&self, data: &mut [Complex64], inverse: bool, padded: bool) {
        let (fft, n) = match (inverse, padded) {
            (false, false) => (&self.0.fwd, self.0.n),
            (true, false) => (&self.0.inv, self.0.n),
            (false, true) => (&self.0.fwd_pad, self.0.m),
            (true, true) => (&self.0.inv_pad, self.0.m),
        };
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(data, &mut scratch);
        transpose(data, n);
        fft.process_with_scratch(data, &mut scratch);
        transpose(data, n);
    }

    fn check(&self, other: &Grid) -> Result<()> {
        if self != other {
            Err(Error::GridMismatch(self.n(), other.n()))
        } else {
            Ok(())
        }
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Real scalar field.
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        ScalarField { grid: grid.clone(), coeffs: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        let mut f = Self::zeros(grid);
        f.coeffs[0] = Complex64::new(c, 0.0);
        f
    }

    /// Forward transform of physical samples, `samples[i1 * N + i2] = f(i1/N, i2/N)`.
    pub fn from_physical(grid: &Grid, samples: &[f64]) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: samples.len() });
        }
        let mut data: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        grid.fft2(&mut data, false, false);
        let s = 1.0 / grid.len() as f64;
        for c in data.iter_mut() {
            *c *= s;
        }
        let mut f = ScalarField { grid: grid.clone(), coeffs: data };
        f.symmetrize();
        Ok(f)
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let samples: Vec<f64> = (0..grid.len())
            .map(|i| {
                let (x1, x2) = grid.point(i);
                f(x1, x2)
            })
            .collect();
        Self::from_physical(grid, &samples).expect("sizes match")
    }

    /// Coefficients supplied by the caller; they are symmetrized to keep the field real.
    pub fn from_coeffs(grid: &Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: coeffs.len() });
        }
        let mut f = ScalarField { grid: grid.clone(), coeffs };
        f.symmetrize();
        Ok(f)
    }

    pub(crate) fn from_coeffs_unchecked(grid: &Grid, coeffs: Vec<Complex64>) -> Self {
        ScalarField { grid: grid.clone(), coeffs }
    }

    /// `c e^{2 pi i k.x} + conj`, i.e. a real single-mode field.
    pub fn real_mode(grid: &Grid, k1: i64, k2: i64, c: Complex64) -> Result<Self> {
        let idx = grid
            .index_of(k1, k2)
            .ok_or_else(|| Error::InvalidArgument(format!("mode ({k1},{k2}) outside grid")))?;
        let mut f = Self::zeros(grid);
        let neg = grid.neg_index(idx);
        if neg == idx {
            f.coeffs[idx] = Complex64::new(2.0 * c.re, 0.0);
        } else {
            f.coeffs[idx] = c;
            f.coeffs[neg] = c.conj();
        }
        Ok(f)
    }

    /// Enforce `c(-k) = conj c(k)`.
    pub fn symmetrize(&mut self) {
        let g = self.grid.clone();
        for idx in 0..g.len() {
            let neg = g.neg_index(idx);
            if neg < idx {
                continue;
            }
            if neg == idx {
                self.coeffs[idx] = Complex64::new(self.coeffs[idx].re, 0.0);
            } else {
                let a = self.coeffs[idx];
                let b = self.coeffs[neg].conj();
                let m = (a + b) * 0.5;
                self.coeffs[idx] = m;
                self.coeffs[neg] = m.conj();
            }
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff(&self, k1: i64, k2: i64) -> Complex64 {
        self.grid.index_of(k1, k2).map(|i| self.coeffs[i]).unwrap_or_default()
    }

    pub fn to_physical(&self) -> Vec<f64> {
        let mut data = self.coeffs.clone();
        self.grid.fft2(&mut data, true, false);
        data.into_iter().map(|c| c.re).collect()
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn remove_mean(&self) -> Self {
        let mut f = self.clone();
        f.coeffs[0] = Complex64::new(0.0, 0.0);
        f
    }

    /// Multiply mode `k` by `symbol(k1, k2)`.
    pub fn apply_multiplier(&self, symbol: impl Fn(i64, i64) -> Complex64) -> Self {
        let g = &self.grid;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let (k1, k2) = g.mode(i);
                c * symbol(k1, k2)
            })
            .collect();
        ScalarField { grid: g.clone(), coeffs }
    }

    /// Real radial-type multiplier.
    pub fn apply_real_multiplier(&self, symbol: impl Fn(i64, i64) -> f64) -> Self {
        self.apply_multiplier(|a, b| Complex64::new(symbol(a, b), 0.0))
    }

    /// `d^order / dx_axis^order`, `axis` in {1, 2}.
    pub fn derivative(&self, axis: usize, order: u32) -> Self {
        assert!(axis == 1 || axis == 2, "axis must be 1 or 2");
        let g = &self.grid;
        let n = g.n();
        let odd = order % 2 == 1;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let comp = if axis == 1 { i / n } else { i % n };
                if odd && g.is_nyquist(comp) {
                    return Complex64::new(0.0, 0.0);
                }
                let k = g.wavenumber(comp) as f64;
                c * Complex64::new(0.0, TAU * k).powu(order)
            })
            .collect();
        ScalarField { grid: g.clone(), coeffs }
    }

    pub fn dx(&self, axis: usize) -> Self {
        self.derivative(axis, 1)
    }

    pub fn laplacian(&self) -> Self {
        self.apply_real_multiplier(|a, b| -4.0 * PI * PI * (a * a + b * b) as f64)
    }

    /// `Delta^{-1}` with the zero mode sent to zero.
    pub fn inverse_laplacian(&self) -> Self {
        self.apply_real_multiplier(|a, b| {
            let k2 = (a * a + b * b) as f64;
            if k2 == 0.0 {
                0.0
            } else {
                -1.0 / (4.0 * PI * PI * k2)
            }
        })
    }

    /// Zero every mode with `|k|_inf > band` (and the Nyquist lines).
    pub fn truncate(&self, band: i64) -> Self {
        let g = self.grid.clone();
        let mut f = self.clone();
        for i in 0..g.len() {
            let (k1, k2) = g.mode(i);
            if !g.retained(i) || k1.abs() > band || k2.abs() > band {
                f.coeffs[i] = Complex64::new(0.0, 0.0);
            }
        }
        f
    }

    /// `f(x + s)`; Nyquist lines are dropped.
    pub fn translate(&self, s1: f64, s2: f64) -> Self {
        let g = self.grid.clone();
        let mut f = self.clone();
        for i in 0..g.len() {
            if !g.retained(i) {
                f.coeffs[i] = Complex64::new(0.0, 0.0);
                continue;
            }
            let (k1, k2) = g.mode(i);
            let ph = TAU * (k1 as f64 * s1 + k2 as f64 * s2);
            f.coeffs[i] *= Complex64::new(ph.cos(), ph.sin());
        }
        f
    }

    /// `f(sigma x)`: mode `k` moved to `sigma k`.
    pub fn oscillate(&self, sigma: u32) -> Result<Self> {
        let g = self.grid.clone();
        let s = sigma as i64;
        let mut out = Self::zeros(&g);
        for i in 0..g.len() {
            let c = self.coeffs[i];
            if c.norm() == 0.0 {
                continue;
            }
            let (k1, k2) = g.mode(i);
            let j = g
                .index_of(s * k1, s * k2)
                .filter(|&j| g.retained(j))
                .ok_or_else(|| Error::Aliasing(format!("mode ({k1},{k2}) times {sigma} exceeds grid {}", g.n())))?;
            out.coeffs[j] = c;
        }
        Ok(out)
    }

    pub fn padded(&self) -> Padded {
        let g = &self.grid;
        let m = g.padded_n();
        let mut data = vec![Complex64::new(0.0, 0.0); m * m];
        for i in 0..g.len() {
            if !g.retained(i) {
                continue;
            }
            let (k1, k2) = g.mode(i);
            let p = (k1.rem_euclid(m as i64) as usize) * m + k2.rem_euclid(m as i64) as usize;
            data[p] = self.coeffs[i];
        }
        g.fft2(&mut data, true, true);
        Padded { grid: g.clone(), vals: data.into_iter().map(|c| c.re).collect() }
    }

    /// Dealiased product, exact on the band `|k_i| < N/2`.
    pub fn product(&self, other: &ScalarField) -> ScalarField {
        self.padded().mul(&other.padded()).to_field()
    }

    /// Sum of `|c(k)|^2`, equal to the mean of `f^2`.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &ScalarField) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a * b.conj()).re).sum()
    }

    pub fn max_coeff_diff(&self, other: &ScalarField) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn scale(&self, a: f64) -> Self {
        ScalarField { grid: self.grid.clone(), coeffs: self.coeffs.iter().map(|c| c * a).collect() }
    }

    pub fn axpy(&mut self, a: f64, x: &ScalarField) {
        debug_assert!(self.grid == x.grid);
        for (y, xv) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *y += xv * a;
        }
    }

    pub fn add(&self, o: &ScalarField) -> Self {
        let mut r = self.clone();
        r.axpy(1.0, o);
        r
    }

    pub fn sub(&self, o: &ScalarField) -> Self {
        let mut r = self.clone();
        r.axpy(-1.0, o);
        r
    }

    pub fn norm(&self, kind: NormKind) -> f64 {
        norm_of_components(std::slice::from_ref(self), &[1.0], kind)
    }
}

/// Physical samples on the 3/2-padded grid.
#[derive(Clone, Debug)]
pub struct Padded {
    grid: Grid,
    vals: Vec<f64>,
}

impl Padded {
    pub fn mul(&self, o: &Padded) -> Padded {
        Padded { grid: self.grid.clone(), vals: self.vals.iter().zip(&o.vals).map(|(a, b)| a * b).collect() }
    }

    pub fn zeros(grid: &Grid) -> Padded {
        let m = grid.padded_n();
        Padded { grid: grid.clone(), vals: vec![0.0; m * m] }
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    /// `self += a * b` pointwise.
    pub fn add_product(&mut self, a: &Padded, b: &Padded) {
        for ((s, x), y) in self.vals.iter_mut().zip(&a.vals).zip(&b.vals) {
            *s += x * y;
        }
    }

    pub fn axpy(&mut self, c: f64, a: &Padded) {
        for (s, x) in self.vals.iter_mut().zip(&a.vals) {
            *s += c * x;
        }
    }

    /// Combine several padded factors pointwise, `f(&[a_i(x)])`.
    pub fn combine(parts: &[&Padded], f: impl Fn(&[f64]) -> f64) -> Padded {
        let grid = parts[0].grid.clone();
        let len = parts[0].vals.len();
        let mut buf = vec![0.0; parts.len()];
        let vals = (0..len)
            .map(|i| {
                for (b, p) in buf.iter_mut().zip(parts) {
                    *b = p.vals[i];
                }
                f(&buf)
            })
            .collect();
        Padded { grid, vals }
    }

    /// Back to the `N` grid, keeping `|k_i| < N/2`.
    pub fn to_field(&self) -> ScalarField {
        let g = &self.grid;
        let m = g.padded_n();
        let mut data: Vec<Complex64> = self.vals.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        g.fft2(&mut data, false, true);
        let s = 1.0 / (m * m) as f64;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); g.len()];
        for (i, c) in coeffs.iter_mut().enumerate() {
            if !g.retained(i) {
                continue;
            }
            let (k1, k2) = g.mode(i);
            let p = (k1.rem_euclid(m as i64) as usize) * m + k2.rem_euclid(m as i64) as usize;
            *c = data[p] * s;
        }
        let mut f = ScalarField::from_coeffs_unchecked(g, coeffs);
        f.symmetrize();
        f
    }
}

/// Norm selector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum NormKind {
    /// `L^p` by grid quadrature, `p` may be infinite.
    Lp(f64),
    Linf,
    /// Sum over derivative orders `<= n` of the sup of the derivatives at one time.
    CN(u32),
    /// `(sum (1 + 4 pi^2 |k|^2)^s |c(k)|^2)^{1/2}`.
    Hs(f64),
    /// `L^p` norm of `(I - Delta)^{s/2} f`.
    Wsp(f64, f64),
}

/// Pointwise magnitude is `sqrt(sum w_i f_i^2)`.
fn norm_of_components(comps: &[ScalarField], weights: &[f64], kind: NormKind) -> f64 {
    match kind {
        NormKind::Hs(s) => {
            let g = comps[0].grid();
            let mut total = 0.0;
            for (f, w) in comps.iter().zip(weights) {
                for (i, c) in f.coeffs.iter().enumerate() {
                    let (a, b) = g.mode(i);
                    let k2 = (a * a + b * b) as f64;
                    total += w * (1.0 + 4.0 * PI * PI * k2).powf(s) * c.norm_sqr();
                }
            }
            total.sqrt()
        }
        NormKind::Lp(p) => {
            let phys: Vec<Vec<f64>> = comps.iter().map(|f| f.to_physical()).collect();
            lp_of_samples(&phys, weights, p)
        }
        NormKind::Linf => norm_of_components(comps, weights, NormKind::Lp(f64::INFINITY)),
        NormKind::Wsp(s, p) => {
            let lifted: Vec<ScalarField> = comps
                .iter()
                .map(|f| f.apply_real_multiplier(|a, b| (1.0 + 4.0 * PI * PI * (a * a + b * b) as f64).powf(s / 2.0)))
                .collect();
            norm_of_components(&lifted, weights, NormKind::Lp(p))
        }
        NormKind::CN(order) => {
            let mut total = 0.0;
            for j in 0..=order {
                let mut best: f64 = 0.0;
                for a in 0..=j {
                    let b = j - a;
                    for f in comps {
                        let mut d = f.clone();
                        if a > 0 {
                            d = d.derivative(1, a);
                        }
                        if b > 0 {
                            d = d.derivative(2, b);
                        }
                        best = best.max(d.to_physical().iter().fold(0.0, |m, v| m.max(v.abs())));
                    }
                }
                total += best;
            }
            total
        }
    }
}

pub fn lp_of_samples(phys: &[Vec<f64>], weights: &[f64], p: f64) -> f64 {
    let len = phys[0].len();
    let mag = |i: usize| -> f64 {
        phys.iter().zip(weights).map(|(c, w)| w * c[i] * c[i]).sum::<f64>().sqrt()
    };
    if p.is_infinite() {
        (0..len).map(mag).fold(0.0, f64::max)
    } else {
        let s: f64 = (0..len).map(|i| mag(i).powf(p)).sum::<f64>() / len as f64;
        s.powf(1.0 / p)
    }
}

/// Common interface of scalar, vector and symmetric tensor fields.
pub trait Field: Clone + Send + Sync + Sized {
    fn components(&self) -> &[ScalarField];
    fn components_mut(&mut self) -> &mut [ScalarField];
    fn from_components(comps: Vec<ScalarField>) -> Self;
    /// Weights defining the pointwise magnitude (Euclidean or Frobenius).
    fn weights(&self) -> &'static [f64];

    fn grid(&self) -> &Grid {
        self.components()[0].grid()
    }

    fn map(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self {
        Self::from_components(self.components().iter().map(f).collect())
    }

    fn zip(&self, o: &Self, f: impl Fn(&ScalarField, &ScalarField) -> ScalarField) -> Self {
        Self::from_components(self.components().iter().zip(o.components()).map(|(a, b)| f(a, b)).collect())
    }

    fn zeros_like(&self) -> Self {
        self.map(|c| ScalarField::zeros(c.grid()))
    }

    fn axpy(&mut self, a: f64, x: &Self) {
        for (y, xv) in self.components_mut().iter_mut().zip(x.components()) {
            y.axpy(a, xv);
        }
    }

    fn plus(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a.add(b))
    }

    fn minus(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a.sub(b))
    }

    fn scaled(&self, a: f64) -> Self {
        self.map(|c| c.scale(a))
    }

    fn norm(&self, kind: NormKind) -> f64 {
        norm_of_components(self.components(), self.weights(), kind)
    }

    fn remove_mean(&self) -> Self {
        self.map(|c| c.remove_mean())
    }

    fn is_finite(&self) -> bool {
        self.components().iter().all(|c| c.is_finite())
    }

    fn max_coeff_diff(&self, o: &Self) -> f64 {
        self.components().iter().zip(o.components()).map(|(a, b)| a.max_coeff_diff(b)).fold(0.0, f64::max)
    }

    fn physical(&self) -> Vec<Vec<f64>> {
        self.components().iter().map(|c| c.to_physical()).collect()
    }

    fn energy(&self) -> f64 {
        self.components().iter().zip(self.weights()).map(|(c, w)| w * c.energy()).sum()
    }
}

impl Field for ScalarField {
    fn components(&self) -> &[ScalarField] {
        std::slice::from_ref(self)
    }
    fn components_mut(&mut self) -> &mut [ScalarField] {
        std::slice::from_mut(self)
    }
    fn from_components(mut comps: Vec<ScalarField>) -> Self {
        comps.remove(0)
    }
    fn weights(&self) -> &'static [f64] {
        &[1.0]
    }
}

/// Real 2-vector field.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub c: [ScalarField; 2],
}

impl Field for VectorField {
    fn components(&self) -> &[ScalarField] {
        &self.c
    }
    fn components_mut(&mut self) -> &mut [ScalarField] {
        &mut self.c
    }
    fn from_components(comps: Vec<ScalarField>) -> Self {
        let mut it = comps.into_iter();
        VectorField { c: [it.next().unwrap(), it.next().unwrap()] }
    }
    fn weights(&self) -> &'static [f64] {
        &[1.0, 1.0]
    }
}

impl VectorField {
    pub fn new(a: ScalarField, b: ScalarField) -> Self {
        VectorField { c: [a, b] }
    }

    pub fn zeros(grid: &Grid) -> Self {
        VectorField::new(ScalarField::zeros(grid), ScalarField::zeros(grid))
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        VectorField::new(ScalarField::from_fn(grid, |x, y| f(x, y).0), ScalarField::from_fn(grid, |x, y| f(x, y).1))
    }

    /// `d_1 v_1 + d_2 v_2`.
    pub fn div(&self) -> ScalarField {
        self.c[0].dx(1).add(&self.c[1].dx(2))
    }

    pub fn gradient(f: &ScalarField) -> Self {
        VectorField::new(f.dx(1), f.dx(2))
    }

    /// `(d_2 f, -d_1 f)`.
    pub fn perp_gradient(f: &ScalarField) -> Self {
        VectorField::new(f.dx(2), f.dx(1).scale(-1.0))
    }

    /// Leray projection: mode `k` mapped by `Id - k k^T / |k|^2`, zero mode kept.
    pub fn helmholtz_project(&self) -> Self {
        let g = self.c[0].grid().clone();
        let mut a = self.c[0].clone();
        let mut b = self.c[1].clone();
        for i in 1..g.len() {
            let (k1, k2) = g.mode(i);
            let (k1, k2) = (k1 as f64, k2 as f64);
            let kk = k1 * k1 + k2 * k2;
            let (u, v) = (self.c[0].coeffs[i], self.c[1].coeffs[i]);
            let dot = (u * k1 + v * k2) / kk;
            a.coeffs[i] = u - dot * k1;
            b.coeffs[i] = v - dot * k2;
        }
        VectorField::new(a, b)
    }

    pub fn laplacian(&self) -> Self {
        self.map(|c| c.laplacian())
    }

    pub fn mean(&self) -> [f64; 2] {
        [self.c[0].mean(), self.c[1].mean()]
    }

    pub fn translate(&self, s1: f64, s2: f64) -> Self {
        self.map(|c| c.translate(s1, s2))
    }

    pub fn padded(&self) -> [Padded; 2] {
        [self.c[0].padded(), self.c[1].padded()]
    }

    /// Dealiased `u (x) v + v (x) u`.
    pub fn sym_outer(u: &VectorField, v: &VectorField) -> SymTensorField {
        let (pu, pv) = (u.padded(), v.padded());
        SymTensorField::sym_outer_padded(&pu, &pv)
    }

    /// Dealiased `u (x) u`.
    pub fn outer_self(u: &VectorField) -> SymTensorField {
        let p = u.padded();
        SymTensorField::new(p[0].mul(&p[0]).to_field(), p[0].mul(&p[1]).to_field(), p[1].mul(&p[1]).to_field())
    }

    /// Dealiased `f v`.
    pub fn scalar_mul(f: &ScalarField, v: &VectorField) -> VectorField {
        let pf = f.padded();
        VectorField::new(pf.mul(&v.c[0].padded()).to_field(), pf.mul(&v.c[1].padded()).to_field())
    }

    /// Dealiased `u . v`.
    pub fn dot(u: &VectorField, v: &VectorField) -> ScalarField {
        let (pu, pv) = (u.padded(), v.padded());
        Padded::combine(&[&pu[0], &pu[1], &pv[0], &pv[1]], |a| a[0] * a[2] + a[1] * a[3]).to_field()
    }
}

/// Symmetric 2x2 tensor field stored as `(T11, T12, T22)`.
#[derive(Clone, Debug)]
pub struct SymTensorField {
    pub c: [ScalarField; 3],
}

impl Field for SymTensorField {
    fn components(&self) -> &[ScalarField] {
        &self.c
    }
    fn components_mut(&mut self) -> &mut [ScalarField] {
        &mut self.c
    }
    fn from_components(comps: Vec<ScalarField>) -> Self {
        let mut it = comps.into_iter();
        SymTensorField { c: [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()] }
    }
    fn weights(&self) -> &'static [f64] {
        &[1.0, 2.0, 1.0]
    }
}

impl SymTensorField {
    pub fn new(t11: ScalarField, t12: ScalarField, t22: ScalarField) -> Self {
        SymTensorField { c: [t11, t12, t22] }
    }

    pub fn zeros(grid: &Grid) -> Self {
        SymTensorField::new(ScalarField::zeros(grid), ScalarField::zeros(grid), ScalarField::zeros(grid))
    }

    /// Spatially constant tensor.
    pub fn constant(grid: &Grid, m: [[f64; 2]; 2]) -> Self {
        SymTensorField::new(
            ScalarField::constant(grid, m[0][0]),
            ScalarField::constant(grid, 0.5 * (m[0][1] + m[1][0])),
            ScalarField::constant(grid, m[1][1]),
        )
    }

    /// `f Id`.
    pub fn identity_times(f: &ScalarField) -> Self {
        SymTensorField::new(f.clone(), ScalarField::zeros(f.grid()), f.clone())
    }

    pub fn trace(&self) -> ScalarField {
        self.c[0].add(&self.c[2])
    }

    pub fn traceless(&self) -> Self {
        let d = self.c[0].sub(&self.c[2]).scale(0.5);
        SymTensorField::new(d.clone(), self.c[1].clone(), d.scale(-1.0))
    }

    /// Row-wise divergence `(d_j T_ij)_i`.
    pub fn div(&self) -> VectorField {
        VectorField::new(self.c[0].dx(1).add(&self.c[1].dx(2)), self.c[1].dx(1).add(&self.c[2].dx(2)))
    }

    pub fn row(&self, i: usize) -> VectorField {
        if i == 0 {
            VectorField::new(self.c[0].clone(), self.c[1].clone())
        } else {
            VectorField::new(self.c[1].clone(), self.c[2].clone())
        }
    }

    pub fn mean(&self) -> [f64; 3] {
        [self.c[0].mean(), self.c[1].mean(), self.c[2].mean()]
    }

    pub(crate) fn sym_outer_padded(pu: &[Padded; 2], pv: &[Padded; 2]) -> Self {
        SymTensorField::new(
            pu[0].mul(&pv[0]).to_field().scale(2.0),
            Padded::combine(&[&pu[0], &pu[1], &pv[0], &pv[1]], |a| a[0] * a[3] + a[1] * a[2]).to_field(),
            pu[1].mul(&pv[1]).to_field().scale(2.0),
        )
    }

    /// Dealiased `f T`.
    pub fn scalar_mul(f: &ScalarField, t: &SymTensorField) -> Self {
        let pf = f.padded();
        t.map(|c| pf.mul(&c.padded()).to_field())
    }

    /// Dealiased `T v` (row `i` is `T_ij v_j`).
    pub fn apply(t: &SymTensorField, v: &VectorField) -> VectorField {
        let pt: Vec<Padded> = t.c.iter().map(|c| c.padded()).collect();
        let pv = v.padded();
        VectorField::new(
            Padded::combine(&[&pt[0], &pt[1], &pv[0], &pv[1]], |a| a[0] * a[2] + a[1] * a[3]).to_field(),
            Padded::combine(&[&pt[1], &pt[2], &pv[0], &pv[1]], |a| a[0] * a[2] + a[1] * a[3]).to_field(),
        )
    }

    /// Pointwise symmetry defect is identically zero by storage; this returns the
    /// sup of the pointwise trace.
    pub fn max_trace(&self) -> f64 {
        self.trace().to_physical().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Uniformly sampled trajectory of fields, `times[i] = t0 + i dt`.
#[derive(Clone, Debug)]
pub struct TimeSeries<T> {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<T>,
}

impl<T: Field> TimeSeries<T> {
    pub fn new(t0: f64, dt: f64, values: Vec<T>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        if let Some(first) = values.first() {
            for v in &values {
                first.grid().check(v.grid())?;
            }
        }
        Ok(TimeSeries { t0, dt, values })
    }
}

impl<T> TimeSeries<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.values.len().saturating_sub(1))
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    /// Index of the grid time closest to `t`, if `t` lies in range.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        let x = (t - self.t0) / self.dt;
        let i = x.round();
        if i < 0.0 || i as usize >= self.len() || (x - i).abs() > 1e-6 {
            None
        } else {
            Some(i as usize)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub grid_size: usize,
    pub components: usize,
    pub time: f64,
    pub endianness: String,
}

/// Writes a JSON header line followed by row-major little-endian `f64` samples, one
/// block per component.
pub fn write_dump<W: Write>(w: &mut W, time: f64, samples: &[Vec<f64>]) -> Result<()> {
    let len = samples.first().map(|s| s.len()).unwrap_or(0);
    let n = (len as f64).sqrt().round() as usize;
    if n * n != len || samples.iter().any(|s| s.len() != len) {
        return Err(Error::DimensionMismatch { expected: n * n, got: len });
    }
    let header = DumpHeader { grid_size: n, components: samples.len(), time, endianness: "little".into() };
    serde_json::to_writer(&mut *w, &header)?;
    w.write_all(b"\n")?;
    for comp in samples {
        for v in comp {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn write_field_dump<W: Write, F: Field>(w: &mut W, time: f64, f: &F) -> Result<()> {
    write_dump(w, time, &f.physical())
}

pub fn read_dump<R: BufRead>(r: &mut R) -> Result<(DumpHeader, Vec<Vec<f64>>)> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: DumpHeader = serde_json::from_str(line.trim_end())?;
    if header.endianness != "little" {
        return Err(Error::InvalidArgument(format!("unsupported endianness {}", header.endianness)));
    }
    let len = header.grid_size * header.grid_size;
    let mut out = Vec::with_capacity(header.components);
    let mut buf = [0u8; 8];
    for _ in 0..header.components {
        let mut comp = Vec::with_capacity(len);
        for _ in 0..len {
            r.read_exact(&mut buf)?;
            comp.push(f64::from_le_bytes(buf));
        }
        out.push(comp);
    }
    Ok((header, out))
}

/// Random real field with Gaussian coefficients on `|k|_inf <= band`, amplitude
/// `(1 + |k|^2)^{-decay/2}`.
pub fn random_scalar<R: Rng>(grid: &Grid, band: i64, decay: f64, rng: &mut R) -> ScalarField {
    let band = band.min(grid.n() as i64 / 2 - 1);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (i, c) in coeffs.iter_mut().enumerate() {
        let (k1, k2) = grid.mode(i);
        if k1.abs() > band || k2.abs() > band || !grid.retained(i) {
            continue;
        }
        let amp = (1.0 + (k1 * k1 + k2 * k2) as f64).powf(-decay / 2.0);
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *c = Complex64::new(re, im) * amp;
    }
    let mut f = ScalarField::from_coeffs_unchecked(grid, coeffs);
    f.symmetrize();
    f
}

pub fn random_vector<R: Rng>(grid: &Grid, band: i64, decay: f64, rng: &mut R) -> VectorField {
    VectorField::new(random_scalar(grid, band, decay, rng), random_scalar(grid, band, decay, rng))
}

pub fn random_tensor<R: Rng>(grid: &Grid, band: i64, decay: f64, rng: &mut R) -> SymTensorField {
    SymTensorField::new(
        random_scalar(grid, band, decay, rng),
        random_scalar(grid, band, decay, rng),
        random_scalar(grid, band, decay, rng),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn direct_dft(n: usize, samples: &[f64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for (ki, o) in out.iter_mut().enumerate() {
            let k1 = if ki / n < n / 2 { (ki / n) as f64 } else { (ki / n) as f64 - n as f64 };
            let k2 = if ki % n < n / 2 { (ki % n) as f64 } else { (ki % n) as f64 - n as f64 };
            for (xi, s) in samples.iter().enumerate() {
                let x1 = (xi / n) as f64 / n as f64;
                let x2 = (xi % n) as f64 / n as f64;
                let ph = -TAU * (k1 * x1 + k2 * x2);
                *o += Complex64::new(ph.cos(), ph.sin()) * *s;
            }
            *o /= (n * n) as f64;
        }
        out
    }

    #[test]
    fn constant_and_cosine_coefficients() {
        let g = Grid::new(8).unwrap();
        let one = ScalarField::from_fn(&g, |_, _| 1.0);
        assert!((one.coeff(0, 0).re - 1.0).abs() < 1e-14);
        assert!(one.remove_mean().max_abs_coeff() < 1e-14);
        let c = ScalarField::from_fn(&g, |x, _| (TAU * x).cos());
        assert!((c.coeff(1, 0).re - 0.5).abs() < 1e-14);
        assert!((c.coeff(-1, 0).re - 0.5).abs() < 1e-14);
        assert!(c.energy() - 0.5 < 1e-14);
    }

    #[test]
    fn transform_matches_direct_sum() {
        let g = Grid::new(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<f64> = (0..64).map(|_| rand::Rng::random::<f64>(&mut rng) - 0.5).collect();
        let f = ScalarField::from_physical(&g, &samples).unwrap();
        let oracle = direct_dft(8, &samples);
        for (a, b) in f.coeffs().iter().zip(&oracle) {
            assert!((a - b).norm() < 1e-12);
        }
        let back = f.to_physical();
        for (a, b) in back.iter().zip(&samples) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let g = Grid::new(8).unwrap();
        assert!(ScalarField::from_physical(&g, &[0.0; 10]).is_err());
        assert!(Grid::new(6).is_ok());
        assert!(Grid::new(7).is_err());
        assert!(Grid::new(2).is_err());
    }

    #[test]
    fn derivative_of_sine_and_constant() {
        let g = Grid::new(16).unwrap();
        let s = ScalarField::from_fn(&g, |x, _| (TAU * x).sin());
        let d = s.dx(1);
        let expect = ScalarField::from_fn(&g, |x, _| TAU * (TAU * x).cos());
        assert!(d.max_coeff_diff(&expect) < 1e-12);
        assert!(ScalarField::constant(&g, 3.0).dx(2).max_abs_coeff() == 0.0);
    }

    #[test]
    fn mixed_derivative_of_single_mode() {
        // d1 d2 of Re e^{2 pi i (3 x1 - 2 x2)}: coefficient times (2 pi i 3)(2 pi i (-2)) = 24 pi^2.
        let g = Grid::new(16).unwrap();
        let f = ScalarField::real_mode(&g, 3, -2, Complex64::new(0.5, 0.0)).unwrap();
        let d = f.dx(1).dx(2);
        assert!((d.coeff(3, -2).re - 0.5 * 24.0 * PI * PI).abs() < 1e-10);
        assert!((d.coeff(-3, 2).re - 0.5 * 24.0 * PI * PI).abs() < 1e-10);
    }

    #[test]
    fn helmholtz_examples() {
        let g = Grid::new(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_scalar(&g, 3, 1.0, &mut rng);
        assert!(VectorField::gradient(&f).helmholtz_project().max_coeff_diff(&VectorField::zeros(&g)) < 1e-14);
        let p = VectorField::perp_gradient(&f);
        assert!(p.helmholtz_project().max_coeff_diff(&p) < 1e-14);
        // v(1,0) = (1,1) -> (0,1)
        let v = VectorField::new(
            ScalarField::real_mode(&g, 1, 0, Complex64::new(1.0, 0.0)).unwrap(),
            ScalarField::real_mode(&g, 1, 0, Complex64::new(1.0, 0.0)).unwrap(),
        );
        let pv = v.helmholtz_project();
        assert!(pv.c[0].coeff(1, 0).norm() < 1e-15);
        assert!((pv.c[1].coeff(1, 0).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn traceless_perp_and_mean() {
        let g = Grid::new(16).unwrap();
        let s = ScalarField::from_fn(&g, |x, y| (TAU * x).sin() * (TAU * y).cos() + 2.0);
        let t = SymTensorField::identity_times(&s).traceless();
        assert!(t.c.iter().all(|c| c.max_abs_coeff() < 1e-15));
        let f = ScalarField::from_fn(&g, |_, y| (TAU * y).sin());
        let p = VectorField::perp_gradient(&f);
        let expect = ScalarField::from_fn(&g, |_, y| TAU * (TAU * y).cos());
        assert!(p.c[0].max_coeff_diff(&expect) < 1e-12);
        assert!(p.c[1].max_abs_coeff() < 1e-12);
        let m = ScalarField::from_fn(&g, |x, _| 1.0 + (TAU * x).cos()).remove_mean();
        let c = ScalarField::from_fn(&g, |x, _| (TAU * x).cos());
        assert!(m.max_coeff_diff(&c) < 1e-14);
    }

    #[test]
    fn norm_examples() {
        let g = Grid::new(16).unwrap();
        let s = ScalarField::from_fn(&g, |x, _| (TAU * x).sin());
        assert!((s.norm(NormKind::Lp(2.0)) - 0.5f64.sqrt()).abs() < 1e-14);
        for sv in [-1.0, 0.5, 2.0] {
            assert!((ScalarField::constant(&g, 1.0).norm(NormKind::Hs(sv)) - 1.0).abs() < 1e-14);
        }
        let c = ScalarField::from_fn(&g, |x, _| (TAU * x).cos());
        let expect = ((1.0 + 4.0 * PI * PI) / 2.0).sqrt();
        assert!((c.norm(NormKind::Hs(1.0)) - expect).abs() < 1e-12);
        // quadrature oracle: H^1 norm squared = ||f||^2 + ||grad f||^2
        let quad = c.norm(NormKind::Lp(2.0)).powi(2) + VectorField::gradient(&c).norm(NormKind::Lp(2.0)).powi(2);
        assert!((quad.sqrt() - expect).abs() < 1e-12);
        assert!((c.norm(NormKind::Linf) - 1.0).abs() < 1e-14);
        assert!((c.norm(NormKind::Wsp(0.0, 2.0)) - c.norm(NormKind::Lp(2.0))).abs() < 1e-14);
        assert!((c.norm(NormKind::CN(1)) - (1.0 + TAU)).abs() < 1e-12);
    }

    #[test]
    fn product_matches_direct_convolution() {
        let g = Grid::new(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = random_scalar(&g, 3, 0.0, &mut rng);
        let h = random_scalar(&g, 3, 0.0, &mut rng);
        let p = f.product(&h);
        for i in 0..g.len() {
            let (k1, k2) = g.mode(i);
            let mut acc = Complex64::new(0.0, 0.0);
            if g.retained(i) {
                for a in -3..=3i64 {
                    for b in -3..=3i64 {
                        let (c1, c2) = (k1 - a, k2 - b);
                        if c1.abs() <= 3 && c2.abs() <= 3 {
                            acc += f.coeff(a, b) * h.coeff(c1, c2);
                        }
                    }
                }
            }
            assert!((acc - p.coeffs()[i]).norm() < 1e-13);
        }
    }

    #[test]
    fn dump_round_trip_is_bit_exact() {
        let g = Grid::new(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = random_vector(&g, 3, 1.0, &mut rng);
        let mut buf = Vec::new();
        write_field_dump(&mut buf, -0.25, &v).unwrap();
        let (h, s) = read_dump(&mut std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(h.grid_size, 8);
        assert_eq!(h.components, 2);
        assert_eq!(h.time, -0.25);
        let orig = v.physical();
        for (a, b) in s.iter().zip(&orig) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn time_series_rejects_bad_step() {
        let g = Grid::new(8).unwrap();
        assert!(TimeSeries::new(-1.0, 0.0, vec![ScalarField::zeros(&g)]).is_err());
        let ts = TimeSeries::new(-1.0, 0.25, vec![ScalarField::zeros(&g); 9]).unwrap();
        assert_eq!(ts.index_at(0.0), Some(4));
        assert_eq!(ts.index_at(5.0), None);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn random_fields_are_real(seed in any::<u64>()) {
            let g = Grid::new(8).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_scalar(&g, 3, 1.0, &mut rng);
            for i in 0..g.len() {
                let j = g.neg_index(i);
                prop_assert!((f.coeffs()[i] - f.coeffs()[j].conj()).norm() < 1e-15);
            }
            let phys = ScalarField::from_physical(&g, &f.to_physical()).unwrap();
            prop_assert!(phys.max_coeff_diff(&f) < 1e-13);
        }

        #[test]
        fn calculus_consistency(seed in any::<u64>()) {
            let g = Grid::new(16).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_scalar(&g, 7, 1.0, &mut rng);
            let v = random_vector(&g, 7, 1.0, &mut rng);
            prop_assert!(VectorField::perp_gradient(&f).div().max_abs_coeff() < 1e-12);
            let p = v.helmholtz_project();
            prop_assert!(p.div().max_abs_coeff() < 1e-12);
            prop_assert!(p.helmholtz_project().max_coeff_diff(&p) < 1e-12);
        }

        #[test]
        fn parseval(seed in any::<u64>()) {
            let g = Grid::new(16).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_scalar(&g, 8, 0.5, &mut rng);
            let l2 = f.norm(NormKind::Lp(2.0)).powi(2);
            prop_assert!((l2 - f.energy()).abs() <= 1e-10 * f.energy());
        }
    }
}
