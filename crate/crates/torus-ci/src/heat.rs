//! Heat semigroup, exponential Duhamel integrator and the contraction map of the
//! mild formulation.

use crate::error::{Error, Result};
use crate::field::{Field, Grid, NormKind, ScalarField, TimeSeries, VectorField};
use crate::harmonic::{besov_norm, BesovIndex};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

fn decay_rate(k1: i64, k2: i64) -> f64 {
    4.0 * PI * PI * (k1 * k1 + k2 * k2) as f64
}

/// `P_t f = e^{t Delta} f`.
pub fn heat_semigroup<F: Field>(f: &F, t: f64) -> Result<F> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    Ok(f.map(|c| c.apply_real_multiplier(|a, b| (-decay_rate(a, b) * t).exp())))
}

/// Per-mode exponential stepper for `du/dt = Delta u + f` with `f` frozen over a step.
#[derive(Clone, Debug)]
pub struct EtdStepper {
    dt: f64,
    decay: Vec<f64>,
    phi: Vec<f64>,
}

impl EtdStepper {
    pub fn new(grid: &Grid, dt: f64) -> Self {
        let mut decay = Vec::with_capacity(grid.len());
        let mut phi = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let (a, b) = grid.mode(i);
            let l = decay_rate(a, b);
            decay.push((-l * dt).exp());
            phi.push(if l == 0.0 { dt } else { -(-l * dt).exp_m1() / l });
        }
        EtdStepper { dt, decay, phi }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `e^{dt Delta} u + phi(dt) f`.
    pub fn step<F: Field>(&self, u: &F, f: &F) -> F {
        u.zip(f, |a, b| {
            let coeffs: Vec<Complex64> = a
                .coeffs()
                .iter()
                .zip(b.coeffs())
                .enumerate()
                .map(|(i, (x, y))| x * self.decay[i] + y * self.phi[i])
                .collect();
            ScalarField::from_coeffs(a.grid(), coeffs).expect("same grid")
        })
    }
}

/// Trajectory `I f(t_n)` for every grid time starting at the first sample, with
/// piecewise-constant (left-point) forcing.
pub fn duhamel_trajectory<F: Field>(f: &TimeSeries<F>) -> TimeSeries<F> {
    let stepper = EtdStepper::new(f.values[0].grid(), f.dt);
    let mut out = Vec::with_capacity(f.len());
    let mut u = f.values[0].zeros_like();
    out.push(u.clone());
    for n in 0..f.len() - 1 {
        u = stepper.step(&u, &f.values[n]);
        out.push(u.clone());
    }
    TimeSeries { t0: f.t0, dt: f.dt, values: out }
}

/// `I f(t) = int_0^t P_{t-s} f(s) ds` with `f` piecewise constant on the grid.
pub fn duhamel<F: Field>(f: &TimeSeries<F>, t: f64) -> Result<F> {
    let range = || Error::TimeOutOfRange { t, start: f.t0, end: f.t_end() };
    let start = f.index_at(0.0).ok_or_else(range)?;
    let end = f.index_at(t).ok_or_else(range)?;
    if end < start {
        return Err(range());
    }
    let stepper = EtdStepper::new(f.values[0].grid(), f.dt);
    let mut u = f.values[0].zeros_like();
    for n in start..end {
        u = stepper.step(&u, &f.values[n]);
    }
    Ok(u)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SchauderReport {
    pub times: Vec<f64>,
    pub ratios: Vec<f64>,
    pub sup: f64,
}

/// `t^{theta/2} |P_t f|_{B^{theta+alpha}_{p,inf}} / |f|_{B^alpha_{p,inf}}` over a sweep of times.
pub fn schauder_monitor<F: Field>(f: &F, theta: f64, alpha: f64, p: f64, t_sweep: &[f64]) -> Result<SchauderReport> {
    let base = besov_norm(f, BesovIndex::new(alpha, p, f64::INFINITY)?);
    let mut ratios = Vec::new();
    for &t in t_sweep {
        if t <= 0.0 {
            return Err(Error::InvalidArgument(format!("sweep time {t} must be positive")));
        }
        let pt = heat_semigroup(f, t)?;
        let v = besov_norm(&pt, BesovIndex::new(theta + alpha, p, f64::INFINITY)?);
        ratios.push(if base > 0.0 { t.powf(theta / 2.0) * v / base } else { 0.0 });
    }
    let sup = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(SchauderReport { times: t_sweep.to_vec(), ratios, sup })
}

/// `(sum_n dt |f_n|_{H^s}^2)^{1/2}` over the first `steps` samples.
pub fn l2_hs<F: Field>(f: &TimeSeries<F>, s: f64, steps: usize) -> f64 {
    (f.values.iter().take(steps).map(|v| v.norm(NormKind::Hs(s)).powi(2)).sum::<f64>() * f.dt).sqrt()
}

/// `|I f|_{L^2 H^beta} / |f|_{L^2 H^{beta-2}}`.
pub fn duhamel_l2_monitor<F: Field>(f: &TimeSeries<F>, beta: f64) -> f64 {
    let u = duhamel_trajectory(f);
    let den = l2_hs(f, beta - 2.0, f.len());
    if den > 0.0 {
        l2_hs(&u, beta, u.len()) / den
    } else {
        0.0
    }
}

/// `div(a (x) b)_i = d_j (a_i b_j)` with dealiased products.
pub fn div_outer(a: &VectorField, b: &VectorField) -> VectorField {
    let pa = a.padded();
    let pb = b.padded();
    let e = |i: usize, j: usize| pa[i].mul(&pb[j]).to_field();
    VectorField::new(e(0, 0).dx(1).add(&e(0, 1).dx(2)), e(1, 0).dx(1).add(&e(1, 1).dx(2)))
}

/// `|Phi(w)|_{L^2 H^zeta} / |w|_{L^2 H^zeta}` with `w = v1 - v2` and
/// `Phi(w) = -I[P_H div((v1 + z) (x) w + w (x) (v2 + z))]` on `[0, T*]`.
pub fn contraction_factor(
    v1: &TimeSeries<VectorField>,
    v2: &TimeSeries<VectorField>,
    z: &TimeSeries<VectorField>,
    t_star: f64,
    zeta: f64,
    kappa: f64,
) -> Result<f64> {
    let e = 2.0 * kappa + zeta;
    if !(e > 0.0 && e < 1.0) {
        return Err(Error::InvalidArgument(format!("need 0 < 2 kappa + zeta < 1, got {e}")));
    }
    if v1.len() != v2.len() || v1.len() != z.len() || v1.t0 != 0.0 || (v1.dt - v2.dt).abs() > 0.0 {
        return Err(Error::InvalidArgument("trajectories must share a grid starting at 0".into()));
    }
    let steps = ((t_star / v1.dt).round() as usize + 1).min(v1.len());
    if steps < 2 {
        return Err(Error::InvalidArgument(format!("T* = {t_star} shorter than one step")));
    }
    let mut forcing = Vec::with_capacity(steps);
    let mut w = Vec::with_capacity(steps);
    for n in 0..steps {
        let wn = v1.values[n].minus(&v2.values[n]);
        let a = v1.values[n].plus(&z.values[n]);
        let b = v2.values[n].plus(&z.values[n]);
        let d = div_outer(&a, &wn).plus(&div_outer(&wn, &b));
        forcing.push(d.helmholtz_project().scaled(-1.0));
        w.push(wn);
    }
    let w = TimeSeries::new(0.0, v1.dt, w)?;
    let den = l2_hs(&w, zeta, steps);
    if den == 0.0 {
        return Ok(0.0);
    }
    let phi = duhamel_trajectory(&TimeSeries::new(0.0, v1.dt, forcing)?);
    Ok(l2_hs(&phi, zeta, steps) / den)
}
