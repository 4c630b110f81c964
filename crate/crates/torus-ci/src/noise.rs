//! Leray-projected stochastic convolution, its spatial mollification, the Wick
//! square and the stopping times controlling them.

use crate::error::{Error, Result};
use crate::field::{Field, Grid, ScalarField, SymTensorField, TimeSeries, VectorField};
use crate::harmonic::{cutoff, holder_norm};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub seed: u64,
    /// Modes with `|k|_inf <= mode_cutoff` are driven.
    pub mode_cutoff: usize,
    pub dt: f64,
    pub include_zero_mode: bool,
    /// Spatial mollification scale; the symbol is `chi(eps |k|)`.
    pub eps: f64,
    /// Multiplies the noise; 0 switches it off.
    pub amplitude: f64,
}

impl NoiseConfig {
    pub fn new(seed: u64, mode_cutoff: usize, dt: f64) -> Self {
        NoiseConfig { seed, mode_cutoff, dt, include_zero_mode: false, eps: 0.0, amplitude: 1.0 }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!("noise dt must be positive, got {}", self.dt)));
        }
        if self.mode_cutoff + 1 > grid.n() / 2 {
            return Err(Error::InvalidArgument(format!(
                "mode cutoff {} exceeds N/2 - 1 = {}",
                self.mode_cutoff,
                grid.n() / 2 - 1
            )));
        }
        if self.eps < 0.0 {
            return Err(Error::InvalidArgument("eps must be nonnegative".into()));
        }
        Ok(())
    }

    /// Mollifier symbol at mode `k`.
    pub fn mollifier(&self, k1: i64, k2: i64) -> f64 {
        cutoff(self.eps * ((k1 * k1 + k2 * k2) as f64).sqrt())
    }
}

/// Seed of ensemble member `index`: `splitmix64(master ^ splitmix64(index))`.
pub fn member_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
struct DrivenMode {
    idx: usize,
    neg: usize,
    decay: f64,
    sd: f64,
    proj: [[f64; 2]; 2],
}

fn driven_modes(grid: &Grid, cutoff: usize) -> Vec<DrivenMode> {
    let c = cutoff as i64;
    let mut out = Vec::new();
    for k1 in 0..=c {
        for k2 in -c..=c {
            if k1 == 0 && k2 <= 0 {
                continue;
            }
            let idx = grid.index_of(k1, k2).expect("cutoff below Nyquist");
            let kk = (k1 * k1 + k2 * k2) as f64;
            let (a, b) = (k1 as f64, k2 as f64);
            out.push(DrivenMode {
                idx,
                neg: grid.neg_index(idx),
                decay: 0.0,
                sd: 0.0,
                proj: [[1.0 - a * a / kk, -a * b / kk], [-a * b / kk, 1.0 - b * b / kk]],
            });
        }
    }
    out
}

/// Standard complex Gaussian increments (`E|xi|^2 = 1` per component), one block per step.
#[derive(Clone, Debug)]
pub struct WienerIncrements {
    pub dt: f64,
    modes: usize,
    /// `xi[step][mode] = [xi_1, xi_2]`.
    xi: Vec<Vec<[Complex64; 2]>>,
    zero: Vec<[f64; 2]>,
}

fn step_increments(seed: u64, step: usize, modes: usize) -> (Vec<[Complex64; 2]>, [f64; 2]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step as u64);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    let v = (0..modes)
        .map(|_| {
            let a = Complex64::new(draw() * h, draw() * h);
            let b = Complex64::new(draw() * h, draw() * h);
            [a, b]
        })
        .collect();
    (v, [draw(), draw()])
}

impl WienerIncrements {
    pub fn generate(cfg: &NoiseConfig, steps: usize) -> Self {
        let modes = (2 * cfg.mode_cutoff + 1).pow(2) / 2;
        let (xi, zero) = (0..steps).map(|s| step_increments(cfg.seed, s, modes)).unzip();
        WienerIncrements { dt: cfg.dt, modes, xi, zero }
    }

    pub fn steps(&self) -> usize {
        self.xi.len()
    }

    /// Redraw every increment whose interval starts at or after `t`, from `seed`.
    pub fn redraw_after(&mut self, t: f64, seed: u64) {
        for s in 0..self.xi.len() {
            if s as f64 * self.dt >= t - 1e-12 {
                let (v, z) = step_increments(seed, s, self.modes);
                self.xi[s] = v;
                self.zero[s] = z;
            }
        }
    }
}

/// Realized stochastic objects on the grid times `0, dt, .., T`.
#[derive(Clone, Debug)]
pub struct NoisePath {
    pub cfg: NoiseConfig,
    pub z: TimeSeries<VectorField>,
    pub z_eps: TimeSeries<VectorField>,
    /// `C_eps(t_n)`.
    pub renorm: Vec<[[f64; 2]; 2]>,
}

impl NoisePath {
    /// Path built from an externally supplied trajectory (no renormalization).
    pub fn from_series(cfg: NoiseConfig, z: TimeSeries<VectorField>) -> Self {
        let renorm = vec![[[0.0; 2]; 2]; z.len()];
        let z_eps = z.clone();
        NoisePath { cfg, z, z_eps, renorm }
    }

    /// Identically zero path on `[0, t_end]`.
    pub fn zero(grid: &Grid, dt: f64, t_end: f64) -> Self {
        let steps = (t_end / dt).round() as usize;
        let mut cfg = NoiseConfig::new(0, 0, dt);
        cfg.amplitude = 0.0;
        let z = TimeSeries { t0: 0.0, dt, values: vec![VectorField::zeros(grid); steps + 1] };
        Self::from_series(cfg, z)
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn grid(&self) -> &Grid {
        self.z.values[0].grid()
    }

    /// `z_eps (x) z_eps - C_eps` at grid time `n`.
    pub fn wick_at(&self, n: usize) -> SymTensorField {
        let ze = &self.z_eps.values[n];
        let sq = VectorField::outer_self(ze);
        let c = self.renorm[n];
        sq.minus(&SymTensorField::constant(ze.grid(), c))
    }

    /// Every `factor`-th time of the path (same realization on a coarser time grid).
    pub fn subsample(&self, factor: usize) -> Result<NoisePath> {
        if factor == 0 || (self.len() - 1) % factor != 0 {
            return Err(Error::InvalidArgument(format!("cannot subsample {} steps by {factor}", self.len() - 1)));
        }
        let pick = |s: &TimeSeries<VectorField>| TimeSeries {
            t0: s.t0,
            dt: s.dt * factor as f64,
            values: s.values.iter().step_by(factor).cloned().collect(),
        };
        let mut cfg = self.cfg.clone();
        cfg.dt *= factor as f64;
        Ok(NoisePath { cfg, z: pick(&self.z), z_eps: pick(&self.z_eps), renorm: self.renorm.iter().step_by(factor).copied().collect() })
    }

    /// Value of `z` at an arbitrary grid-aligned time; zero for `t < 0`.
    pub fn z_at(&self, t: f64) -> Result<VectorField> {
        if t < 0.0 {
            return Ok(VectorField::zeros(self.grid()));
        }
        let n = self.z.index_at(t).ok_or(Error::TimeOutOfRange { t, start: 0.0, end: self.z.t_end() })?;
        Ok(self.z.values[n].clone())
    }
}

/// Exact Ornstein-Uhlenbeck sampling of `z` on `[0, t_end]`.
pub fn sample_z(cfg: &NoiseConfig, grid: &Grid, t_end: f64) -> Result<NoisePath> {
    cfg.validate(grid)?;
    if !(t_end > 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {t_end}")));
    }
    let steps = (t_end / cfg.dt).round() as usize;
    let inc = WienerIncrements::generate(cfg, steps);
    sample_with_increments(cfg, grid, &inc)
}

/// Same as `sample_z` but driven by the given increments.
pub fn sample_with_increments(cfg: &NoiseConfig, grid: &Grid, inc: &WienerIncrements) -> Result<NoisePath> {
    cfg.validate(grid)?;
    let mut modes = driven_modes(grid, cfg.mode_cutoff);
    for m in modes.iter_mut() {
        let (k1, k2) = grid.mode(m.idx);
        let l = 4.0 * PI * PI * (k1 * k1 + k2 * k2) as f64;
        m.decay = (-l * cfg.dt).exp();
        m.sd = (-(-2.0 * l * cfg.dt).exp_m1() / (2.0 * l)).sqrt() * cfg.amplitude;
    }
    let zero_sd = cfg.dt.sqrt() * cfg.amplitude;
    let mut c = [vec![Complex64::new(0.0, 0.0); grid.len()], vec![Complex64::new(0.0, 0.0); grid.len()]];
    let mut values = Vec::with_capacity(inc.steps() + 1);
    let to_field = |c: &[Vec<Complex64>; 2]| {
        VectorField::new(
            ScalarField::from_coeffs(grid, c[0].clone()).expect("grid"),
            ScalarField::from_coeffs(grid, c[1].clone()).expect("grid"),
        )
    };
    values.push(to_field(&c));
    for s in 0..inc.steps() {
        for (m, xi) in modes.iter().zip(&inc.xi[s]) {
            let p = m.proj;
            let d = [p[0][0] * xi[0] + p[0][1] * xi[1], p[1][0] * xi[0] + p[1][1] * xi[1]];
            for comp in 0..2 {
                let v = c[comp][m.idx] * m.decay + d[comp] * m.sd;
                c[comp][m.idx] = v;
                c[comp][m.neg] = v.conj();
            }
        }
        if cfg.include_zero_mode {
            for comp in 0..2 {
                c[comp][0] += Complex64::new(inc.zero[s][comp] * zero_sd, 0.0);
            }
        }
        values.push(to_field(&c));
    }
    let z = TimeSeries::new(0.0, cfg.dt, values)?;
    let z_eps = if cfg.eps > 0.0 {
        let vals = z.values.iter().map(|v| v.map(|s| s.apply_real_multiplier(|a, b| cfg.mollifier(a, b)))).collect();
        TimeSeries::new(0.0, cfg.dt, vals)?
    } else {
        z.clone()
    };
    let renorm = (0..z.len()).map(|n| renorm_constant(cfg, z.time(n))).collect();
    Ok(NoisePath { cfg: cfg.clone(), z, z_eps, renorm })
}

/// `C_eps(t) = sum_{0 < |k|_inf <= cutoff} chi(eps k)^2 (1 - e^{-8 pi^2 |k|^2 t}) / (8 pi^2 |k|^2) (Id - k k^T / |k|^2)`.
pub fn renorm_constant(cfg: &NoiseConfig, t: f64) -> [[f64; 2]; 2] {
    let c = cfg.mode_cutoff as i64;
    let mut m = [[0.0; 2]; 2];
    for k1 in -c..=c {
        for k2 in -c..=c {
            if k1 == 0 && k2 == 0 {
                continue;
            }
            let kk = (k1 * k1 + k2 * k2) as f64;
            let l = 8.0 * PI * PI * kk;
            let w = cfg.mollifier(k1, k2).powi(2) * (-(-l * t).exp_m1()) / l;
            let (a, b) = (k1 as f64, k2 as f64);
            m[0][0] += w * (1.0 - a * a / kk);
            m[0][1] += w * (-a * b / kk);
            m[1][1] += w * (1.0 - b * b / kk);
        }
    }
    if cfg.include_zero_mode {
        m[0][0] += t;
        m[1][1] += t;
    }
    let a2 = cfg.amplitude * cfg.amplitude;
    m[1][0] = m[0][1];
    m.map(|r| r.map(|v| v * a2))
}

/// Full trajectory of `z_eps (x) z_eps - C_eps`.
pub fn wick_square(path: &NoisePath) -> Result<TimeSeries<SymTensorField>> {
    if path.renorm.len() != path.z_eps.len() {
        return Err(Error::InvalidArgument("missing renormalization constants".into()));
    }
    let values = (0..path.len()).into_par_iter().map(|n| path.wick_at(n)).collect();
    TimeSeries::new(path.z.t0, path.z.dt, values)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingParams {
    pub level: f64,
    pub kappa: f64,
    pub p: f64,
    /// Lag window (in steps) of the discrete time-Hoelder quotients.
    pub window: usize,
}

impl StoppingParams {
    pub fn new(level: f64, kappa: f64, p: f64) -> Result<Self> {
        let sp = StoppingParams { level, kappa, p, window: 64 };
        sp.validate()?;
        Ok(sp)
    }

    pub fn kappa0(&self) -> f64 {
        (1.0 - 1.0 / self.p).min(2.0 / self.p - 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.level < 2.0 {
            return Err(Error::InvalidArgument(format!("L must be >= 2, got {}", self.level)));
        }
        if !(self.p > 1.0 && self.p < 2.0) {
            return Err(Error::InvalidArgument(format!("p must lie in (1,2), got {}", self.p)));
        }
        if !(self.kappa > 0.0 && self.kappa < self.kappa0()) {
            return Err(Error::InvalidArgument(format!("kappa must lie in (0, {}), got {}", self.kappa0(), self.kappa)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingTimes {
    pub t_l: f64,
    pub t_l1: f64,
    pub t_l2: f64,
    pub t_l3: f64,
}

/// First grid time where `series[n] >= threshold`, capped at `cap`.
fn first_crossing(times: &[f64], series: &[f64], threshold: f64, cap: f64) -> f64 {
    times.iter().zip(series).find(|(_, v)| **v >= threshold).map(|(t, _)| t.min(cap)).unwrap_or(cap)
}

/// Running `sup_{s<=t} |z(s)|_{C^beta} + sup |z(t')-z(s)|_{C^beta} / |t'-s|^theta` over lags `<= window`.
pub fn running_time_holder(z: &TimeSeries<VectorField>, theta: f64, beta: f64, window: usize, upto: usize) -> Vec<f64> {
    let n = upto.min(z.len());
    let sup: Vec<f64> = (0..n).into_par_iter().map(|i| holder_norm(&z.values[i], beta)).collect();
    let quot: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i.saturating_sub(window)..i)
                .map(|m| {
                    let d = z.values[i].minus(&z.values[m]);
                    holder_norm(&d, beta) / ((i - m) as f64 * z.dt).powf(theta)
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let (mut a, mut b) = (0.0f64, 0.0f64);
    (0..n)
        .map(|i| {
            a = a.max(sup[i]);
            b = b.max(quot[i]);
            a + b
        })
        .collect()
}

/// `T_L = T_L^1 ^ T_L^2 ^ T_L^3`.
pub fn stopping_time(path: &NoisePath, sp: &StoppingParams) -> Result<StoppingTimes> {
    sp.validate()?;
    let l = sp.level;
    if path.z.t_end() < l - 1e-9 {
        return Err(Error::InvalidArgument(format!("path ends at {} before L = {l}", path.z.t_end())));
    }
    stopping_upto(path, sp, l)
}

/// Stopping times of a path that may end before `L`: every threshold is still
/// `L`-based, the cap is `min(L, path end)`. The flag reports whether `T_L` hit the
/// end of the path without a threshold crossing (censored).
pub fn stopping_time_capped(path: &NoisePath, sp: &StoppingParams) -> Result<(StoppingTimes, bool)> {
    sp.validate()?;
    let cap = sp.level.min(path.z.t_end());
    let st = stopping_upto(path, sp, cap)?;
    Ok((st, cap < sp.level && st.t_l >= cap))
}

fn stopping_upto(path: &NoisePath, sp: &StoppingParams, cap: f64) -> Result<StoppingTimes> {
    let l = sp.level;
    let upto = (((cap - path.z.t0) / path.z.dt + 1e-9).floor() as usize).min(path.len() - 1) + 1;
    let times: Vec<f64> = (0..upto).map(|i| path.z.time(i)).collect();
    let (k, k0) = (sp.kappa, sp.kappa0());
    let z1: Vec<f64> = (0..upto).into_par_iter().map(|i| holder_norm(&path.z.values[i], -k)).collect();
    let t1 = first_crossing(&times, &z1, l.powf(0.25), cap);
    let ha = running_time_holder(&path.z, k0 / 2.0, -k - k0, sp.window, upto);
    let hb = running_time_holder(&path.z, (1.0 - 2.0 * k - k0) / 4.0, -0.5 + k0 / 2.0, sp.window, upto);
    let t2 = first_crossing(&times, &ha, l.powf(0.25), l).min(first_crossing(&times, &hb, l.powf(0.25), cap));
    let w: Vec<f64> = (0..upto).into_par_iter().map(|i| holder_norm(&path.wick_at(i), -2.0 * k)).collect();
    let t3 = first_crossing(&times, &w, l.sqrt(), cap);
    Ok(StoppingTimes { t_l: t1.min(t2).min(t3), t_l1: t1, t_l2: t2, t_l3: t3 })
}

/// One row of an ensemble summary table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRow {
    pub path_id: u64,
    pub t: f64,
    pub norm_kind: String,
    pub value: f64,
}
