//! Level-by-level driver: initial level, construction of level `q + 1` from level
//! `q`, diagnostics and the PDE residual.

use super::construct::{
    amplitudes, assemble_stress, identity_defect, noise_flux, perturbation, smooth, Mollified, StressInputs, TimeKernel,
    STRESS_NAMES,
};
use super::ledger::{window, LedgerRow};
use super::params::{IterationParams, LevelPlan};
use super::solve::{solve_v1, PicardLog, V1Forcing};
use super::track::{samples_to_components, Track};
use crate::error::{Error, Result};
use crate::field::{lp_of_samples, Field, Grid, NormKind, SymTensorField, VectorField};
use crate::harmonic::{band, localize, Side};
use crate::heat::heat_semigroup;
use crate::jets::{JetSystem, StationaryJet};
use crate::noise::{stopping_time_capped, NoisePath, StoppingParams, StoppingTimes};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const TENSOR_W: [f64; 3] = [1.0, 2.0, 1.0];
const VECTOR_W: [f64; 2] = [1.0, 1.0];

/// Targets of the diagnostics that are not fixed by the schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    /// Multiplies every schedule bound.
    pub bound_ratio: f64,
    /// Required ratio of consecutive stress norms.
    pub headline_target: f64,
    pub identity_tol: f64,
    pub divergence_tol: f64,
    pub reconstruction_tol: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig { bound_ratio: 1.0, headline_target: 0.7, identity_tol: 1e-8, divergence_tol: 1e-10, reconstruction_tol: 1e-9 }
    }
}

/// Everything fixed for a run: parameters, grid, horizon, initial datum and noise.
pub struct Context {
    pub params: IterationParams,
    pub diag: DiagnosticsConfig,
    pub grid: Grid,
    pub dt: f64,
    pub steps: usize,
    pub stopping: StoppingTimes,
    /// `T_L` reached the end of the sampled path without a threshold crossing.
    pub censored: bool,
    pub t_max: f64,
    pub u0: VectorField,
    pub path: NoisePath,
    pub js: JetSystem,
    noise_on: bool,
}

impl Context {
    /// Validates `u0`, computes `T_L` on the path and fixes the horizon
    /// `T = min(T_L, t_max)` rounded down to the grid.
    pub fn new(params: IterationParams, diag: DiagnosticsConfig, u0: VectorField, path: NoisePath, t_max: f64, window: usize) -> Result<Self> {
        params.validate()?;
        let grid = path.grid().clone();
        if u0.grid() != &grid {
            return Err(Error::GridMismatch(u0.grid().n(), grid.n()));
        }
        let div = u0.div().norm(NormKind::Linf);
        if div > 1e-10 {
            return Err(Error::NotDivergenceFree(div));
        }
        let lp = u0.norm(NormKind::Lp(params.p));
        if lp > params.n_bound {
            return Err(Error::InvalidArgument(format!("|u0|_L^p = {lp} exceeds N = {}", params.n_bound)));
        }
        let mut sp = StoppingParams::new(params.level_l, params.kappa, params.p)?;
        sp.window = window.max(1);
        let (stopping, censored) = stopping_time_capped(&path, &sp)?;
        let dt = path.z.dt;
        let horizon = stopping.t_l.min(t_max).min(path.z.t_end());
        let steps = (horizon / dt + 1e-9).floor() as usize;
        if steps < 2 {
            return Err(Error::InvalidArgument(format!("horizon {horizon} shorter than two time steps")));
        }
        let noise_on = path.z.values.iter().any(|z| z.components().iter().any(|c| c.max_abs_coeff() > 0.0))
            || path.renorm.iter().any(|c| c.iter().flatten().any(|v| *v != 0.0));
        Ok(Context { params, diag, grid, dt, steps, stopping, censored, t_max, u0, path, js: JetSystem::new(), noise_on })
    }

    pub fn t_end(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    /// `e^{|t| Delta} u0`, the heat flow extended evenly to negative times.
    pub fn z_in(&self, t: f64) -> VectorField {
        heat_semigroup(&self.u0, t.abs()).expect("nonnegative time")
    }

    fn nonzero(v: VectorField) -> Option<VectorField> {
        if v.components().iter().all(|c| c.max_abs_coeff() == 0.0) {
            None
        } else {
            Some(v)
        }
    }

    /// `(Delta_{<= R} z, Delta_{> R} z)` at step `n`.
    pub fn z_split(&self, n: usize) -> (Option<VectorField>, Option<VectorField>) {
        if !self.noise_on {
            return (None, None);
        }
        let z = &self.path.z.values[n];
        let r = self.params.r_cut;
        (Self::nonzero(localize(z, r, Side::AtMost)), Self::nonzero(localize(z, r, Side::Above)))
    }

    pub fn wick(&self, n: usize) -> SymTensorField {
        if self.noise_on {
            self.path.wick_at(n)
        } else {
            SymTensorField::zeros(&self.grid)
        }
    }

    /// `Delta_{<= f} Delta_{> R} z` at step `n`.
    pub fn z_band(&self, n: usize, f: i32) -> Option<VectorField> {
        if !self.noise_on || f <= self.params.r_cut {
            return None;
        }
        Self::nonzero(band(&self.path.z.values[n], self.params.r_cut, f))
    }

    /// Trace-free flux `V (x) V + noise terms` for `V = v + z_in`.
    pub fn flux(&self, v: &VectorField, n: usize) -> SymTensorField {
        let big_v = v.plus(&self.z_in(self.time(n)));
        let (lo, hi) = self.z_split(n);
        VectorField::outer_self(&big_v).plus(&noise_flux(&big_v, lo.as_ref(), hi.as_ref())).traceless()
    }

    /// Stress (and flux) of every level at the negative time `-j dt`.
    pub fn extension(&self, j: usize) -> SymTensorField {
        VectorField::outer_self(&self.z_in(-(j as f64) * self.dt)).traceless()
    }

    fn v1_forcing(&self, n: usize, v2: Option<&Track>, f: i32) -> V1Forcing {
        let mut drift = self.z_in(self.time(n));
        if let Some(v2) = v2 {
            drift = drift.plus(&v2.get::<VectorField>(n));
        }
        V1Forcing { wick: self.wick(n), drift, band: self.z_band(n, f) }
    }
}

/// Scalar per-time series of a level used by the ledger.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct LevelSeries {
    /// `|R_q(t_n)|_{L^1}`.
    pub stress_l1: Vec<f64>,
    /// `|v2_q(t_n)|_{L^2}^2`.
    pub v2_l2sq: Vec<f64>,
    pub v2_lp: Vec<f64>,
    /// `|v2_q(t_n)|_{C^1_x}`.
    pub v2_c1: Vec<f64>,
    /// `|v2_q(t_{n+1}) - v2_q(t_n)|_{L^inf} / dt`.
    pub v2_dt: Vec<f64>,
    /// PDE residual in `H^{-2}` (zero at the end points).
    pub residual: Vec<f64>,
    /// `|R_q(-j dt)|_{L^1}` for `j = 1, 2, ..` down to `t_q`.
    pub ext_stress_l1: Vec<f64>,
}

/// Worst values of the pointwise checks over all times of a level.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelChecks {
    pub identity_quadratic: f64,
    pub identity_stream: f64,
    pub reconstruction: f64,
    pub amplitude_guard: f64,
    pub divergence: f64,
    pub stress_trace: f64,
    pub v2_early: f64,
    pub checked_times: usize,
    pub active_directions: Vec<usize>,
    pub max_simultaneous: usize,
    /// `|R_part|_{L^1_t L^1}` on `(0, T]` for each stress component.
    pub components: Vec<(String, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: usize,
    pub plan: Option<LevelPlan>,
    pub rows: Vec<LedgerRow>,
    pub checks: LevelChecks,
    pub picard: PicardLog,
    pub series: LevelSeries,
}

/// Level `q` on the grid times `0..=steps`.
#[derive(Clone, Debug)]
pub struct LevelState {
    pub q: usize,
    pub v1: Track,
    pub v2: Track,
    pub stress: Track,
    pub flux: Track,
    pub report: LevelReport,
}

fn sup_abs(s: &[f64]) -> f64 {
    s.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn concat<F: Field>(f: &F) -> Vec<f64> {
    f.physical().concat()
}

fn split(s: &[f64], comps: usize) -> Vec<Vec<f64>> {
    s.chunks(s.len() / comps).map(|c| c.to_vec()).collect()
}


/// Level 0: `v2 = 0`, `v1` from the fixed point, `R_0` equal to the trace-free flux.
pub fn init_state(ctx: &Context) -> Result<LevelState> {
    let f0 = ctx.params.f_index(0);
    let (v1, picard) = solve_v1(&ctx.grid, ctx.dt, ctx.steps, |n| ctx.v1_forcing(n, None, f0))?;
    let flux_s: Vec<Vec<f64>> = (0..=ctx.steps).into_par_iter().map(|n| concat(&ctx.flux(&v1.get(n), n))).collect();
    let mut flux = Track::new(&ctx.grid, 3, ctx.dt);
    flux_s.into_iter().for_each(|s| flux.push_samples(s));
    let mut v2 = Track::new(&ctx.grid, 2, ctx.dt);
    let zero = VectorField::zeros(&ctx.grid);
    (0..=ctx.steps).for_each(|_| v2.push(&zero));
    let divergence = (0..=ctx.steps).into_par_iter().map(|n| v1.get::<VectorField>(n).div().norm(NormKind::Linf)).reduce(|| 0.0, f64::max);
    let mut state = LevelState {
        q: 0,
        v1,
        v2,
        stress: flux.clone(),
        flux,
        report: LevelReport {
            level: 0,
            plan: None,
            rows: Vec::new(),
            checks: LevelChecks { divergence, ..Default::default() },
            picard,
            series: LevelSeries::default(),
        },
    };
    state.report.series = level_series(ctx, &state);
    state.report.rows = level_rows(ctx, &state, None);
    Ok(state)
}

/// Mollification of level `q` at step `n`, with the negative-time extension.
fn mollify(ctx: &Context, prev: &LevelState, kern: &TimeKernel, ext: &[Vec<f64>], n: usize, with_flux: bool) -> Mollified {
    let len = ctx.grid.len();
    let (mut v, mut r, mut dr, mut q) = (vec![0.0; 2 * len], vec![0.0; 3 * len], vec![0.0; 3 * len], vec![0.0; 3 * len]);
    let axpy = |acc: &mut [f64], c: f64, x: &[f64]| acc.iter_mut().zip(x).for_each(|(a, b)| *a += c * b);
    for j in 1..=kern.lags() {
        let (w, dw) = (kern.w[j - 1], kern.dw[j - 1]);
        if j <= n {
            let m = n - j;
            axpy(&mut v, w, prev.v2.samples(m));
            axpy(&mut r, w, prev.stress.samples(m));
            axpy(&mut dr, dw, prev.stress.samples(m));
            if with_flux {
                axpy(&mut q, w, prev.flux.samples(m));
            }
        } else {
            let e = &ext[j - n - 1];
            axpy(&mut r, w, e);
            axpy(&mut dr, dw, e);
            if with_flux {
                axpy(&mut q, w, e);
            }
        }
    }
    let vf = |s: &[f64]| VectorField::from_components(samples_to_components(&ctx.grid, s, 2));
    let tf = |s: &[f64]| SymTensorField::from_components(samples_to_components(&ctx.grid, s, 3));
    Mollified {
        v: smooth(&vf(&v), kern.ell),
        r: smooth(&tf(&r), kern.ell),
        dr: smooth(&tf(&dr), kern.ell),
        q: smooth(&tf(&q), kern.ell),
    }
}

struct StepOut {
    stress: Vec<f64>,
    flux: Vec<f64>,
    identity: Option<f64>,
    stream: f64,
    recon: f64,
    guard: f64,
    div: f64,
    trace: f64,
    active: Vec<usize>,
    parts_l1: [f64; 8],
}

/// Builds level `q + 1` from level `q`.
pub fn build_level(ctx: &Context, prev: &LevelState) -> Result<LevelState> {
    let level = prev.q + 1;
    let plan = ctx.params.plan(level);
    let kern = TimeKernel::new(plan.ell, ctx.dt)?;
    let ext: Vec<Vec<f64>> = (1..=kern.lags()).into_par_iter().map(|j| concat(&ctx.extension(j))).collect();
    let jp = plan.jet;
    jp.validate(ctx.js.dirs.mu0, false)?;
    let jet_band = ctx.params.jet_band.unwrap_or(ctx.grid.n() as i64 / 4 - 1);
    let jets: Vec<StationaryJet> =
        (0..ctx.js.dirs.len()).map(|k| ctx.js.stationary_jet(&jp, k, &ctx.grid, Some(jet_band))).collect::<Result<_>>()?;
    let dirs = &ctx.js.dirs;

    // pass A: v2 of the new level
    let v2_s: Vec<Vec<f64>> = (0..=ctx.steps)
        .into_par_iter()
        .map(|n| {
            let m = mollify(ctx, prev, &kern, &ext, n, false);
            let amp = amplitudes(dirs, &m.r, &m.dr, plan.gamma, plan.ell)?;
            let p = perturbation(&ctx.js, &jp, &jets, &amp, ctx.time(n), plan.sigma_cut, false);
            Ok(concat(&m.v.plus(&p.w)))
        })
        .collect::<Result<_>>()?;
    let mut v2 = Track::new(&ctx.grid, 2, ctx.dt);
    v2_s.into_iter().for_each(|s| v2.push_samples(s));

    let (v1, picard) = solve_v1(&ctx.grid, ctx.dt, ctx.steps, |n| ctx.v1_forcing(n, Some(&v2), plan.f))?;

    // pass B: stress, flux and checks
    let outs: Vec<StepOut> = (0..=ctx.steps)
        .into_par_iter()
        .map(|n| {
            let t = ctx.time(n);
            let m = mollify(ctx, prev, &kern, &ext, n, true);
            let amp = amplitudes(dirs, &m.r, &m.dr, plan.gamma, plan.ell)?;
            let p = perturbation(&ctx.js, &jp, &jets, &amp, t, plan.sigma_cut, true);
            let v1n: VectorField = v1.get(n);
            let v2n: VectorField = v2.get(n);
            let v_prev = prev.v1.get::<VectorField>(n).plus(&prev.v2.get(n));
            let flux_prev: SymTensorField = prev.flux.get(n);
            let z_in = ctx.z_in(t);
            let (lo, hi) = ctx.z_split(n);
            let parts = assemble_stress(
                &ctx.js,
                &jp,
                &StressInputs {
                    moll: &m,
                    amp: &amp,
                    pert: &p,
                    flux_prev: &flux_prev,
                    v1_new: &v1n,
                    v_prev: &v_prev,
                    z_in: &z_in,
                    z_low: lo.as_ref(),
                    z_high: hi.as_ref(),
                },
            )?;
            let stress = parts.total();
            let flux = ctx.flux(&v1n.plus(&v2n), n);
            let identity = if p.active.is_empty() { None } else { Some(identity_defect(&ctx.js, &p, &amp, &m.r)) };
            let div = v1n.div().norm(NormKind::Linf).max(v2n.div().norm(NormKind::Linf)).max(p.w.div().norm(NormKind::Linf));
            let mut parts_l1 = [0.0; 8];
            for (o, c) in parts_l1.iter_mut().zip(&parts.parts) {
                *o = c.norm(NormKind::Lp(1.0));
            }
            Ok(StepOut {
                trace: stress.max_trace(),
                stress: concat(&stress),
                flux: concat(&flux),
                identity,
                stream: p.wp_wc_residual,
                recon: amp.reconstruction,
                guard: amp.guard,
                div,
                active: p.active.iter().map(|a| a.idx).collect(),
                parts_l1,
            })
        })
        .collect::<Result<_>>()?;

    let mut checks = LevelChecks::default();
    let mut stress = Track::new(&ctx.grid, 3, ctx.dt);
    let mut flux = Track::new(&ctx.grid, 3, ctx.dt);
    let mut comps = [0.0; 8];
    let early_end = plan.sigma_cut.min(ctx.t_end());
    for (n, o) in outs.into_iter().enumerate() {
        if let Some(d) = o.identity {
            checks.identity_quadratic = checks.identity_quadratic.max(d);
            checks.checked_times += 1;
        }
        checks.identity_stream = checks.identity_stream.max(o.stream);
        checks.reconstruction = checks.reconstruction.max(o.recon);
        checks.amplitude_guard = checks.amplitude_guard.max(o.guard);
        checks.divergence = checks.divergence.max(o.div);
        checks.stress_trace = checks.stress_trace.max(o.trace);
        checks.max_simultaneous = checks.max_simultaneous.max(o.active.len());
        for a in &o.active {
            if !checks.active_directions.contains(a) {
                checks.active_directions.push(*a);
            }
        }
        if n > 0 {
            for (c, v) in comps.iter_mut().zip(o.parts_l1) {
                *c += v * ctx.dt;
            }
        }
        if ctx.time(n) <= early_end + 1e-12 {
            checks.v2_early = checks.v2_early.max(sup_abs(v2.samples(n)));
        }
        stress.push_samples(o.stress);
        flux.push_samples(o.flux);
    }
    checks.active_directions.sort_unstable();
    checks.components = STRESS_NAMES.iter().zip(comps).map(|(n, v)| (n.to_string(), v)).collect();

    let mut state = LevelState {
        q: level,
        v1,
        v2,
        stress,
        flux,
        report: LevelReport { level, plan: Some(plan), rows: Vec::new(), checks, picard, series: LevelSeries::default() },
    };
    state.report.series = level_series(ctx, &state);
    state.report.rows = level_rows(ctx, &state, Some(prev));
    Ok(state)
}

/// `|P_H P_{!=0}[(v2(n+1) - v2(n-1)) / 2dt - Delta v2(n) + div(Q(n) - R(n))]|_{H^{-2}}`.
pub fn master_residual(ctx: &Context, s: &LevelState, n: usize) -> f64 {
    let dt = ctx.dt;
    let ddt = s.v2.get::<VectorField>(n + 1).minus(&s.v2.get(n - 1)).scaled(0.5 / dt);
    let v2n: VectorField = s.v2.get(n);
    let q: SymTensorField = s.flux.get(n);
    let r: SymTensorField = s.stress.get(n);
    let res = ddt.minus(&v2n.laplacian()).plus(&q.minus(&r).div());
    res.helmholtz_project().remove_mean().norm(NormKind::Hs(-2.0))
}

fn level_series(ctx: &Context, s: &LevelState) -> LevelSeries {
    let steps = ctx.steps;
    let per: Vec<(f64, f64, f64, f64, f64, f64)> = (0..=steps)
        .into_par_iter()
        .map(|n| {
            let st = lp_of_samples(&split(s.stress.samples(n), 3), &TENSOR_W, 1.0);
            let v2s = split(s.v2.samples(n), 2);
            let l2 = lp_of_samples(&v2s, &VECTOR_W, 2.0);
            let lp = lp_of_samples(&v2s, &VECTOR_W, ctx.params.p);
            let c1 = s.v2.get::<VectorField>(n).norm(NormKind::CN(1));
            let dtn = if n < steps {
                s.v2.samples(n + 1).iter().zip(s.v2.samples(n)).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / ctx.dt
            } else {
                0.0
            };
            let res = if n > 0 && n < steps { master_residual(ctx, s, n) } else { 0.0 };
            (st, l2 * l2, lp, c1, dtn, res)
        })
        .collect();
    let t_q = ctx.params.t_level(s.q);
    let neg = ((-t_q) / ctx.dt + 1e-9).floor() as usize;
    let ext_stress_l1 = (1..=neg)
        .into_par_iter()
        .map(|j| lp_of_samples(&ctx.extension(j).physical(), &TENSOR_W, 1.0))
        .collect();
    LevelSeries {
        stress_l1: per.iter().map(|x| x.0).collect(),
        v2_l2sq: per.iter().map(|x| x.1).collect(),
        v2_lp: per.iter().map(|x| x.2).collect(),
        v2_c1: per.iter().map(|x| x.3).collect(),
        v2_dt: per.iter().map(|x| x.4).collect(),
        residual: per.iter().map(|x| x.5).collect(),
        ext_stress_l1,
    }
}

/// Right-point quadrature `sum_{a < t_n <= b} f(t_n) dt` over the nonnegative grid times.
pub fn window_sum(f: &[f64], dt: f64, a: f64, b: f64) -> f64 {
    f.iter().enumerate().filter(|(n, _)| {
        let t = *n as f64 * dt;
        t > a + 1e-12 && t <= b + 1e-12
    })
    .map(|(_, v)| v * dt)
    .sum()
}

fn sliding_sup(ctx: &Context, s: &LevelSeries, q: usize, h: f64) -> f64 {
    let dt = ctx.dt;
    let t_q = ctx.params.t_level(q);
    let end = ctx.params.sigma(q as i64).min(ctx.t_end());
    let k_lo = (t_q / dt - 1e-9).ceil() as i64;
    let k_hi = (end / dt + 1e-9).floor() as i64;
    let val = |k: i64| -> f64 {
        if k >= 0 {
            s.stress_l1.get(k as usize).copied().unwrap_or(0.0)
        } else {
            s.ext_stress_l1.get((-k - 1) as usize).copied().unwrap_or(0.0)
        }
    };
    let width = ((h / dt) + 1e-9).floor().max(1.0) as i64;
    let mut best = 0.0f64;
    let mut a = k_lo;
    while a + width <= k_hi {
        let sum: f64 = (a + 1..=a + width).map(val).sum::<f64>() * dt;
        best = best.max(sum);
        a += 1;
    }
    best
}

fn level_rows(ctx: &Context, s: &LevelState, prev: Option<&LevelState>) -> Vec<LedgerRow> {
    let pr = &ctx.params;
    let d = &ctx.diag;
    let q = s.q;
    let qi = q as i64;
    let t = ctx.t_end();
    let dt = ctx.dt;
    let ser = &s.report.series;
    let ml = pr.m_l();
    let big_a = pr.big_a();
    let m0 = pr.m0;
    let br = d.bound_ratio;
    let p = pr.p;
    let sum_delta: f64 = (1..=q).map(|m| pr.delta(m as i64).sqrt()).sum();
    let sum_gamma: f64 = (1..=q).map(|m| pr.gamma_level(m).sqrt()).sum();
    let sum_sigma: f64 = (1..q).map(|m| (m as f64 * pr.sigma(m as i64 - 1)).sqrt()).sum();
    let mut rows = Vec::new();
    let mut row = |w: String, name: &str, v: f64, target: Option<f64>| rows.push(LedgerRow::new(q, w, name, v, target));

    let l2 = window_sum(&ser.v2_l2sq, dt, 0.0, t).sqrt();
    let l2_bound = m0 * (ml.powf(0.75) * sum_delta + 2f64.sqrt() * ml.powf(0.25) * sum_gamma) + 2f64.sqrt() * m0 * (ml + big_a).sqrt() * sum_sigma;
    row(window(0.0, t, true), "v2_l2l2", l2, Some(br * l2_bound));
    let t_q = pr.t_level(q);
    let early = pr.sigma(qi).min(t);
    let early_sup = (0..s.v2.len()).filter(|&n| ctx.time(n) <= early + 1e-12).map(|n| sup_abs(s.v2.samples(n))).fold(0.0, f64::max);
    row(window(t_q, early, true), "v2_vanishes_early", early_sup, Some(0.0));
    let c1 = sup_abs(&ser.v2_c1) + sup_abs(&ser.v2_dt);
    row(window(0.0, t, true), "v2_c1", c1, Some(br * pr.lambda(q).powi(4) * ml.sqrt()));
    row(window(0.0, t, true), "v2_ctlp", sup_abs(&ser.v2_lp), Some(br * ml.sqrt() * sum_delta));

    let late_a = pr.sigma(qi - 1).min(t);
    row(window(late_a, t, false), "stress_l1l1_late", window_sum(&ser.stress_l1, dt, late_a, t), Some(br * ml * pr.delta(qi + 1)));
    let full_bound = ml * pr.delta(qi + 1) + 2.0 * (q as f64 + 1.0) * big_a * pr.sigma(qi).powf(2.0 - 2.0 / p);
    row(window(0.0, t, true), "stress_l1l1_full", window_sum(&ser.stress_l1, dt, 0.0, t), Some(br * full_bound));
    let h = (pr.sigma(qi).min(t) - t_q) / 4.0;
    let slide = sliding_sup(ctx, ser, q, h);
    row(window(t_q, pr.sigma(qi).min(t), true), "stress_l1_sliding", slide, Some(br * 2.0 * (q as f64 + 1.0) * big_a * (h / 2.0).powf(2.0 - 2.0 / p)));

    let res_max = sup_abs(&ser.residual);
    row(window(0.0, t, false), "master_residual_h-2", res_max, None);
    row(window(0.0, t, true), "picard_max_ratio", s.report.picard.max_ratio(), Some(1.0));
    row(window(0.0, t, true), "divergence", s.report.checks.divergence, Some(d.divergence_tol));

    if let Some(prev) = prev {
        let c = &s.report.checks;
        let pser = &prev.report.series;
        let plan = s.report.plan.as_ref().expect("plan");
        let diff = |n: usize| -> VectorField { s.v2.get::<VectorField>(n).minus(&prev.v2.get(n)) };
        let per: Vec<(f64, f64, f64)> = (0..=ctx.steps)
            .into_par_iter()
            .map(|n| {
                let dv = diff(n);
                let l2 = dv.norm(NormKind::Lp(2.0));
                (dv.norm(NormKind::Lp(p)), dv.norm(NormKind::Wsp(0.5, 1.2)), l2 * l2)
            })
            .collect();
        let dlp: Vec<f64> = per.iter().map(|x| x.0).collect();
        let dws: Vec<f64> = per.iter().map(|x| x.1).collect();
        let dl2: Vec<f64> = per.iter().map(|x| x.2).collect();
        let inc_bound = br * ml.sqrt() * (-pr.alpha * pr.ln_lambda(q)).exp();
        row(window(0.0, t, true), "dv2_ctlp", sup_abs(&dlp), Some(inc_bound));
        row(window(0.0, t, true), "dv2_w_half_6_5", sup_abs(&dws), Some(inc_bound));
        let s2 = pr.sigma(qi - 2);
        let wa = (2.0 * s2).min(t);
        let rad = (ml.sqrt() - 2.0 * s2).max(0.0);
        let b1 = m0 * (ml.sqrt() * pr.delta(qi).sqrt() + plan.gamma.sqrt()) * rad.sqrt();
        row(window(wa, t, false), "dv2_l2l2_late", window_sum(&dl2, dt, wa, t).sqrt(), Some(br * b1));
        let wb = plan.sigma_cut.min(t);
        let b2 = m0 * ((ml + (q as f64 - 1.0) * big_a).sqrt() + plan.gamma.sqrt()) * (2.0 * s2).sqrt();
        row(window(wb, wa, false), "dv2_l2l2_middle", window_sum(&dl2, dt, wb, wa).sqrt(), Some(br * b2));
        let e_a = 2f64.min(t);
        let inc = window_sum(&ser.v2_l2sq, dt, e_a, t) - window_sum(&pser.v2_l2sq, dt, e_a, t);
        row(window(e_a, t, false), "energy_increment", inc, None);
        row(window(e_a, t, false), "energy_balance", (inc - 2.0 * plan.gamma * (t - e_a)).abs(), Some(br * 5.0 * ml * pr.delta(qi)));
        let ha = plan.sigma_prev.min(t);
        let now = window_sum(&ser.stress_l1, dt, ha, t);
        let before = window_sum(&pser.stress_l1, dt, ha, t);
        let ratio = if before > 0.0 { now / before } else if now == 0.0 { 0.0 } else { f64::INFINITY };
        row(window(ha, t, false), "stress_ratio", ratio, Some(d.headline_target));
        row(window(ha, t, false), "stress_l1l1_headline", now, None);
        row(window(0.0, t, true), "identity_quadratic", c.identity_quadratic, Some(d.identity_tol));
        row(window(0.0, t, true), "identity_stream", c.identity_stream, Some(d.identity_tol));
        row(window(0.0, t, true), "reconstruction", c.reconstruction, Some(d.reconstruction_tol));
        row(window(0.0, t, true), "amplitude_guard", c.amplitude_guard, Some(0.5));
        row(window(0.0, t, true), "stress_trace", c.stress_trace, Some(d.divergence_tol));
        row(window(0.0, t, true), "checked_times", c.checked_times as f64, None);
        row(window(0.0, t, true), "active_directions", c.active_directions.len() as f64, None);
        row(window(0.0, t, true), "max_simultaneous_directions", c.max_simultaneous as f64, Some(1.0));
        for (name, v) in &c.components {
            row(window(0.0, t, false), &format!("stress_{name}_l1l1"), *v, None);
        }
    }
    rows
}

/// Runs levels `0..=q_max`, handing each finished level to `visit` before it is dropped.
pub fn iterate(ctx: &Context, q_max: usize, mut visit: impl FnMut(&LevelState) -> Result<()>) -> Result<Vec<LevelReport>> {
    if q_max < 1 {
        return Err(Error::InvalidArgument("q_max must be at least 1".into()));
    }
    let mut state = init_state(ctx)?;
    visit(&state)?;
    let mut reports = vec![state.report.clone()];
    for _ in 0..q_max {
        let next = build_level(ctx, &state)?;
        visit(&next)?;
        reports.push(next.report.clone());
        state = next;
    }
    Ok(reports)
}
