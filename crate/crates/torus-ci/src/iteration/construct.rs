//! One level of the construction: mollification, amplitudes, perturbation and the
//! new Reynolds stress, all evaluated at a single time.

use crate::antidiv::{antidiv, bilinear_antidiv, bilinear_scalar};
use crate::error::{Error, Result};
use crate::field::{Field, Grid, ScalarField, SymTensorField, VectorField};
use crate::harmonic::cutoff;
use crate::jets::{bump, DirectionSet, JetParams, JetSystem, StationaryJet, Temporal};

/// One-sided temporal mollifier `phi_ell` supported on `(0, ell)`, sampled at the lags
/// `j dt`, `j = 1..=m`, and normalized to unit mass.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeKernel {
    pub ell: f64,
    pub dt: f64,
    /// Weight of the sample at `t - (j + 1) dt`.
    pub w: Vec<f64>,
    /// Weights of the time derivative of the mollified signal.
    pub dw: Vec<f64>,
}

impl TimeKernel {
    pub fn new(ell: f64, dt: f64) -> Result<Self> {
        let m = (ell / dt + 1e-9).floor() as usize;
        if m < 4 {
            return Err(Error::InvalidArgument(format!(
                "time grid too coarse for the mollifier: ell = {ell}, dt = {dt} (need ell >= 4 dt)"
            )));
        }
        let prof = |s: f64| bump(2.0 * s - 1.0);
        let mut w = Vec::with_capacity(m);
        let mut dw = Vec::with_capacity(m);
        for j in 1..=m {
            let b = prof(j as f64 * dt / ell);
            w.push(b[0]);
            dw.push(2.0 * b[1] / ell);
        }
        let z: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= z);
        dw.iter_mut().for_each(|x| *x /= z);
        Ok(TimeKernel { ell, dt, w, dw })
    }

    pub fn lags(&self) -> usize {
        self.w.len()
    }
}

/// Spatial mollifier: symbol `chi(ell |k|)`, Nyquist lines removed.
pub fn smooth_scalar(f: &ScalarField, ell: f64) -> ScalarField {
    let n = f.grid().n() as i64;
    f.apply_real_multiplier(|a, b| cutoff(ell * ((a * a + b * b) as f64).sqrt())).truncate(n / 2 - 1)
}

pub fn smooth<F: Field>(f: &F, ell: f64) -> F {
    f.map(|c| smooth_scalar(c, ell))
}

pub fn strip_nyquist(f: &ScalarField) -> ScalarField {
    f.truncate(f.grid().n() as i64 / 2 - 1)
}

/// Mollified quantities of level `q` at one time.
#[derive(Clone, Debug)]
pub struct Mollified {
    pub v: VectorField,
    pub r: SymTensorField,
    /// `d/dt R_ell`.
    pub dr: SymTensorField,
    /// Mollified trace-free flux of level `q`.
    pub q: SymTensorField,
}

/// `rho`, `a_xi^2`, `a_xi` and their time derivatives.
#[derive(Clone, Debug)]
pub struct Amplitudes {
    pub rho: ScalarField,
    pub a2: Vec<ScalarField>,
    pub da2: Vec<ScalarField>,
    pub a: Vec<ScalarField>,
    pub da: Vec<ScalarField>,
    /// `max |R_ell / rho|_F`.
    pub guard: f64,
    /// `max |sum a^2 xi (x) xi - (rho Id - R_ell)|` over grid points.
    pub reconstruction: f64,
}

fn fields_from(grid: &Grid, rows: &[Vec<f64>]) -> Vec<ScalarField> {
    rows.iter().map(|s| strip_nyquist(&ScalarField::from_physical(grid, s).expect("length"))).collect()
}

/// Pointwise `rho = 2 sqrt(ell^2 + |R|^2) + gamma` and `a_xi^2 = rho gamma_xi^2(Id - R / rho)`.
pub fn amplitudes(dirs: &DirectionSet, r: &SymTensorField, dr: &SymTensorField, gamma: f64, ell: f64) -> Result<Amplitudes> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma_(q+1) must be positive, got {gamma}")));
    }
    let grid = r.grid().clone();
    let rp = r.physical();
    let dp = dr.physical();
    let len = grid.len();
    let nd = dirs.len();
    let mut rho = vec![0.0; len];
    let mut a2 = vec![vec![0.0; len]; nd];
    let mut da2 = vec![vec![0.0; len]; nd];
    let mut a = vec![vec![0.0; len]; nd];
    let mut da = vec![vec![0.0; len]; nd];
    let (mut guard, mut recon) = (0.0f64, 0.0f64);
    for i in 0..len {
        let (r11, r12, r22) = (rp[0][i], rp[1][i], rp[2][i]);
        let (d11, d12, d22) = (dp[0][i], dp[1][i], dp[2][i]);
        let norm2 = r11 * r11 + 2.0 * r12 * r12 + r22 * r22;
        let root = (ell * ell + norm2).sqrt();
        let rh = 2.0 * root + gamma;
        let drh = 2.0 * (r11 * d11 + 2.0 * r12 * d12 + r22 * d22) / root;
        guard = guard.max(norm2.sqrt() / rh);
        let m = [[1.0 - r11 / rh, -r12 / rh], [-r12 / rh, 1.0 - r22 / rh]];
        let dm = [-d11 / rh + r11 * drh / (rh * rh), -d12 / rh + r12 * drh / (rh * rh), -d22 / rh + r22 * drh / (rh * rh)];
        let w = dirs.weights(m);
        let gw = dirs.weight_gradients(m);
        rho[i] = rh;
        let mut rec = [0.0; 3];
        for k in 0..nd {
            let v = rh * w[k];
            let dv = drh * w[k] + rh * (gw[k][0] * dm[0] + gw[k][1] * dm[1] + gw[k][2] * dm[2]);
            a2[k][i] = v;
            da2[k][i] = dv;
            let s = v.sqrt();
            a[k][i] = s;
            da[k][i] = dv / (2.0 * s);
            let xi = dirs.dirs[k];
            rec[0] += v * xi[0] * xi[0];
            rec[1] += v * xi[0] * xi[1];
            rec[2] += v * xi[1] * xi[1];
        }
        recon = recon.max((rec[0] - (rh - r11)).abs()).max((rec[1] + r12).abs()).max((rec[2] - (rh - r22)).abs());
    }
    if guard > 0.5 + 1e-12 || !guard.is_finite() {
        return Err(Error::DomainGuard(guard));
    }
    let rho = strip_nyquist(&ScalarField::from_physical(&grid, &rho)?);
    Ok(Amplitudes {
        rho,
        a2: fields_from(&grid, &a2),
        da2: fields_from(&grid, &da2),
        a: fields_from(&grid, &a),
        da: fields_from(&grid, &da),
        guard,
        reconstruction: recon,
    })
}

/// `C^2` smoothstep cutoff: 0 for `t <= s`, 1 for `t >= 2 s`; returns `(chi, chi')`.
pub fn cutoff_in_time(t: f64, s: f64) -> (f64, f64) {
    let x = (t - s) / s;
    if x <= 0.0 {
        (0.0, 0.0)
    } else if x >= 1.0 {
        (1.0, 0.0)
    } else {
        let v = x * x * x * (10.0 - 15.0 * x + 6.0 * x * x);
        let d = 30.0 * x * x * (1.0 - x) * (1.0 - x) / s;
        (v, d)
    }
}

/// Building-block data of a direction active at the current time.
#[derive(Clone, Debug)]
pub struct ActiveJet {
    pub idx: usize,
    pub g: f64,
    pub dg: f64,
    pub w: VectorField,
    /// Dealiased `|W|^2`.
    pub w2: ScalarField,
    /// Dealiased `W (x) W`.
    pub ww: SymTensorField,
}

#[derive(Clone, Debug)]
pub struct Perturbation {
    pub chi: f64,
    pub dchi: f64,
    pub temporal: Vec<Temporal>,
    pub wp: VectorField,
    pub wc: VectorField,
    pub wo: VectorField,
    pub wa: VectorField,
    /// `sigma^{-1} sum g P(a Psi)`, so that `w^(p) + w^(c) = perp grad` of it.
    pub stream: ScalarField,
    /// Time derivative of `stream` (only with `full`).
    pub dstream: Option<ScalarField>,
    pub w: VectorField,
    pub active: Vec<ActiveJet>,
    /// `max |w^(p) + w^(c) - perp grad stream|`.
    pub wp_wc_residual: f64,
}

fn along(f: &ScalarField, xi: [f64; 2]) -> ScalarField {
    f.dx(1).scale(xi[0]).add(&f.dx(2).scale(xi[1]))
}

fn times_dir(f: &ScalarField, xi: [f64; 2]) -> VectorField {
    VectorField::new(f.scale(xi[0]), f.scale(xi[1]))
}

fn sup(f: &VectorField) -> f64 {
    f.physical().iter().flat_map(|c| c.iter()).fold(0.0, |m, v| m.max(v.abs()))
}

/// Principal part, correctors and their sum at time `t`.
///
/// With `full` the time derivative of the stream function and the quadratic jet
/// data needed by the stress are also produced.
#[allow(clippy::too_many_arguments)]
pub fn perturbation(
    js: &JetSystem,
    jp: &JetParams,
    jets: &[StationaryJet],
    amp: &Amplitudes,
    t: f64,
    sigma_cut: f64,
    full: bool,
) -> Perturbation {
    let grid = amp.rho.grid().clone();
    let s = jp.sigma as f64;
    let th = jp.theta as f64;
    let (chi, dchi) = cutoff_in_time(t, sigma_cut);
    let temporal: Vec<Temporal> = (0..js.dirs.len()).map(|k| js.temporal(jp, k, t)).collect();
    let mut wp = VectorField::zeros(&grid);
    let mut wc = VectorField::zeros(&grid);
    let mut wa = VectorField::zeros(&grid);
    let mut wo = VectorField::zeros(&grid);
    let mut stream = ScalarField::zeros(&grid);
    let mut dstream = ScalarField::zeros(&grid);
    let mut active = Vec::new();
    for (k, tv) in temporal.iter().enumerate() {
        let xi = js.dirs.dirs[k];
        if tv.h != 0.0 {
            wo.axpy(-tv.h / s, &times_dir(&along(&amp.a2[k], xi), xi));
        }
        if tv.g == 0.0 && tv.dg == 0.0 {
            continue;
        }
        let f = jets[k].fields(tv.phase);
        let a = &amp.a[k];
        wp.axpy(tv.g, &VectorField::scalar_mul(a, &f.w));
        let corr = VectorField::scalar_mul(a, &f.wc).plus(&VectorField::scalar_mul(&f.psi, &VectorField::perp_gradient(a)).scaled(1.0 / s));
        wc.axpy(tv.g, &corr);
        stream.axpy(tv.g / s, &a.product(&f.psi));
        let w2 = VectorField::dot(&f.w, &f.w);
        wa.axpy(-s / th * tv.g, &times_dir(&amp.a2[k].product(&w2), xi));
        if full {
            // d/dt (a g Psi) = (da g + a dg) Psi + a g (theta g / sigma) (xi . grad) Psi
            let lead = amp.da[k].scale(tv.g).add(&a.scale(tv.dg));
            dstream.axpy(1.0 / s, &lead.product(&f.psi));
            dstream.axpy(tv.g * tv.g * th / (s * s), &a.product(&along(&f.psi, xi)));
            let ww = VectorField::outer_self(&f.w);
            active.push(ActiveJet { idx: k, g: tv.g, dg: tv.dg, w: f.w, w2, ww });
        }
    }
    let wo = wo.helmholtz_project().remove_mean();
    let wa = wa.helmholtz_project().remove_mean();
    let sum = wp.plus(&wc);
    let wp_wc_residual = sup(&sum.minus(&VectorField::perp_gradient(&stream)));
    let mut w = sum.scaled(chi);
    w.axpy(chi * chi, &wo.plus(&wa));
    Perturbation {
        chi,
        dchi,
        temporal,
        wp,
        wc,
        wo,
        wa,
        stream,
        dstream: if full { Some(dstream) } else { None },
        w,
        active,
        wp_wc_residual,
    }
}

/// `max |w^(p) (x) w^(p) + R_ell - (sum a^2 g^2 P_{!=0}(W (x) W) + sum a^2 (g^2 - 1) xi (x) xi + rho Id)|`
/// with dealiased products, both sides assembled separately.
pub fn identity_defect(js: &JetSystem, pert: &Perturbation, amp: &Amplitudes, r_ell: &SymTensorField) -> f64 {
    let lhs = VectorField::outer_self(&pert.wp).plus(r_ell);
    let mut rhs = SymTensorField::identity_times(&amp.rho);
    for aj in &pert.active {
        let m = aj.ww.remove_mean();
        rhs.axpy(aj.g * aj.g, &SymTensorField::scalar_mul(&amp.a2[aj.idx], &m));
    }
    for (k, tv) in pert.temporal.iter().enumerate() {
        let xi = js.dirs.dirs[k];
        let c = tv.g * tv.g - 1.0;
        let f = &amp.a2[k];
        rhs.axpy(c, &SymTensorField::new(f.scale(xi[0] * xi[0]), f.scale(xi[0] * xi[1]), f.scale(xi[1] * xi[1])));
    }
    lhs.minus(&rhs).physical().iter().flat_map(|c| c.iter()).fold(0.0, |m, v| m.max(v.abs()))
}

pub const STRESS_NAMES: [&str; 8] = ["lin", "cor", "osc", "com", "com1", "com2", "com3", "trunc"];

/// The components of the new Reynolds stress.
#[derive(Clone, Debug)]
pub struct StressParts {
    pub parts: [SymTensorField; 8],
}

impl StressParts {
    pub fn total(&self) -> SymTensorField {
        let mut t = self.parts[0].clone();
        for p in &self.parts[1..] {
            t = t.plus(p);
        }
        t
    }

    /// First component containing a non-finite value.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.parts.iter().zip(STRESS_NAMES).find(|(p, _)| !p.is_finite()).map(|(_, n)| n)
    }
}

/// Inputs of the stress assembly beyond the perturbation.
pub struct StressInputs<'a> {
    pub moll: &'a Mollified,
    pub amp: &'a Amplitudes,
    pub pert: &'a Perturbation,
    /// Trace-free flux of level `q` at this time.
    pub flux_prev: &'a SymTensorField,
    /// `v1_{q+1}`.
    pub v1_new: &'a VectorField,
    /// `v1_q + v2_q`.
    pub v_prev: &'a VectorField,
    pub z_in: &'a VectorField,
    /// `Delta_{<= R} z`, `Delta_{> R} z` (`None` when the noise vanishes).
    pub z_low: Option<&'a VectorField>,
    pub z_high: Option<&'a VectorField>,
}

fn sym_grad(w: &VectorField) -> SymTensorField {
    SymTensorField::new(w.c[0].dx(1).scale(2.0), w.c[0].dx(2).add(&w.c[1].dx(1)), w.c[1].dx(2).scale(2.0))
}

/// Noise part of the flux, linear in the velocity argument.
pub fn noise_flux(v: &VectorField, z_low: Option<&VectorField>, z_high: Option<&VectorField>) -> SymTensorField {
    let mut out = SymTensorField::zeros(v.grid());
    if let Some(zl) = z_low {
        out = out.plus(&VectorField::sym_outer(v, zl));
    }
    if let Some(zh) = z_high {
        out = out.plus(&crate::harmonic::sym_paraproduct(v, zh, crate::harmonic::Para::HighResonant));
    }
    out
}

/// `R_lin, R_cor, R_osc, R_com, R_com1, R_com2, R_com3` and the truncation term.
pub fn assemble_stress(js: &JetSystem, jp: &JetParams, inp: &StressInputs) -> Result<StressParts> {
    let (moll, amp, pert) = (inp.moll, inp.amp, inp.pert);
    let grid = amp.rho.grid().clone();
    let s = jp.sigma as f64;
    let th = jp.theta as f64;
    let (chi, dchi) = (pert.chi, pert.dchi);
    let chi2 = chi * chi;
    let dchi2 = 2.0 * chi * dchi;
    let w = &pert.w;
    let u = moll.v.plus(inp.v1_new);
    let dstream = pert.dstream.as_ref().ok_or_else(|| Error::InvalidArgument("perturbation built without time derivative".into()))?;

    // linear part
    let dt_wpc = VectorField::perp_gradient(&pert.stream.scale(dchi).add(&dstream.scale(chi)));
    let lin = sym_grad(w).scaled(-1.0).plus(&antidiv(&dt_wpc)).plus(&VectorField::sym_outer(&u, w).traceless());

    // correction part
    let p = pert.wp.scaled(chi);
    let wt = pert.wo.plus(&pert.wa);
    let mut x = pert.wc.scaled(chi);
    x.axpy(chi2, &wt);
    let cor = VectorField::sym_outer(&x, &p).plus(&VectorField::outer_self(&x)).traceless();

    // oscillation part
    let mut osc_x = SymTensorField::zeros(&grid);
    let mut osc_a = SymTensorField::zeros(&grid);
    let mut trunc_rhs = SymTensorField::zeros(&grid);
    for aj in &pert.active {
        let k = aj.idx;
        let xi = js.dirs.dirs[k];
        let a2 = &amp.a2[k];
        let m = aj.ww.remove_mean();
        osc_x.axpy(aj.g * aj.g, &bilinear_antidiv(&VectorField::gradient(a2), &m)?);
        trunc_rhs.axpy(aj.g * aj.g, &SymTensorField::scalar_mul(a2, &aj.ww));
        // F = d/dt (a^2 g)
        let f = amp.da2[k].scale(aj.g).add(&a2.scale(aj.dg));
        let w2m = aj.w2.remove_mean();
        let part = bilinear_scalar(&f, &times_dir(&w2m, xi)).plus(&antidiv(&times_dir(&f, xi)));
        osc_a.axpy(-s / th, &part);
    }
    let mut osc_t = SymTensorField::zeros(&grid);
    for (k, tv) in pert.temporal.iter().enumerate() {
        if tv.h == 0.0 {
            continue;
        }
        let xi = js.dirs.dirs[k];
        osc_t.axpy(-tv.h / s, &antidiv(&times_dir(&along(&amp.da2[k], xi), xi)));
    }
    let mut osc = osc_x.plus(&osc_a).plus(&osc_t).scaled(chi2);
    osc.axpy(dchi2, &antidiv(&wt));
    osc.axpy(1.0 - chi2, &moll.r);

    let trunc = VectorField::outer_self(&pert.wp).minus(&trunc_rhs).traceless().scaled(chi2);

    // commutators
    let com = inp.flux_prev.minus(&moll.q);
    let v_new = u.plus(w);
    let dv = v_new.minus(inp.v_prev);
    let com1 = noise_flux(&dv, inp.z_low, inp.z_high).traceless();
    let com2 = VectorField::outer_self(&u).minus(&VectorField::outer_self(inp.v_prev)).traceless();
    let com3 = VectorField::sym_outer(&dv, inp.z_in).traceless();

    let parts = StressParts { parts: [lin, cor, osc, com, com1, com2, com3, trunc] };
    if let Some(name) = parts.first_non_finite() {
        return Err(Error::Numeric(format!("stress component R_{name}")));
    }
    Ok(parts)
}
