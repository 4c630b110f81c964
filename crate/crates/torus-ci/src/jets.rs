//! Accelerating jets: geometric decomposition, spatial profiles, temporal
//! oscillators and the traveling building blocks `W`, `W^(c)`, `Psi`.

use crate::error::{Error, Result};
use crate::field::{Field, Grid, NormKind, ScalarField, VectorField};
use crate::quad::integrate;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub type Mat2 = [[f64; 2]; 2];

/// Rational unit directions.
pub const DIRECTIONS: [[f64; 2]; 6] =
    [[1.0, 0.0], [0.0, 1.0], [0.6, 0.8], [0.6, -0.8], [0.8, 0.6], [0.8, -0.6]];

/// Jet centers; pairwise distances exceed 1/4 and all lie in `[1/4, 3/4]^2`.
pub const ANCHORS: [[f64; 2]; 6] =
    [[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75], [0.5, 0.45], [0.5, 0.725]];

pub fn perp(xi: [f64; 2]) -> [f64; 2] {
    [xi[1], -xi[0]]
}

pub fn frobenius(m: Mat2) -> f64 {
    (m[0][0].powi(2) + m[0][1].powi(2) + m[1][0].powi(2) + m[1][1].powi(2)).sqrt()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DirectionSet {
    pub dirs: Vec<[f64; 2]>,
    pub anchors: Vec<[f64; 2]>,
    pub mu0: f64,
}

impl Default for DirectionSet {
    fn default() -> Self {
        Self::build()
    }
}

impl DirectionSet {
    pub fn build() -> Self {
        DirectionSet { dirs: DIRECTIONS.to_vec(), anchors: ANCHORS.to_vec(), mu0: 8.0 }
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    /// `gamma_xi^2(R)` in the order of `DIRECTIONS`: affine in `R - Id`, equal to
    /// `(0.4, 0.4, 0.3, 0.3, 0.3, 0.3)` at the identity and at least `1/16` on the
    /// Frobenius ball of radius 1/2 around it.
    pub fn weights(&self, r: Mat2) -> [f64; 6] {
        let (e11, e12, e22) = (r[0][0] - 1.0, 0.5 * (r[0][1] + r[1][0]), r[1][1] - 1.0);
        let o = e12 / 1.92;
        [
            0.4 + 0.616 * e11 - 0.216 * e22,
            0.4 - 0.216 * e11 + 0.616 * e22,
            0.3 + 0.3 * e22 + o,
            0.3 + 0.3 * e22 - o,
            0.3 + 0.3 * e11 + o,
            0.3 + 0.3 * e11 - o,
        ]
    }

    /// Derivatives of each weight with respect to `(r11, r12, r22)`.
    pub fn weight_gradients(&self, _r: Mat2) -> [[f64; 3]; 6] {
        let o = 1.0 / 1.92;
        [
            [0.616, 0.0, -0.216],
            [-0.216, 0.0, 0.616],
            [0.0, o, 0.3],
            [0.0, -o, 0.3],
            [0.3, o, 0.0],
            [0.3, -o, 0.0],
        ]
    }

    pub fn gammas(&self, r: Mat2) -> [f64; 6] {
        self.weights(r).map(|w| w.max(0.0).sqrt())
    }

    /// `sum_xi w_xi xi (x) xi`.
    pub fn reconstruct(&self, w: &[f64; 6]) -> Mat2 {
        let mut m = [[0.0; 2]; 2];
        for (xi, wv) in self.dirs.iter().zip(w) {
            for i in 0..2 {
                for j in 0..2 {
                    m[i][j] += wv * xi[i] * xi[j];
                }
            }
        }
        m
    }
}

/// Smooth bump `exp(-1/(1-s^2))` on `(-1,1)` with its first two derivatives.
pub fn bump(s: f64) -> [f64; 3] {
    if s.abs() >= 1.0 {
        return [0.0; 3];
    }
    let u = 1.0 - s * s;
    let b = (-1.0 / u).exp();
    let q = -2.0 * s / (u * u);
    let dq = -2.0 / (u * u) - 8.0 * s * s / (u * u * u);
    [b, b * q, b * (q * q + dq)]
}

/// Quintic Hermite interpolant of uniformly spaced samples of `f, f', f''`.
#[derive(Clone, Debug)]
pub struct Profile {
    lo: f64,
    h: f64,
    vals: Vec<[f64; 3]>,
}

impl Profile {
    pub fn from_fn(f: impl Fn(f64) -> [f64; 3], lo: f64, hi: f64, samples: usize) -> Self {
        let h = (hi - lo) / (samples - 1) as f64;
        Profile { lo, h, vals: (0..samples).map(|i| f(lo + i as f64 * h)).collect() }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.lo + self.h * (self.vals.len() - 1) as f64
    }

    pub fn samples(&self) -> usize {
        self.vals.len()
    }

    /// Value and first derivative; outside the table the end values are held constant.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let n = self.vals.len();
        if x <= self.lo {
            return (self.vals[0][0], 0.0);
        }
        if x >= self.hi() {
            return (self.vals[n - 1][0], 0.0);
        }
        let u = (x - self.lo) / self.h;
        let i = (u.floor() as usize).min(n - 2);
        let t = u - i as f64;
        let (a, b) = (self.vals[i], self.vals[i + 1]);
        let h = self.h;
        let (t2, t3, t4, t5) = (t * t, t * t * t, t.powi(4), t.powi(5));
        let hb = [
            1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5,
            t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5,
            0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5),
            10.0 * t3 - 15.0 * t4 + 6.0 * t5,
            -4.0 * t3 + 7.0 * t4 - 3.0 * t5,
            0.5 * (t3 - 2.0 * t4 + t5),
        ];
        let db = [
            -30.0 * t2 + 60.0 * t3 - 30.0 * t4,
            1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4,
            0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4),
            30.0 * t2 - 60.0 * t3 + 30.0 * t4,
            -12.0 * t2 + 28.0 * t3 - 15.0 * t4,
            0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4),
        ];
        let c = [a[0], h * a[1], h * h * a[2], b[0], h * b[1], h * h * b[2]];
        let v: f64 = c.iter().zip(&hb).map(|(x, y)| x * y).sum();
        let d: f64 = c.iter().zip(&db).map(|(x, y)| x * y).sum::<f64>() / h;
        (v, d)
    }
}

/// Integer jet parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JetParams {
    pub sigma: u32,
    pub eta: u32,
    pub nu: u32,
    pub mu: u32,
    pub theta: u32,
}

impl JetParams {
    /// Positivity; `strict` additionally enforces `mu0 < nu <= mu`.
    pub fn validate(&self, mu0: f64, strict: bool) -> Result<()> {
        if self.sigma == 0 || self.eta == 0 || self.nu == 0 || self.mu == 0 || self.theta == 0 {
            return Err(Error::InvalidArgument(format!("jet parameters must be positive: {self:?}")));
        }
        if self.nu > self.mu {
            return Err(Error::InvalidArgument(format!("need nu <= mu, got {} > {}", self.nu, self.mu)));
        }
        if strict && (self.nu as f64) <= mu0 {
            return Err(Error::InvalidArgument(format!("need mu0 = {mu0} < nu = {}", self.nu)));
        }
        Ok(())
    }

    /// True when `mu0 < nu`; desk-scale runs report violations instead of failing.
    pub fn separation_ok(&self, mu0: f64) -> bool {
        self.nu as f64 > mu0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Temporal {
    pub g: f64,
    pub dg: f64,
    pub h: f64,
    pub phase: f64,
}

/// Profiles and normalizers shared by every direction.
#[derive(Clone, Debug)]
pub struct JetSystem {
    pub dirs: DirectionSet,
    /// `phi = psi = bump(mu0 s)` on `[-1/mu0, 1/mu0]`.
    pub profile: Profile,
    /// `G = c_G sin(4 pi t) bump(2t - 1)` on `[0, 1]`.
    pub g_profile: Profile,
    /// `int_0^s G`.
    pub g_cumulative: Profile,
    /// `int_0^s G^2`.
    pub g2_cumulative: Profile,
    /// `(int phi^2 int psi'^2)^{-1/2}`.
    pub c_xi: f64,
    pub c_g: f64,
}

const SAMPLES: usize = 8193;

impl Default for JetSystem {
    fn default() -> Self {
        Self::new()
    }
}

impl JetSystem {
    pub fn new() -> Self {
        let dirs = DirectionSet::build();
        let mu0 = dirs.mu0;
        let profile = Profile::from_fn(
            |s| {
                let b = bump(mu0 * s);
                [b[0], mu0 * b[1], mu0 * mu0 * b[2]]
            },
            -1.0 / mu0,
            1.0 / mu0,
            SAMPLES,
        );
        let phi2 = integrate(|s| bump(mu0 * s)[0].powi(2), -1.0 / mu0, 1.0 / mu0, 256, 16);
        let dpsi2 = integrate(|s| (mu0 * bump(mu0 * s)[1]).powi(2), -1.0 / mu0, 1.0 / mu0, 256, 16);
        let c_xi = 1.0 / (phi2 * dpsi2).sqrt();

        let raw = |t: f64| -> [f64; 3] {
            let b = bump(2.0 * t - 1.0);
            let (s, c) = ((4.0 * PI * t).sin(), (4.0 * PI * t).cos());
            let w = 4.0 * PI;
            [
                s * b[0],
                w * c * b[0] + 2.0 * s * b[1],
                -w * w * s * b[0] + 2.0 * w * c * 2.0 * b[1] + 4.0 * s * b[2],
            ]
        };
        let norm = integrate(|t| raw(t)[0].powi(2), 0.0, 1.0, 256, 16);
        let c_g = 1.0 / norm.sqrt();
        let gfun = move |t: f64| raw(t).map(|v| v * c_g);
        let g_profile = Profile::from_fn(gfun, 0.0, 1.0, SAMPLES);
        let h = 1.0 / (SAMPLES - 1) as f64;
        let mut cum = vec![[0.0; 3]; SAMPLES];
        let mut cum2 = vec![[0.0; 3]; SAMPLES];
        let (mut acc, mut acc2) = (0.0, 0.0);
        for i in 0..SAMPLES {
            let t = i as f64 * h;
            if i > 0 {
                acc += integrate(|s| gfun(s)[0], t - h, t, 1, 12);
                acc2 += integrate(|s| gfun(s)[0].powi(2), t - h, t, 1, 12);
            }
            let g = gfun(t);
            cum[i] = [acc, g[0], g[1]];
            cum2[i] = [acc2, g[0] * g[0], 2.0 * g[0] * g[1]];
        }
        let g_cumulative = Profile { lo: 0.0, h, vals: cum };
        let g2_cumulative = Profile { lo: 0.0, h, vals: cum2 };
        JetSystem { dirs, profile, g_profile, g_cumulative, g2_cumulative, c_xi, c_g }
    }

    /// Temporal offset `t_xi = index / |Lambda|`.
    pub fn offset(&self, idx: usize) -> f64 {
        idx as f64 / self.dirs.len() as f64
    }

    /// `g, dg/dt, h` and the phase `phi_xi` at time `t`.
    pub fn temporal(&self, jp: &JetParams, idx: usize, t: f64) -> Temporal {
        let (s, eta) = (jp.sigma as f64, jp.eta as f64);
        let v = s * t - self.offset(idx);
        let local = eta * (v - v.floor());
        let (g, dg) = if local < 1.0 {
            let (gv, gd) = self.g_profile.eval(local);
            (eta.sqrt() * gv, s * eta.powf(1.5) * gd)
        } else {
            (0.0, 0.0)
        };
        let cum = |w: f64| self.g_cumulative.eval((eta * (w - w.floor())).min(1.0)).0;
        let cum2 = |w: f64| w.floor() + self.g2_cumulative.eval((eta * (w - w.floor())).min(1.0)).0;
        let w0 = -self.offset(idx);
        let phase = jp.theta as f64 / s * eta.powf(-0.5) * (cum(v) - cum(w0));
        let h = cum2(v) - cum2(w0) - s * t;
        Temporal { g, dg, h, phase }
    }

    /// Analytic stationary potential `Psi~(x)` and its gradient, before periodic wrapping.
    fn potential_at(&self, jp: &JetParams, idx: usize, x: [f64; 2], scale: f64) -> (f64, [f64; 2]) {
        let xi = self.dirs.dirs[idx];
        let xp = perp(xi);
        let p = self.dirs.anchors[idx];
        let d = [wrap(x[0] - p[0]), wrap(x[1] - p[1])];
        let xx = d[0] * xi[0] + d[1] * xi[1];
        let yy = d[0] * xp[0] + d[1] * xp[1];
        let (nu, mu) = (jp.nu as f64, jp.mu as f64);
        let (fa, da) = self.profile.eval(nu * xx);
        let (fb, db) = self.profile.eval(mu * yy);
        let amp = scale * (nu * mu).sqrt() / mu;
        let dx = amp * nu * da * fb;
        let dy = amp * fa * mu * db;
        (amp * fa * fb, [dx * xi[0] + dy * xp[0], dx * xi[1] + dy * xp[1]])
    }

    /// Samples of `Psi_xi`, `W_xi` and `W^(c)_xi` at `sigma x + phase xi`, using the
    /// continuous normalizer.
    pub fn sampled_fields(&self, jp: &JetParams, idx: usize, grid: &Grid, phase: f64) -> Result<JetFields> {
        let xi = self.dirs.dirs[idx];
        let xp = perp(xi);
        let s = jp.sigma as f64;
        let n = grid.len();
        let (mut psi, mut w1, mut w2, mut c1, mut c2) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for i in 0..n {
            let (a, b) = grid.point(i);
            let y = [s * a + phase * xi[0], s * b + phase * xi[1]];
            let (v, grad) = self.potential_at(jp, idx, y, self.c_xi);
            let dyy = grad[0] * xp[0] + grad[1] * xp[1];
            let dxx = grad[0] * xi[0] + grad[1] * xi[1];
            psi[i] = v;
            w1[i] = -dyy * xi[0];
            w2[i] = -dyy * xi[1];
            c1[i] = dxx * xp[0];
            c2[i] = dxx * xp[1];
        }
        let sf = |v: &[f64]| ScalarField::from_physical(grid, v);
        Ok(JetFields {
            psi: sf(&psi)?,
            w: VectorField::new(sf(&w1)?, sf(&w2)?),
            wc: VectorField::new(sf(&c1)?, sf(&c2)?),
        })
    }

    /// Physical samples of the stationary `W~_xi` magnitude on the grid (no oscillation).
    pub fn stationary_w_samples(&self, jp: &JetParams, idx: usize, grid: &Grid) -> Vec<f64> {
        let xp = perp(self.dirs.dirs[idx]);
        (0..grid.len())
            .map(|i| {
                let (a, b) = grid.point(i);
                let (_, g) = self.potential_at(jp, idx, [a, b], self.c_xi);
                g[0] * xp[0] + g[1] * xp[1]
            })
            .collect()
    }

    /// Spectral stationary jet on an `N` grid: `Psi~` sampled on the cell grid `N / sigma`,
    /// truncated to `|k|_inf <= band` (in `N`-grid modes), oscillated by `sigma`, and
    /// rescaled so that the mean of `|W|^2` is exactly 1.
    pub fn stationary_jet(&self, jp: &JetParams, idx: usize, grid: &Grid, band: Option<i64>) -> Result<StationaryJet> {
        let n = grid.n();
        let s = jp.sigma as usize;
        if n % s != 0 || (n / s) % 2 != 0 || n / s < 4 {
            return Err(Error::Aliasing(format!("grid {n} not divisible into even cells of size N/sigma (sigma = {s})")));
        }
        if (jp.sigma * jp.mu) as f64 / self.dirs.mu0 >= (n / 2) as f64 {
            return Err(Error::Aliasing(format!("sigma mu / mu0 = {} beyond Nyquist of grid {n}", (jp.sigma * jp.mu) as f64 / self.dirs.mu0)));
        }
        let cell = Grid::new(n / s)?;
        let samples: Vec<f64> = (0..cell.len())
            .map(|i| {
                let (a, b) = cell.point(i);
                self.potential_at(jp, idx, [a, b], self.c_xi).0
            })
            .collect();
        let cell_band = band.map(|b| b / s as i64).unwrap_or(cell.n() as i64 / 2 - 1);
        let coarse = ScalarField::from_physical(&cell, &samples)?.truncate(cell_band);
        let lifted = lift(&coarse, grid, s)?;
        let xi = self.dirs.dirs[idx];
        let (w, _) = w_from_psi(&lifted, xi, jp.sigma);
        let mean_w2 = w.energy();
        let ratio = 1.0 / mean_w2.sqrt();
        Ok(StationaryJet { idx, xi, sigma: jp.sigma, psi: lifted.scale(ratio), grid_to_continuous: ratio })
    }
}

fn wrap(d: f64) -> f64 {
    d - d.round()
}

/// Copies a cell-grid field onto modes `sigma k` of the fine grid.
fn lift(coarse: &ScalarField, fine: &Grid, sigma: usize) -> Result<ScalarField> {
    let cg = coarse.grid();
    let mut coeffs = vec![num_complex::Complex64::new(0.0, 0.0); fine.len()];
    for i in 0..cg.len() {
        let c = coarse.coeffs()[i];
        if c.norm() == 0.0 {
            continue;
        }
        let (k1, k2) = cg.mode(i);
        let s = sigma as i64;
        let j = fine.index_of(s * k1, s * k2).ok_or_else(|| Error::Aliasing("lifted mode outside grid".into()))?;
        coeffs[j] = c;
    }
    ScalarField::from_coeffs(fine, coeffs)
}

/// `W = -sigma^{-1} (xi_perp . grad Psi) xi`, `W^(c) = sigma^{-1} (xi . grad Psi) xi_perp`.
pub fn w_from_psi(psi: &ScalarField, xi: [f64; 2], sigma: u32) -> (VectorField, VectorField) {
    let xp = perp(xi);
    let (d1, d2) = (psi.dx(1), psi.dx(2));
    let s = sigma as f64;
    let across = d1.scale(xp[0]).add(&d2.scale(xp[1])).scale(-1.0 / s);
    let along = d1.scale(xi[0]).add(&d2.scale(xi[1])).scale(1.0 / s);
    (
        VectorField::new(across.scale(xi[0]), across.scale(xi[1])),
        VectorField::new(along.scale(xp[0]), along.scale(xp[1])),
    )
}

#[derive(Clone, Debug)]
pub struct JetFields {
    pub psi: ScalarField,
    pub w: VectorField,
    pub wc: VectorField,
}

/// Spectrally represented jet at phase zero.
#[derive(Clone, Debug)]
pub struct StationaryJet {
    pub idx: usize,
    pub xi: [f64; 2],
    pub sigma: u32,
    pub psi: ScalarField,
    /// `c_grid / c_xi`.
    pub grid_to_continuous: f64,
}

impl StationaryJet {
    /// Potential at phase `phi`: translation of the stationary field by `phi xi / sigma`.
    pub fn psi_at(&self, phase: f64) -> ScalarField {
        let s = phase / self.sigma as f64;
        self.psi.translate(s * self.xi[0], s * self.xi[1])
    }

    pub fn fields(&self, phase: f64) -> JetFields {
        let psi = self.psi_at(phase);
        let (w, wc) = w_from_psi(&psi, self.xi, self.sigma);
        JetFields { psi, w, wc }
    }
}

/// Residuals of the jet identities at one time.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JetIdentityReport {
    pub direction: usize,
    pub time: f64,
    pub perp_identity: f64,
    pub transport_dt: [f64; 2],
    pub transport_order: f64,
    pub transport_extrapolated: f64,
    pub potential_dt: [f64; 2],
    pub potential_order: f64,
    pub potential_extrapolated: f64,
    pub mean_w: f64,
}

fn sup(v: &VectorField) -> f64 {
    v.norm(NormKind::Linf)
}

fn rel(diff: f64, scale: f64) -> f64 {
    diff / scale.max(1.0)
}

/// Checks `sigma^{-1} grad^perp Psi = W + W^(c)`, `d_t |W|^2 xi = sigma^{-1} theta g div(W (x) W)`
/// and `d_t Psi = sigma^{-1} theta g (xi . grad) Psi` at time `t`, with centered
/// differences of step `dt` and `dt/2`.
pub fn jet_identity_checks(js: &JetSystem, jp: &JetParams, jet: &StationaryJet, t: f64, dt: f64) -> JetIdentityReport {
    let idx = jet.idx;
    let xi = jet.xi;
    let s = jp.sigma as f64;
    let tv = js.temporal(jp, idx, t);
    let f = jet.fields(tv.phase);
    let perp_grad = VectorField::perp_gradient(&f.psi).scaled(1.0 / s);
    let perp_identity = rel(sup(&perp_grad.minus(&f.w.plus(&f.wc))), sup(&perp_grad));

    let w2 = |phase: f64| {
        let w = jet.fields(phase).w;
        VectorField::dot(&w, &w)
    };
    let rhs_t = {
        let ww = VectorField::outer_self(&f.w);
        ww.div().scaled(tv.g * jp.theta as f64 / s)
    };
    let along = |p: &ScalarField| p.dx(1).scale(xi[0]).add(&p.dx(2).scale(xi[1]));
    let rhs_p = along(&f.psi).scale(tv.g * jp.theta as f64 / s);
    let mut tr = [0.0; 2];
    let mut pr = [0.0; 2];
    let mut dts = [VectorField::zeros(f.psi.grid()), VectorField::zeros(f.psi.grid())];
    let mut dps = [ScalarField::zeros(f.psi.grid()), ScalarField::zeros(f.psi.grid())];
    for (k, h) in [dt, dt / 2.0].into_iter().enumerate() {
        let (a, b) = (js.temporal(jp, idx, t + h).phase, js.temporal(jp, idx, t - h).phase);
        let d = w2(a).sub(&w2(b)).scale(0.5 / h);
        let lhs = VectorField::new(d.scale(xi[0]), d.scale(xi[1]));
        tr[k] = rel(sup(&lhs.minus(&rhs_t)), sup(&rhs_t));
        dts[k] = lhs;
        let dp = jet.psi_at(a).sub(&jet.psi_at(b)).scale(0.5 / h);
        pr[k] = rel(dp.sub(&rhs_p).norm(NormKind::Linf), rhs_p.norm(NormKind::Linf));
        dps[k] = dp;
    }
    let ext_t = dts[1].scaled(4.0 / 3.0).minus(&dts[0].scaled(1.0 / 3.0));
    let ext_p = dps[1].scale(4.0 / 3.0).sub(&dps[0].scale(1.0 / 3.0));
    let order = |r: [f64; 2]| if r[1] > 0.0 && r[0] > 0.0 { (r[0] / r[1]).log2() } else { f64::INFINITY };
    JetIdentityReport {
        direction: idx,
        time: t,
        perp_identity,
        transport_dt: tr,
        transport_order: order(tr),
        transport_extrapolated: rel(sup(&ext_t.minus(&rhs_t)), sup(&rhs_t)),
        potential_dt: pr,
        potential_order: order(pr),
        potential_extrapolated: rel(ext_p.sub(&rhs_p).norm(NormKind::Linf), rhs_p.norm(NormKind::Linf)),
        mean_w: f.w.mean()[0].abs().max(f.w.mean()[1].abs()),
    }
}

/// `max |mean(W (x) W) - xi (x) xi|` for grid samples of the analytic jet.
pub fn normalization_defect(js: &JetSystem, jp: &JetParams, idx: usize, grid: &Grid) -> Result<f64> {
    let f = js.sampled_fields(jp, idx, grid, 0.0)?;
    let phys = f.w.physical();
    let n = grid.len() as f64;
    let mut m = [[0.0; 2]; 2];
    for i in 0..grid.len() {
        for a in 0..2 {
            for b in 0..2 {
                m[a][b] += phys[a][i] * phys[b][i] / n;
            }
        }
    }
    let xi = js.dirs.dirs[idx];
    let mut err: f64 = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            err = err.max((m[a][b] - xi[a] * xi[b]).abs());
        }
    }
    Ok(err)
}

/// True when the analytic stationary supports of distinct directions do not meet on the grid.
pub fn supports_disjoint(js: &JetSystem, jp: &JetParams, grid: &Grid) -> bool {
    let s: Vec<Vec<f64>> = (0..js.dirs.len())
        .map(|i| {
            let xp = perp(js.dirs.dirs[i]);
            let xi = js.dirs.dirs[i];
            (0..grid.len())
                .map(|k| {
                    let (a, b) = grid.point(k);
                    let (v, g) = js.potential_at(jp, i, [a, b], js.c_xi);
                    v.abs() + (g[0] * xp[0] + g[1] * xp[1]).abs() + (g[0] * xi[0] + g[1] * xi[1]).abs()
                })
                .collect()
        })
        .collect();
    for i in 0..s.len() {
        for j in (i + 1)..s.len() {
            if s[i].iter().zip(&s[j]).any(|(a, b)| *a != 0.0 && *b != 0.0) {
                return false;
            }
        }
    }
    true
}

/// Number of directions with `g != 0` at time `t`.
pub fn active_count(js: &JetSystem, jp: &JetParams, t: f64) -> usize {
    (0..js.dirs.len()).filter(|&i| js.temporal(jp, i, t).g != 0.0).count()
}

/// Row of the `(2.4)`-type scaling table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingRow {
    pub mu: u32,
    pub order: u32,
    pub p: f64,
    pub value: f64,
    pub normalized: f64,
}

/// `|grad^N W|_{L^p} / ((sigma mu)^N (nu mu)^{1/2 - 1/p})` for sampled jets.
pub fn scaling_table(js: &JetSystem, base: &JetParams, mus: &[u32], grid: &Grid) -> Result<Vec<ScalingRow>> {
    let mut rows = Vec::new();
    for &mu in mus {
        let jp = JetParams { mu, ..*base };
        let f = js.sampled_fields(&jp, 0, grid, 0.0)?;
        for order in [0u32, 1] {
            for p in [1.0, 2.0, f64::INFINITY] {
                let value = if order == 0 {
                    f.w.norm(NormKind::Lp(p))
                } else {
                    let g = [f.w.c[0].dx(1), f.w.c[0].dx(2), f.w.c[1].dx(1), f.w.c[1].dx(2)];
                    let phys: Vec<Vec<f64>> = g.iter().map(|c| c.to_physical()).collect();
                    crate::field::lp_of_samples(&phys, &[1.0; 4], p)
                };
                let scale = ((jp.sigma * mu) as f64).powi(order as i32) * ((jp.nu * mu) as f64).powf(0.5 - 1.0 / p);
                rows.push(ScalingRow { mu, order, p, value, normalized: value / scale });
            }
        }
    }
    Ok(rows)
}
