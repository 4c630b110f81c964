//! Parameter schedule and the report of violated asymptotic constraints.

use crate::error::{Error, Result};
use crate::jets::JetParams;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Desk-scale replacements for the formula-derived values of one level.
///
/// Entry `l` applies to the construction of level `l`: `ell` mollifies level
/// `l - 1`, `jet` builds the perturbation, and `f` is the localizer index used by
/// the `v1` equation of level `l`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelOverride {
    pub ell: Option<f64>,
    pub f: Option<i32>,
    pub jet: Option<JetParams>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationParams {
    pub a: u64,
    pub b: u32,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Energy-splitting constant `K`.
    pub big_k: f64,
    /// Level `q` with `gamma_q = K`.
    pub k_level: usize,
    /// `L`.
    pub level_l: f64,
    /// Bound `N` on `|u0|_{L^p}`.
    pub n_bound: f64,
    pub p: f64,
    pub kappa: f64,
    /// Localizer cutoff `R`.
    pub r_cut: i32,
    /// Universal constant `M0` used in the ledger targets.
    pub m0: f64,
    /// Spectral band of the discrete jets (`None`: `N/4 - 1`).
    pub jet_band: Option<i64>,
    pub levels: BTreeMap<usize, LevelOverride>,
}

impl Default for IterationParams {
    fn default() -> Self {
        IterationParams {
            a: 4,
            b: 2,
            alpha: 0.01,
            beta: 0.5,
            gamma: 0.01,
            big_k: 2.0,
            k_level: 3,
            level_l: 2.0,
            n_bound: 2.0,
            p: 1.5,
            kappa: 0.05,
            r_cut: 4,
            m0: 1.0,
            jet_band: None,
            levels: BTreeMap::new(),
        }
    }
}

/// One asymptotic constraint of the parameter choice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

impl Constraint {
    fn le(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Constraint { name: name.into(), lhs, rhs, satisfied: lhs <= rhs }
    }

    fn lt(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Constraint { name: name.into(), lhs, rhs, satisfied: lhs < rhs }
    }
}

impl IterationParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.a < 2 || self.b < 2 {
            return bad(format!("need a, b >= 2, got a = {}, b = {}", self.a, self.b));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        let inv = 1.0 / self.gamma;
        if (inv - inv.round()).abs() > 1e-9 {
            return bad(format!("1/gamma must be an integer, got {inv}"));
        }
        if !(self.big_k > 1.0) {
            return bad(format!("K must exceed 1, got {}", self.big_k));
        }
        if self.level_l < 2.0 || self.n_bound < 2.0 {
            return bad(format!("need L, N >= 2, got L = {}, N = {}", self.level_l, self.n_bound));
        }
        if !(self.p > 1.0 && self.p < 2.0) {
            return bad(format!("p must lie in (1,2), got {}", self.p));
        }
        if !(self.kappa > 0.0 && self.kappa < self.kappa0()) {
            return bad(format!("kappa must lie in (0, {}), got {}", self.kappa0(), self.kappa));
        }
        if !(self.m0 > 0.0) {
            return bad(format!("M0 must be positive, got {}", self.m0));
        }
        for (l, o) in &self.levels {
            if let Some(e) = o.ell {
                if !(e > 0.0) {
                    return bad(format!("level {l}: ell must be positive, got {e}"));
                }
            }
        }
        Ok(())
    }

    pub fn ln_lambda(&self, q: usize) -> f64 {
        (self.b as f64).powi(q as i32) * (self.a as f64).ln()
    }

    /// `lambda_q = a^{b^q}` (may overflow to infinity).
    pub fn lambda(&self, q: usize) -> f64 {
        self.ln_lambda(q).exp()
    }

    /// `delta_q = lambda_1^{2 beta} lambda_q^{-2 beta} / 2`, with `delta_q = 1` for `q <= 0`.
    pub fn delta(&self, q: i64) -> f64 {
        if q <= 0 {
            1.0
        } else {
            0.5 * (2.0 * self.beta * (self.ln_lambda(1) - self.ln_lambda(q as usize))).exp()
        }
    }

    /// Cutoff time `sigma_q = delta_q`.
    pub fn sigma(&self, q: i64) -> f64 {
        self.delta(q)
    }

    /// Energy level `gamma_q`.
    pub fn gamma_level(&self, q: usize) -> f64 {
        if q == self.k_level {
            self.big_k
        } else {
            self.delta(q as i64)
        }
    }

    /// `t_q = -1 + sum_{1 <= r <= q} delta_r^{1/2}`.
    pub fn t_level(&self, q: usize) -> f64 {
        -1.0 + (1..=q).map(|r| self.delta(r as i64).sqrt()).sum::<f64>()
    }

    /// Mollification scale used to build level `q + 1`.
    pub fn ell(&self, q: usize) -> f64 {
        if let Some(e) = self.levels.get(&(q + 1)).and_then(|o| o.ell) {
            return e;
        }
        (-1.5 * self.alpha * self.ln_lambda(q + 1) - 2.0 * self.ln_lambda(q)).exp()
    }

    /// `f(q)` with `2^{f(q)} = lambda_q^{alpha / 8}`, rounded down.
    pub fn f_index(&self, q: usize) -> i32 {
        if let Some(f) = self.levels.get(&q).and_then(|o| o.f) {
            return f;
        }
        let v = self.alpha / 8.0 * self.ln_lambda(q) / std::f64::consts::LN_2;
        v.floor().min(i32::MAX as f64) as i32
    }

    /// Jet parameters of level `q + 1`: `sigma = lambda^{2 gamma}`, `eta = lambda^{16 gamma}`,
    /// `nu = lambda^{1 - 8 gamma}`, `mu = lambda`, `theta = lambda^{1 + 5 gamma}` with
    /// `lambda = lambda_{q+1}`, each rounded to the nearest integer.
    pub fn jet(&self, q: usize) -> JetParams {
        if let Some(j) = self.levels.get(&(q + 1)).and_then(|o| o.jet) {
            return j;
        }
        let ll = self.ln_lambda(q + 1);
        let g = self.gamma;
        let r = |e: f64| (e * ll).exp().round().clamp(1.0, u32::MAX as f64) as u32;
        JetParams { sigma: r(2.0 * g), eta: r(16.0 * g), nu: r(1.0 - 8.0 * g), mu: r(1.0), theta: r(1.0 + 5.0 * g) }
    }

    pub fn kappa0(&self) -> f64 {
        (1.0 - 1.0 / self.p).min(2.0 / self.p - 1.0)
    }

    pub fn kappa1(&self) -> f64 {
        (self.kappa0() / 4.0).min(1.0 / 6.0 - self.kappa0() / 2.0)
    }

    /// `M_L = max(L^9, N^2 L^2)`.
    pub fn m_l(&self) -> f64 {
        self.level_l.powi(9).max(self.n_bound.powi(2) * self.level_l.powi(2))
    }

    /// `A = ([3p / (p - 1)] + 1) M_L`.
    pub fn big_a(&self) -> f64 {
        ((3.0 * self.p / (self.p - 1.0)).floor() + 1.0) * self.m_l()
    }

    /// Constant `C` implied by `2^{kappa0 R} = 4 C L^2`.
    pub fn implied_c(&self) -> f64 {
        2f64.powf(self.kappa0() * self.r_cut as f64) / (4.0 * self.level_l.powi(2))
    }

    /// Every asymptotic constraint, evaluated for levels `0..q_max`.
    pub fn constraint_report(&self, q_max: usize) -> Vec<Constraint> {
        let (a, b) = (self.a as f64, self.b as f64);
        let (al, be, ga) = (self.alpha, self.beta, self.gamma);
        let (k0, k1) = (self.kappa0(), self.kappa1());
        let mut out = vec![
            Constraint::le("a^{2 beta (b-1)} >= 2", 2.0, a.powf(2.0 * be * (b - 1.0))),
            Constraint::le("a^{b beta} >= 4", 4.0, a.powf(b * be)),
            Constraint::lt("gamma < 1/56", ga, 1.0 / 56.0),
            Constraint::lt("(1/2 - 1/p)(2 - 8 gamma) < -10 gamma", (0.5 - 1.0 / self.p) * (2.0 - 8.0 * ga), -10.0 * ga),
            Constraint::lt("alpha < gamma/144", al, ga / 144.0),
            Constraint::lt("4 beta b / (3 kappa1) < alpha", 4.0 * be * b / (3.0 * k1), al),
            Constraint::lt("16 beta b^2 / kappa0 < alpha", 16.0 * be * b * b / k0, al),
            Constraint::lt("16 / (3 kappa1) < alpha b", 16.0 / (3.0 * k1), al * b),
        ];
        for q in 0..q_max {
            let qi = q as i64;
            out.push(Constraint::le(format!("2 delta_{} <= delta_{}", q + 1, q), 2.0 * self.delta(qi + 1), self.delta(qi)));
            out.push(Constraint::le(format!("ell_{q} <= delta_{}^(1/2)", q + 1), self.ell(q), self.delta(qi + 1).sqrt()));
            out.push(Constraint::le(format!("t_{} <= 0", q + 1), self.t_level(q + 1), 0.0));
            let j = self.jet(q);
            out.push(Constraint::lt(format!("mu0 < nu at level {}", q + 1), 8.0, j.nu as f64));
        }
        out
    }
}

/// Resolved values for the construction of level `level` from level `level - 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelPlan {
    pub level: usize,
    pub ell: f64,
    /// `gamma_{q+1}`.
    pub gamma: f64,
    /// `sigma_{q+1}`: start of the cutoff ramp.
    pub sigma_cut: f64,
    /// `sigma_q`: left end of the headline window.
    pub sigma_prev: f64,
    /// `t_{q+1}`.
    pub t_start: f64,
    /// `f(q+1)`.
    pub f: i32,
    pub jet: JetParams,
}

impl IterationParams {
    pub fn plan(&self, level: usize) -> LevelPlan {
        assert!(level >= 1);
        let q = level - 1;
        LevelPlan {
            level,
            ell: self.ell(q),
            gamma: self.gamma_level(level),
            sigma_cut: self.sigma(level as i64),
            sigma_prev: self.sigma(q as i64),
            t_start: self.t_level(level),
            f: self.f_index(level),
            jet: self.jet(q),
        }
    }
}
