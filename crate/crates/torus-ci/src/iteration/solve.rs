//! Fixed point for `v1`: per time step, an implicit exponential step iterated to
//! convergence, so that `v1(t_n)` only sees data at times `<= t_n`.

use super::track::Track;
use crate::error::{Error, Result};
use crate::field::{Field, Grid, NormKind, SymTensorField, VectorField};
use crate::harmonic::{sym_paraproduct, Para};
use crate::heat::EtdStepper;
use serde::{Deserialize, Serialize};

pub const PICARD_TOL: f64 = 1e-9;
pub const PICARD_MAX: usize = 100;

/// Per-step iteration counts and contraction ratios of successive increments.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PicardLog {
    pub iterations: Vec<usize>,
    /// Largest ratio of successive increments within each step (0 if fewer than 3 iterates).
    pub ratios: Vec<f64>,
    /// Final increment of each step.
    pub increments: Vec<f64>,
}

impl PicardLog {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_iterations(&self) -> usize {
        self.iterations.iter().copied().max().unwrap_or(0)
    }
}

/// Forcing data of the `v1` equation at one time.
pub struct V1Forcing {
    pub wick: SymTensorField,
    /// `v2 + z_in`.
    pub drift: VectorField,
    /// `Delta_{<= f} Delta_{> R} z`; `None` when it vanishes.
    pub band: Option<VectorField>,
}

fn rhs(f: &V1Forcing, v: &VectorField) -> VectorField {
    let mut flux = f.wick.clone();
    if let Some(zb) = &f.band {
        flux = flux.plus(&sym_paraproduct(&v.plus(&f.drift), zb, Para::Low));
    }
    flux.div().helmholtz_project().scaled(-1.0)
}

/// Solves `v_{n+1} = e^{dt Delta} v_n + phi(dt) F(v_{n+1}, t_{n+1})`, `v_0 = 0`, on
/// `n = 0..steps`. `forcing(n)` supplies the data at time `t_n`.
pub fn solve_v1(grid: &Grid, dt: f64, steps: usize, forcing: impl Fn(usize) -> V1Forcing) -> Result<(Track, PicardLog)> {
    let stepper = EtdStepper::new(grid, dt);
    let mut out = Track::new(grid, 2, dt);
    let mut log = PicardLog::default();
    let mut v = VectorField::zeros(grid);
    out.push(&v);
    for n in 1..=steps {
        let f = forcing(n);
        let base = stepper.step(&v, &VectorField::zeros(grid));
        let mut next = stepper.step(&v, &rhs(&f, &v));
        let (mut iters, mut ratio, mut inc) = (1usize, 0.0f64, 0.0f64);
        if f.band.is_some() {
            let mut prev_inc = f64::NAN;
            loop {
                let cand = base.plus(&stepper.step(&VectorField::zeros(grid), &rhs(&f, &next)));
                inc = cand.minus(&next).norm(NormKind::Lp(2.0));
                iters += 1;
                if prev_inc.is_finite() && prev_inc > 0.0 {
                    ratio = ratio.max(inc / prev_inc);
                }
                next = cand;
                if !inc.is_finite() {
                    return Err(Error::NonConvergence { iterations: iters, increment: inc, ratio });
                }
                if inc < PICARD_TOL {
                    break;
                }
                if iters >= PICARD_MAX {
                    return Err(Error::NonConvergence { iterations: iters, increment: inc, ratio });
                }
                prev_inc = inc;
            }
        }
        log.iterations.push(iters);
        log.ratios.push(ratio);
        log.increments.push(inc);
        v = next;
        out.push(&v);
    }
    Ok((out, log))
}
