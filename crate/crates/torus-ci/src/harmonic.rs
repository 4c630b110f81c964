//! Littlewood-Paley blocks, Besov norms, Bony paraproducts and the improved
//! Hoelder inequality.

use crate::error::{Error, Result};
use crate::field::{Field, Grid, Padded, ScalarField, SymTensorField, VectorField};
use crate::quad::{gauss_legendre, loglog_slope};
use serde::{Deserialize, Serialize};

const INNER: f64 = 0.75;
const OUTER: f64 = 4.0 / 3.0;

fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / s).exp();
        let b = (-1.0 / (1.0 - s)).exp();
        a / (a + b)
    }
}

/// Radial cutoff: 1 on `r <= 3/4`, 0 on `r >= 4/3`.
pub fn cutoff(r: f64) -> f64 {
    1.0 - smooth_step((r - INNER) / (OUTER - INNER))
}

/// Weight of block `j` at frequency radius `r`.
pub fn block_weight(j: i32, r: f64) -> f64 {
    match j {
        j if j < -1 => 0.0,
        -1 => cutoff(r),
        j => cutoff(r / 2f64.powi(j + 1)) - cutoff(r / 2f64.powi(j)),
    }
}

/// Symbol of `sum_{i <= j} Delta_i`.
pub fn low_pass_weight(j: i32, r: f64) -> f64 {
    if j < -1 {
        0.0
    } else {
        cutoff(r / 2f64.powi(j + 1))
    }
}

/// Largest block index carrying any retained mode of the grid.
pub fn j_max(grid: &Grid) -> i32 {
    let rmax = std::f64::consts::SQRT_2 * (grid.n() / 2) as f64;
    let mut j = -1;
    while rmax / 2f64.powi(j + 1) > INNER {
        j += 1;
    }
    j
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicPartition {
    pub j_max: i32,
}

impl DyadicPartition {
    pub fn for_grid(grid: &Grid) -> Self {
        DyadicPartition { j_max: j_max(grid) }
    }

    pub fn weight(&self, j: i32, r: f64) -> f64 {
        if j > self.j_max {
            0.0
        } else {
            block_weight(j, r)
        }
    }

    pub fn blocks(&self) -> std::ops::RangeInclusive<i32> {
        -1..=self.j_max
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesovIndex {
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
}

impl BesovIndex {
    pub fn new(alpha: f64, p: f64, q: f64) -> Result<Self> {
        if !(p >= 1.0) || !(q >= 1.0) {
            return Err(Error::InvalidArgument(format!("Besov indices need p, q >= 1 (got {p}, {q})")));
        }
        Ok(BesovIndex { alpha, p, q })
    }

    pub fn holder(alpha: f64) -> Self {
        BesovIndex { alpha, p: f64::INFINITY, q: f64::INFINITY }
    }
}

fn radius(k1: i64, k2: i64) -> f64 {
    ((k1 * k1 + k2 * k2) as f64).sqrt()
}

/// `Delta_j f`.
pub fn lp_block<F: Field>(f: &F, j: i32) -> F {
    f.map(|c| c.apply_real_multiplier(|a, b| block_weight(j, radius(a, b))))
}

/// All blocks `Delta_{-1} f, .., Delta_{J_max} f`.
pub fn lp_blocks(f: &ScalarField) -> Vec<ScalarField> {
    (-1..=j_max(f.grid())).map(|j| lp_block(f, j)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    AtMost,
    Above,
}

/// `Delta_{<= J} f` or `Delta_{> J} f`.
pub fn localize<F: Field>(f: &F, big_j: i32, side: Side) -> F {
    let jm = j_max(f.grid());
    let low = f.map(|c| {
        if big_j >= jm {
            c.clone()
        } else {
            c.apply_real_multiplier(|a, b| low_pass_weight(big_j, radius(a, b)))
        }
    });
    match side {
        Side::AtMost => low,
        Side::Above => f.minus(&low),
    }
}

/// `Delta_{<= hi} Delta_{> lo} f`.
pub fn band<F: Field>(f: &F, lo: i32, hi: i32) -> F {
    localize(&localize(f, lo, Side::Above), hi, Side::AtMost)
}

/// `(sum_j 2^{j alpha q} |Delta_j f|_{L^p}^q)^{1/q}`.
pub fn besov_norm<F: Field>(f: &F, idx: BesovIndex) -> f64 {
    let jm = j_max(f.grid());
    let mut terms = Vec::new();
    for j in -1..=jm {
        let b = lp_block(f, j);
        let v = b.norm(crate::field::NormKind::Lp(idx.p));
        terms.push(2f64.powf(j as f64 * idx.alpha) * v);
    }
    if idx.q.is_infinite() {
        terms.into_iter().fold(0.0, f64::max)
    } else {
        terms.iter().map(|t| t.powf(idx.q)).sum::<f64>().powf(1.0 / idx.q)
    }
}

/// `C^alpha = B^alpha_{inf,inf}`.
pub fn holder_norm<F: Field>(f: &F, alpha: f64) -> f64 {
    besov_norm(f, BesovIndex::holder(alpha))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LocalizeReport {
    pub tail: f64,
    pub scale: f64,
    pub implied_constant: f64,
}

/// Measures `C` in `|Delta_{>J} f|_{C^alpha} <= C 2^{-J(beta-alpha)} |f|_{C^beta}`.
pub fn localize_bound(f: &ScalarField, big_j: i32, alpha: f64, beta: f64) -> LocalizeReport {
    let tail = holder_norm(&localize(f, big_j, Side::Above), alpha);
    let scale = 2f64.powf(-(big_j as f64) * (beta - alpha)) * holder_norm(f, beta);
    LocalizeReport { tail, scale, implied_constant: if scale > 0.0 { tail / scale } else { 0.0 } }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Para {
    /// `f < g`: low frequencies of `f` against high of `g`.
    Low,
    /// `f > g = g < f`.
    High,
    /// `f o g`: comparable frequencies.
    Resonant,
    /// `o + <`.
    LowResonant,
    /// `o + >`.
    HighResonant,
}

fn padded_blocks(f: &ScalarField) -> Vec<Padded> {
    lp_blocks(f).iter().map(|b| b.padded()).collect()
}

fn low_padded(fb: &[Padded], gb: &[Padded], acc: &mut Padded) {
    // blocks are indexed by j + 1
    let grid_zero = || {
        let mut z = fb[0].clone();
        z.axpy(-1.0, &fb[0]);
        z
    };
    let mut s = grid_zero();
    for jj in 2..gb.len() {
        s.axpy(1.0, &fb[jj - 2]);
        acc.add_product(&s, &gb[jj]);
    }
}

fn resonant_padded(fb: &[Padded], gb: &[Padded], acc: &mut Padded) {
    let n = fb.len();
    for i in 0..n {
        for j in i.saturating_sub(1)..(i + 2).min(n) {
            acc.add_product(&fb[i], &gb[j]);
        }
    }
}

fn paraproduct_blocks(fb: &[Padded], gb: &[Padded], kind: Para, grid: &Grid) -> ScalarField {
    let mut acc = Padded::zeros(grid);
    match kind {
        Para::Low => low_padded(fb, gb, &mut acc),
        Para::High => low_padded(gb, fb, &mut acc),
        Para::Resonant => resonant_padded(fb, gb, &mut acc),
        Para::LowResonant => {
            low_padded(fb, gb, &mut acc);
            resonant_padded(fb, gb, &mut acc);
        }
        Para::HighResonant => {
            low_padded(gb, fb, &mut acc);
            resonant_padded(fb, gb, &mut acc);
        }
    }
    acc.to_field()
}

/// Bony paraproduct of two scalar fields.
pub fn paraproduct(f: &ScalarField, g: &ScalarField, kind: Para) -> ScalarField {
    paraproduct_blocks(&padded_blocks(f), &padded_blocks(g), kind, f.grid())
}

/// Componentwise `(f_i * g_j)_{ij}`.
pub fn tensor_paraproduct(f: &VectorField, g: &VectorField, kind: Para) -> [[ScalarField; 2]; 2] {
    let fb: Vec<Vec<Padded>> = f.c.iter().map(padded_blocks).collect();
    let gb: Vec<Vec<Padded>> = g.c.iter().map(padded_blocks).collect();
    let grid = f.grid();
    let e = |i: usize, j: usize| paraproduct_blocks(&fb[i], &gb[j], kind, grid);
    [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
}

/// `u_i * z_j + u_j * z_i`, the symmetric combination `u (*) z + z (*') u`.
pub fn sym_paraproduct(u: &VectorField, z: &VectorField, kind: Para) -> SymTensorField {
    let t = tensor_paraproduct(u, z, kind);
    SymTensorField::new(t[0][0].scale(2.0), t[0][1].add(&t[1][0]), t[1][1].scale(2.0))
}

/// Measured constant in `|f < g|_{B^beta_{p,q}} <= C |f|_{L^{p1}} |g|_{B^beta_{p2,q}}`
/// with `1/p = 1/p1 + 1/p2`.
pub fn paraproduct_constant(f: &ScalarField, g: &ScalarField, beta: f64, p1: f64, p2: f64, q: f64) -> f64 {
    let p = 1.0 / (1.0 / p1 + 1.0 / p2);
    let lhs = besov_norm(&paraproduct(f, g, Para::Low), BesovIndex { alpha: beta, p, q });
    let rhs = f.norm(crate::field::NormKind::Lp(p1)) * besov_norm(g, BesovIndex { alpha: beta, p: p2, q });
    if rhs > 0.0 {
        lhs / rhs
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HolderCheck {
    pub sigma: u32,
    pub lhs: f64,
    pub product: f64,
    pub gap: f64,
    pub bound: f64,
}

struct CellRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl CellRule {
    /// Gauss rule on `[0,1]` with `splits` equal sub-panels.
    fn new(order: usize, splits: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        let h = 1.0 / splits as f64;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for s in 0..splits {
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push((s as f64 + 0.5 * (xi + 1.0)) * h);
                weights.push(0.5 * wi * h);
            }
        }
        CellRule { nodes, weights }
    }

    /// Integrate over the cube `[lo, lo + h]^d`.
    fn cube(&self, dim: usize, lo: &[f64], h: f64, f: &mut dyn FnMut(&[f64]) -> f64) -> f64 {
        let k = self.nodes.len();
        let mut pt = vec![0.0; dim];
        let mut total = 0.0;
        let count = k.pow(dim as u32);
        for idx in 0..count {
            let mut rem = idx;
            let mut w = h.powi(dim as i32);
            for d in 0..dim {
                let i = rem % k;
                rem /= k;
                pt[d] = lo[d] + h * self.nodes[i];
                w *= self.weights[i];
            }
            total += w * f(&pt);
        }
        total
    }
}

fn cells(dim: usize, m: u32, n: u32) -> Vec<Vec<u32>> {
    let side: Vec<u32> = (m..n).collect();
    let mut out: Vec<Vec<u32>> = vec![vec![]];
    for _ in 0..dim {
        out = out.into_iter().flat_map(|c| side.iter().map(move |&s| [c.clone(), vec![s]].concat())).collect();
    }
    out
}

/// `sup |a| + Lip(a)` on the window, by sampling a lattice.
fn lipschitz_norm(a: &dyn Fn(&[f64]) -> f64, dim: usize, lo: f64, hi: f64) -> f64 {
    let k: usize = if dim == 1 { 4096 } else { 256 };
    let h = (hi - lo) / k as f64;
    let mut sup: f64 = 0.0;
    let mut lip: f64 = 0.0;
    let count = (k + 1usize).pow(dim as u32);
    let mut pt = vec![0.0; dim];
    for idx in 0..count {
        let mut rem = idx;
        for p in pt.iter_mut() {
            *p = lo + h * (rem % (k + 1)) as f64;
            rem /= k + 1;
        }
        let v = a(&pt);
        sup = sup.max(v.abs());
        for d in 0..dim {
            if pt[d] + h <= hi + 1e-12 {
                let mut q = pt.clone();
                q[d] += h;
                lip = lip.max((a(&q) - v).abs() / h);
            }
        }
    }
    sup + lip
}

/// Compares `|a f(sigma .)|_{L^p}` with `|a|_{L^p} |f|_{L^p(T^d)}` on `[m/sigma, n/sigma]^d`.
///
/// `f` is evaluated on `[0,1)^d` and treated as 1-periodic.
pub fn improved_holder_check(
    a: &dyn Fn(&[f64]) -> f64,
    f: &dyn Fn(&[f64]) -> f64,
    dim: usize,
    sigma: u32,
    m: u32,
    n: u32,
    p: f64,
) -> Result<HolderCheck> {
    if m >= n {
        return Err(Error::InvalidArgument(format!("empty window [{m}, {n}]")));
    }
    if sigma == 0 || !(dim == 1 || dim == 2) || !(p >= 1.0) {
        return Err(Error::InvalidArgument("need sigma >= 1, d in {1,2}, p >= 1".into()));
    }
    let rule = CellRule::new(12, 2);
    let h = 1.0 / sigma as f64;
    let s = sigma as f64;
    let frac = |x: f64| x - x.floor();
    let (mut lhs, mut anorm, mut fnorm);
    if p.is_infinite() {
        lhs = 0.0f64;
        anorm = 0.0f64;
        fnorm = 0.0f64;
        for cell in cells(dim, m, n) {
            let lo: Vec<f64> = cell.iter().map(|&c| c as f64 * h).collect();
            rule.cube(dim, &lo, h, &mut |x| {
                let y: Vec<f64> = x.iter().map(|v| frac(s * v)).collect();
                let (av, fv) = (a(x).abs(), f(&y).abs());
                lhs = lhs.max(av * fv);
                anorm = anorm.max(av);
                fnorm = fnorm.max(fv);
                0.0
            });
        }
    } else {
        lhs = 0.0;
        anorm = 0.0;
        for cell in cells(dim, m, n) {
            let lo: Vec<f64> = cell.iter().map(|&c| c as f64 * h).collect();
            lhs += rule.cube(dim, &lo, h, &mut |x| {
                let y: Vec<f64> = x.iter().map(|v| frac(s * v)).collect();
                (a(x) * f(&y)).abs().powf(p)
            });
            anorm += rule.cube(dim, &lo, h, &mut |x| a(x).abs().powf(p));
        }
        fnorm = rule.cube(dim, &vec![0.0; dim], 1.0, &mut |y| f(y).abs().powf(p)).powf(1.0 / p);
        lhs = lhs.powf(1.0 / p);
        anorm = anorm.powf(1.0 / p);
    }
    let product = anorm * fnorm;
    let lip = lipschitz_norm(a, dim, m as f64 * h, n as f64 * h);
    let width = (n - m) as f64 / s;
    let bound = s.powf(-1.0 / p) * width.powf(dim as f64 / p) * lip * fnorm;
    Ok(HolderCheck { sigma, lhs, product, gap: (lhs - product).abs(), bound })
}

/// `|int a(t) f(sigma t) dt|` over `[m/sigma, n/sigma]` and the bound
/// `(n-m) sigma^{-2} |a|_{C^{0,1}} |f|_{L^1}` for mean-zero `f`.
pub fn mean_zero_pairing(a: &dyn Fn(f64) -> f64, f: &dyn Fn(f64) -> f64, sigma: u32, m: u32, n: u32) -> Result<(f64, f64)> {
    if m >= n {
        return Err(Error::InvalidArgument(format!("empty window [{m}, {n}]")));
    }
    let rule = CellRule::new(16, 2);
    let h = 1.0 / sigma as f64;
    let s = sigma as f64;
    let mut total = 0.0;
    for c in m..n {
        total += rule.cube(1, &[c as f64 * h], h, &mut |x| a(x[0]) * f((s * x[0]).fract()));
    }
    let f1 = rule.cube(1, &[0.0], 1.0, &mut |y| f(y[0]).abs());
    let lip = lipschitz_norm(&|x: &[f64]| a(x[0]), 1, m as f64 * h, n as f64 * h);
    Ok((total.abs(), (n - m) as f64 / (s * s) * lip * f1))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HolderSweep {
    pub p: f64,
    pub dim: usize,
    pub checks: Vec<HolderCheck>,
    pub slope: f64,
}

/// Runs the check on the window `[0, 1]^d` for each `sigma` and fits the decay rate of the gap.
pub fn holder_sweep(a: &dyn Fn(&[f64]) -> f64, f: &dyn Fn(&[f64]) -> f64, dim: usize, p: f64, sigmas: &[u32]) -> Result<HolderSweep> {
    let checks = sigmas
        .iter()
        .map(|&s| improved_holder_check(a, f, dim, s, 0, s, p))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = checks.iter().map(|c| c.sigma as f64).collect();
    let ys: Vec<f64> = checks.iter().map(|c| c.gap.max(1e-300)).collect();
    Ok(HolderSweep { p, dim, slope: loglog_slope(&xs, &ys), checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{random_scalar, NormKind, TAU};
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    #[test]
    fn partition_of_unity_per_mode() {
        for n in [8, 16, 32, 64, 128] {
            let g = grid(n);
            let jm = j_max(&g);
            for i in 0..g.len() {
                let (a, b) = g.mode(i);
                let s: f64 = (-1..=jm).map(|j| block_weight(j, radius(a, b))).sum();
                assert!((s - 1.0).abs() < 1e-12, "n={n} k=({a},{b}) sum={s}");
            }
        }
    }

    #[test]
    fn block_supports_overlap_only_neighbours() {
        for r in (0..2000).map(|i| i as f64 * 0.1) {
            let active: Vec<i32> = (-1..12).filter(|&j| block_weight(j, r) > 0.0).collect();
            assert!(active.len() <= 2);
            if active.len() == 2 {
                assert_eq!(active[1] - active[0], 1);
            }
        }
    }

    #[test]
    fn constant_lives_in_low_block() {
        let g = grid(16);
        let one = ScalarField::constant(&g, 1.0);
        assert!((lp_block(&one, -1).mean() - 1.0).abs() < 1e-15);
        for j in 0..=j_max(&g) {
            assert!(lp_block(&one, j).max_abs_coeff() < 1e-15);
        }
        let b = besov_norm(&one, BesovIndex::new(0.7, 2.0, 2.0).unwrap());
        assert!((b - 2f64.powf(-0.7)).abs() < 1e-14);
        assert_eq!(besov_norm(&ScalarField::zeros(&g), BesovIndex::holder(1.0)), 0.0);
    }

    #[test]
    fn single_mode_twelve_splits_by_profile() {
        let g = grid(32);
        let f = ScalarField::real_mode(&g, 12, 0, Complex64::new(0.5, 0.0)).unwrap();
        // r = 12: block 3 covers (6, 64/3), block 4 covers (12, 128/3)
        let w3 = cutoff(12.0 / 16.0) - cutoff(12.0 / 8.0);
        let w4 = cutoff(12.0 / 32.0) - cutoff(12.0 / 16.0);
        assert!((w3 - 1.0).abs() < 1e-15 && w4.abs() < 1e-15);
        let mut total = 0.0;
        for j in -1..=j_max(&g) {
            let c = lp_block(&f, j).coeff(12, 0).re / 0.5;
            assert!((c - block_weight(j, 12.0)).abs() < 1e-15);
            total += c;
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn holder_norm_single_mode_eight() {
        let g = grid(32);
        let f = ScalarField::real_mode(&g, 8, 0, Complex64::new(0.5, 0.0)).unwrap();
        let v = holder_norm(&f, 1.0);
        let oracle = (-1..=j_max(&g)).map(|j| 2f64.powi(j) * block_weight(j, 8.0)).fold(0.0, f64::max);
        assert!((v - oracle).abs() < 1e-12);
    }

    #[test]
    fn localize_examples() {
        let g = grid(256);
        let f = ScalarField::from_fn(&g, |x, _| (TAU * x).cos() + (TAU * 100.0 * x).cos());
        let hi = localize(&f, 4, Side::Above);
        let oracle = ScalarField::from_fn(&g, |x, _| (TAU * 100.0 * x).cos());
        assert!(hi.max_coeff_diff(&oracle) < 1e-13);
        assert!(localize(&f, j_max(&g), Side::AtMost).max_coeff_diff(&f) == 0.0);
        assert!(localize(&f, -2, Side::AtMost).max_abs_coeff() == 0.0);
        let rep = localize_bound(&f, 4, 0.0, 1.0);
        assert!(rep.implied_constant > 0.0 && rep.implied_constant < 10.0);
    }

    #[test]
    fn paraproduct_block_separation() {
        let g = grid(512);
        // |k| = 3 lies only in block 1 and |k| = 200 only in block 7 (r in (96, 170.7)) or 8
        let f = ScalarField::real_mode(&g, 3, 0, Complex64::new(0.5, 0.0)).unwrap();
        let h = ScalarField::real_mode(&g, 0, 200, Complex64::new(0.5, 0.0)).unwrap();
        let low = paraproduct(&f, &h, Para::Low);
        let full = f.product(&h);
        assert!(low.max_coeff_diff(&full) < 1e-13);
        assert!(paraproduct(&f, &h, Para::Resonant).max_abs_coeff() < 1e-13);
    }

    #[test]
    fn paraproduct_with_constant() {
        let g = grid(32);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_scalar(&g, 12, 1.0, &mut rng);
        let one = ScalarField::constant(&g, 1.0);
        let sum = paraproduct(&f, &one, Para::Low)
            .add(&paraproduct(&f, &one, Para::Resonant))
            .add(&paraproduct(&f, &one, Para::High));
        assert!(sum.max_coeff_diff(&f.truncate(15)) < 1e-12);
    }

    #[test]
    fn improved_holder_constant_a_has_no_gap() {
        let f = |y: &[f64]| 1.0 + 0.5 * (TAU * y[0]).cos();
        let c = improved_holder_check(&|_| 2.0, &f, 1, 8, 0, 8, 1.0).unwrap();
        assert!(c.gap < 1e-13);
    }

    #[test]
    fn mean_zero_pairing_within_bound() {
        for s in [4, 8, 16, 32] {
            let (v, b) = mean_zero_pairing(&|t| t, &|y| (TAU * y).sin(), s, 0, s).unwrap();
            // int_0^1 t sin(2 pi s t) dt = -1/(2 pi s)
            assert!((v - 1.0 / (TAU * s as f64)).abs() < 1e-12);
            assert!(v <= b * s as f64);
        }
    }

    #[test]
    fn holder_sweep_slopes() {
        let sig = [4, 8, 16, 32, 64];
        let f = |y: &[f64]| if y[0] < 0.5 { 1.0 } else { 0.25 };
        for p in [1.0, 2.0] {
            let s = holder_sweep(&|x: &[f64]| 1.0 + x[0], &f, 1, p, &sig).unwrap();
            assert!(s.slope <= -1.0 / p + 0.2, "p={p} slope={}", s.slope);
        }
    }

    #[test]
    fn derivatives_commute_with_blocks() {
        let g = grid(32);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = random_scalar(&g, 15, 0.5, &mut rng);
        for j in -1..=j_max(&g) {
            assert!(lp_block(&f.dx(1), j).max_coeff_diff(&lp_block(&f, j).dx(1)) < 1e-12);
        }
    }

    #[test]
    fn besov_h_ratio_is_stable() {
        let g = grid(32);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for s in [0.0, 0.5, 1.0] {
            let ratios: Vec<f64> = (0..20)
                .map(|_| {
                    let f = random_scalar(&g, 12, 1.5, &mut rng);
                    besov_norm(&f, BesovIndex::new(s, 2.0, 2.0).unwrap()) / f.norm(NormKind::Hs(s))
                })
                .collect();
            let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
            for r in &ratios {
                assert!((r - mean).abs() <= 0.2 * mean, "s={s} ratio {r} mean {mean}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn reconstruction_and_bony(seed in any::<u64>()) {
            let g = grid(32);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_scalar(&g, 15, 0.5, &mut rng);
            let h = random_scalar(&g, 15, 0.5, &mut rng);
            let mut sum = ScalarField::zeros(&g);
            for b in lp_blocks(&f) {
                sum.axpy(1.0, &b);
            }
            prop_assert!(sum.max_coeff_diff(&f) < 1e-12);
            let bony = paraproduct(&f, &h, Para::Low)
                .add(&paraproduct(&f, &h, Para::Resonant))
                .add(&paraproduct(&f, &h, Para::High));
            prop_assert!(bony.max_coeff_diff(&f.product(&h)) < 1e-10);
            let lr = paraproduct(&f, &h, Para::LowResonant);
            prop_assert!(lr.max_coeff_diff(&paraproduct(&f, &h, Para::Low).add(&paraproduct(&f, &h, Para::Resonant))) < 1e-12);
        }
    }
}
