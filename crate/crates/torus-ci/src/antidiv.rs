//! Inverse divergence `R` (vector to symmetric trace-free tensor) and its bilinear
//! variant `B`.

use crate::error::{Error, Result};
use crate::field::{Field, NormKind, ScalarField, SymTensorField, VectorField};
use crate::quad::loglog_slope;
use serde::{Deserialize, Serialize};

/// `(R v)_ij = Delta^{-1}(d_i v_j + d_j v_i) - delta_ij Delta^{-1} div v`.
pub fn antidiv(v: &VectorField) -> SymTensorField {
    let d11 = v.c[0].dx(1).sub(&v.c[1].dx(2)).inverse_laplacian();
    let d12 = v.c[1].dx(1).add(&v.c[0].dx(2)).inverse_laplacian();
    SymTensorField::new(d11.clone(), d12, d11.scale(-1.0))
}

/// `|R(Delta v) - (grad v + grad v^T)|_{L^inf}` for divergence-free `v`.
pub fn antidiv_laplace_identity(v: &VectorField) -> Result<f64> {
    let div = v.div().norm(NormKind::Linf);
    if div > 1e-8 {
        return Err(Error::NotDivergenceFree(div));
    }
    let lhs = antidiv(&v.laplacian());
    let sym = SymTensorField::new(
        v.c[0].dx(1).scale(2.0),
        v.c[0].dx(2).add(&v.c[1].dx(1)),
        v.c[1].dx(2).scale(2.0),
    );
    Ok(lhs.minus(&sym).norm(NormKind::Linf))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingReport {
    pub sigmas: Vec<u32>,
    pub ratios: Vec<f64>,
    pub slope: f64,
}

/// `|R f(sigma .)|_{L^p} / |f|_{L^p}` for each `sigma`, with the fitted log-log slope.
pub fn antidiv_scaling_check(f: &VectorField, sigmas: &[u32], p: f64) -> Result<ScalingReport> {
    let base = f.norm(NormKind::Lp(p));
    if base == 0.0 {
        return Err(Error::InvalidArgument("zero field".into()));
    }
    let mut ratios = Vec::new();
    for &s in sigmas {
        let fs = VectorField::new(f.c[0].oscillate(s)?, f.c[1].oscillate(s)?);
        ratios.push(antidiv(&fs).norm(NormKind::Lp(p)) / base);
    }
    let xs: Vec<f64> = sigmas.iter().map(|&s| s as f64).collect();
    let slope = if sigmas.len() > 1 { loglog_slope(&xs, &ratios) } else { 0.0 };
    Ok(ScalingReport { sigmas: sigmas.to_vec(), ratios, slope })
}

/// Scalar-weight version `B(a, f) = a R f - R((R f) grad a)`, so that
/// `div B(a, f) = a f - mean(a f)` for mean-zero `f`.
pub fn bilinear_scalar(a: &ScalarField, f: &VectorField) -> SymTensorField {
    let rf = antidiv(f);
    let first = SymTensorField::scalar_mul(a, &rf);
    let grad = VectorField::gradient(a);
    first.minus(&antidiv(&SymTensorField::apply(&rf, &grad)))
}

fn check_mean_zero(rows: &[VectorField; 2]) -> Result<()> {
    let m = rows.iter().flat_map(|r| r.mean()).fold(0.0, |m: f64, x| m.max(x.abs()));
    if m > 1e-12 {
        Err(Error::NonZeroMean(m))
    } else {
        Ok(())
    }
}

/// `B(v, A) = sum_l [v_l R(A_l) - R((R A_l) grad v_l)]` with `A_l` the rows of `A`.
pub fn bilinear_antidiv_rows(v: &VectorField, rows: &[VectorField; 2]) -> Result<SymTensorField> {
    check_mean_zero(rows)?;
    Ok(bilinear_scalar(&v.c[0], &rows[0]).plus(&bilinear_scalar(&v.c[1], &rows[1])))
}

pub fn bilinear_antidiv(v: &VectorField, a: &SymTensorField) -> Result<SymTensorField> {
    bilinear_antidiv_rows(v, &[a.row(0), a.row(1)])
}

/// `(v A)_k = v_l A_lk` with a dealiased product.
pub fn row_contract(v: &VectorField, a: &SymTensorField) -> VectorField {
    SymTensorField::apply(a, v)
}

/// Measured constant in `|B(v, A)|_{L^p} <= C |v|_{C^1} |R A|_{L^p}`.
pub fn bilinear_constant(v: &VectorField, a: &SymTensorField, p: f64) -> Result<f64> {
    let b = bilinear_antidiv(v, a)?.norm(NormKind::Lp(p));
    let ra = antidiv(&a.row(0)).norm(NormKind::Lp(p)).max(antidiv(&a.row(1)).norm(NormKind::Lp(p)));
    let rhs = v.norm(NormKind::CN(1)) * ra;
    Ok(if rhs > 0.0 { b / rhs } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{random_scalar, random_tensor, random_vector, Grid, TAU};
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Grid {
        Grid::new(16).unwrap()
    }

    #[test]
    fn zero_and_constant_inputs() {
        let g = grid();
        let z = antidiv(&VectorField::zeros(&g));
        assert!(z.c.iter().all(|c| c.max_abs_coeff() == 0.0));
        let c = VectorField::new(ScalarField::constant(&g, 2.0), ScalarField::constant(&g, -1.0));
        assert!(antidiv(&c).c.iter().all(|c| c.max_abs_coeff() == 0.0));
    }

    #[test]
    fn single_mode_symbol() {
        // v = (sin 2 pi x2, 0): k = (0, +-1); R11 = Delta^{-1}(d1 v1 - d2 v2) = 0,
        // R12 = Delta^{-1} d2 v1 = -cos(2 pi x2) / (2 pi).
        let g = grid();
        let v = VectorField::new(ScalarField::from_fn(&g, |_, y| (TAU * y).sin()), ScalarField::zeros(&g));
        let r = antidiv(&v);
        assert!(r.c[0].max_abs_coeff() < 1e-15);
        let expect = ScalarField::from_fn(&g, |_, y| -(TAU * y).cos() / TAU);
        assert!(r.c[1].max_coeff_diff(&expect) < 1e-15);
        assert!(r.div().max_coeff_diff(&v) < 1e-15);
    }

    #[test]
    fn laplace_identity_examples() {
        let g = grid();
        let s = ScalarField::from_fn(&g, |x, _| (TAU * x).sin());
        assert!(antidiv_laplace_identity(&VectorField::perp_gradient(&s)).unwrap() < 1e-10);
        let v = VectorField::new(ScalarField::from_fn(&g, |_, y| (TAU * y).sin()), ScalarField::zeros(&g));
        // (grad v + grad v^T)_12 = 2 pi cos(2 pi x2); R(Delta v)_12 = -4 pi^2 * (-cos/(2 pi))
        let lhs = antidiv(&v.laplacian());
        let expect = ScalarField::from_fn(&g, |_, y| TAU * (TAU * y).cos());
        assert!(lhs.c[1].max_coeff_diff(&expect) < 1e-13);
        let bad = VectorField::new(s.clone(), ScalarField::zeros(&g));
        assert!(antidiv_laplace_identity(&bad).is_err());
    }

    #[test]
    fn scaling_halves_for_single_mode() {
        let g = Grid::new(64).unwrap();
        let v = VectorField::new(
            ScalarField::real_mode(&g, 1, 2, Complex64::new(0.3, 0.1)).unwrap(),
            ScalarField::real_mode(&g, 2, -1, Complex64::new(0.2, 0.0)).unwrap(),
        );
        let r = antidiv_scaling_check(&v, &[1, 2, 4, 8], 2.0).unwrap();
        assert!((r.ratios[1] / r.ratios[0] - 0.5).abs() < 1e-12);
        assert!((r.slope + 1.0).abs() < 1e-10);
        assert!(antidiv_scaling_check(&v, &[32], 2.0).is_err());
    }

    #[test]
    fn bilinear_with_constant_and_zero_weight() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_tensor(&g, 5, 1.0, &mut rng).remove_mean();
        let zero = bilinear_antidiv(&VectorField::zeros(&g), &a).unwrap();
        assert!(zero.c.iter().all(|c| c.max_abs_coeff() < 1e-15));
        let c = VectorField::new(ScalarField::constant(&g, 1.5), ScalarField::constant(&g, -0.5));
        let b = bilinear_antidiv(&c, &a).unwrap();
        let expect = antidiv(&a.row(0)).scaled(1.5).plus(&antidiv(&a.row(1)).scaled(-0.5));
        assert!(b.max_coeff_diff(&expect) < 1e-14);
        let nonzero_mean = SymTensorField::constant(&g, [[1.0, 0.0], [0.0, 0.0]]);
        assert!(bilinear_antidiv(&c, &nonzero_mean).is_err());
    }

    #[test]
    fn bilinear_single_mode_pair() {
        let g = grid();
        let v = VectorField::new(
            ScalarField::real_mode(&g, 1, 0, Complex64::new(0.5, 0.0)).unwrap(),
            ScalarField::real_mode(&g, 0, 2, Complex64::new(0.0, 0.5)).unwrap(),
        );
        let a = SymTensorField::new(
            ScalarField::real_mode(&g, 2, 1, Complex64::new(0.5, 0.0)).unwrap(),
            ScalarField::real_mode(&g, 1, 1, Complex64::new(0.25, 0.25)).unwrap(),
            ScalarField::real_mode(&g, 0, 3, Complex64::new(0.5, 0.0)).unwrap(),
        );
        let b = bilinear_antidiv(&v, &a).unwrap();
        let target = row_contract(&v, &a).remove_mean();
        assert!(b.div().max_coeff_diff(&target) < 1e-12);
        assert!(bilinear_constant(&v, &a, 2.0).unwrap() > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn antidiv_invariants(seed in any::<u64>()) {
            let g = grid();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = random_vector(&g, 7, 0.5, &mut rng);
            let r = antidiv(&v);
            prop_assert!(r.max_trace() < 1e-12);
            prop_assert!(r.div().max_coeff_diff(&v.remove_mean()) < 1e-10);
            let t = random_tensor(&g, 7, 0.5, &mut rng);
            let dt = t.div();
            prop_assert!(antidiv(&dt).div().max_coeff_diff(&dt.remove_mean()) < 1e-10);
            let p = v.helmholtz_project().remove_mean();
            prop_assert!(antidiv_laplace_identity(&p).unwrap() < 1e-10);
        }

        #[test]
        fn bilinear_identity(seed in any::<u64>()) {
            let g = grid();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = random_vector(&g, 7, 1.0, &mut rng);
            let a = random_tensor(&g, 7, 1.0, &mut rng).remove_mean();
            let b = bilinear_antidiv(&v, &a).unwrap();
            prop_assert!(b.max_trace() < 1e-12);
            let target = row_contract(&v, &a).remove_mean();
            prop_assert!(b.div().max_coeff_diff(&target) < 1e-9);
            let s = random_scalar(&g, 7, 1.0, &mut rng);
            let f = random_vector(&g, 7, 1.0, &mut rng).remove_mean();
            let bs = bilinear_scalar(&s, &f);
            prop_assert!(bs.div().max_coeff_diff(&VectorField::scalar_mul(&s, &f).remove_mean()) < 1e-9);
        }
    }
}
