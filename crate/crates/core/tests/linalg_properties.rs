use nalgebra::DMatrix;
use proptest::prelude::*;
use regen_uvn::linalg::{exact_inverse, neumann_partial_sum, spectral_norm, spectral_radius, DenseMatrix};

fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.dim(), m.dim(), m.as_slice())
}

fn na_radius(m: &DenseMatrix) -> f64 {
    to_na(m)
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

fn matrix(max_dim: usize, lo: f64, hi: f64) -> impl Strategy<Value = DenseMatrix> {
    (1..=max_dim).prop_flat_map(move |d| {
        proptest::collection::vec(lo..hi, d * d).prop_map(move |v| DenseMatrix::from_row_major(d, v).unwrap())
    })
}

/// Diagonally dominant, hence comfortably nonsingular.
fn well_conditioned(max_dim: usize) -> impl Strategy<Value = DenseMatrix> {
    matrix(max_dim, -1.0, 1.0).prop_map(|m| {
        let d = m.dim();
        DenseMatrix::from_fn(d, |i, j| if i == j { m[(i, j)] + d as f64 + 1.0 } else { m[(i, j)] })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inverse_residual(m in well_conditioned(12)) {
        let inv = exact_inverse(&m).unwrap();
        let residual = m.matmul(&inv).unwrap().sub(&DenseMatrix::identity(m.dim())).unwrap().frobenius_norm();
        prop_assert!(residual <= 1e-8 * m.dim() as f64, "residual {residual}");
        let oracle = to_na(&m).try_inverse().unwrap();
        for i in 0..m.dim() {
            for j in 0..m.dim() {
                prop_assert!((inv[(i, j)] - oracle[(i, j)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn neumann_series_converges(m in matrix(6, -1.0, 1.0)) {
        // rescale to rho = 0.5, then rho^(k+1) < 1e-8 for k = 27
        let rho = na_radius(&m);
        prop_assume!(rho > 1e-3);
        let a = m.scale(0.5 / rho);
        let inv = exact_inverse(&a.identity_minus()).unwrap();
        // non-normal matrices can have transient growth far beyond rho^k
        let k = 27 + 20 * a.dim();
        let sum = neumann_partial_sum(&a, k);
        let dist = sum.sub(&inv).unwrap().frobenius_norm();
        prop_assert!(dist < 1e-6 * inv.frobenius_norm(), "{dist}");
    }

    #[test]
    fn nonnegative_radius_matches_eigenvalues(m in matrix(8, 0.0, 1.0)) {
        let r = spectral_radius(&m, 1e-10, 200_000);
        prop_assert!(r.converged);
        prop_assert!((r.value - na_radius(&m)).abs() < 1e-7 * (1.0 + r.value));
    }

    #[test]
    fn radius_is_homogeneous(m in matrix(6, 0.0, 1.0), c in -3.0f64..3.0) {
        let base = spectral_radius(&m, 1e-11, 200_000).value;
        let scaled = spectral_radius(&m.scale(c), 1e-11, 200_000).value;
        prop_assert!((scaled - c.abs() * base).abs() < 1e-6 * (1.0 + base));
    }

    #[test]
    fn norm_matches_singular_values(m in matrix(8, -1.0, 1.0)) {
        let n = spectral_norm(&m, 1e-12);
        prop_assert!(n.converged);
        let oracle = to_na(&m).singular_values().max();
        prop_assert!((n.value - oracle).abs() <= 1e-6 * oracle.max(1e-12), "{} vs {}", n.value, oracle);
    }
}

#[test]
fn signed_radius_against_eigenvalues() {
    let cases = [
        vec![vec![0.2, -0.5], vec![0.3, 0.1]],
        vec![vec![-0.9, 0.0, 0.1], vec![0.0, 0.4, 0.0], vec![0.2, 0.0, -0.3]],
        vec![vec![0.0, -1.0], vec![1.0, 0.0]],
    ];
    for rows in cases {
        let m = DenseMatrix::from_rows(&rows).unwrap();
        let r = spectral_radius(&m, 1e-8, 200_000);
        assert!((r.value - na_radius(&m)).abs() < 1e-4, "{rows:?}: {} vs {}", r.value, na_radius(&m));
    }
}
