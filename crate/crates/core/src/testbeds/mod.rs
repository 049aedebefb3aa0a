//! Test matrices: the scaled 5-point Laplacian, the model covariance, and
//! Katz systems built from Matrix Market graphs.
//!
//! Every generator returns a [`TestProblem`] holding the matrix `A` handed to
//! the estimators together with `B = I - A`, whose inverse is the target.

mod mtx;

pub use mtx::{parse_matrix_market, read_matrix_market, AdjacencyMatrix, MatrixMarketError};

use thiserror::Error;

use crate::linalg::{exact_inverse, spectral_norm, DenseMatrix, LinalgError};
use crate::transition::{build_row_normalized, check_convergence, ConvergenceReport, TransitionError};

/// Each nonzero of the Laplacian stencil is divided by this.
pub const LAPLACIAN_SCALE: f64 = 10.0;
/// Each nonzero of the model covariance is divided by this.
pub const COVARIANCE_SCALE: f64 = 3.0;
/// Katz damping is `KATZ_DAMPING / ||adj||_2`.
pub const KATZ_DAMPING: f64 = 0.85;

#[derive(Debug, Error)]
pub enum TestbedError {
    #[error("dimension must be at least 1")]
    EmptyDimension,
    #[error("graph has no edges; Katz damping is undefined")]
    EmptyGraph,
    #[error("spectral norm did not converge")]
    NormNoConvergence,
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone)]
pub struct TestProblem {
    pub family: String,
    /// Matrix fed to the estimators.
    pub a: DenseMatrix,
    /// `I - A`; the estimators target its inverse.
    pub b: DenseMatrix,
}

impl TestProblem {
    pub fn new(family: impl Into<String>, a: DenseMatrix) -> Self {
        let b = a.identity_minus();
        Self {
            family: family.into(),
            a,
            b,
        }
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn reference_inverse(&self) -> Result<DenseMatrix, LinalgError> {
        exact_inverse(&self.b)
    }

    /// Second-moment check under the row-normalized kernel.
    pub fn convergence(&self) -> Result<ConvergenceReport, TransitionError> {
        check_convergence(&self.a, &build_row_normalized(&self.a)?)
    }
}

/// Grid side lengths `(nx, ny)` with `nx * ny = d` and `nx <= ny` as close as possible.
pub fn grid_shape(d: usize) -> (usize, usize) {
    let mut nx = (d as f64).sqrt() as usize;
    while nx > 1 && !d.is_multiple_of(nx) {
        nx -= 1;
    }
    (nx.max(1), d / nx.max(1))
}

/// Scaled 5-point Dirichlet Laplacian on an `nx x ny` grid (row-major
/// numbering), before the `I - ·` rewrite.
pub fn laplacian_stencil(nx: usize, ny: usize) -> DenseMatrix {
    let d = nx * ny;
    let mut s = DenseMatrix::zeros(d);
    for x in 0..nx {
        for y in 0..ny {
            let k = x * ny + y;
            s[(k, k)] = 4.0 / LAPLACIAN_SCALE;
            let mut link = |xx: usize, yy: usize| s[(k, xx * ny + yy)] = -1.0 / LAPLACIAN_SCALE;
            if x > 0 {
                link(x - 1, y);
            }
            if x + 1 < nx {
                link(x + 1, y);
            }
            if y > 0 {
                link(x, y - 1);
            }
            if y + 1 < ny {
                link(x, y + 1);
            }
        }
    }
    s
}

/// Laplacian problem on an `n x n` grid (`d = n^2`).
pub fn laplacian_5pt(n: usize) -> Result<TestProblem, TestbedError> {
    laplacian_grid(n, n)
}

pub fn laplacian_grid(nx: usize, ny: usize) -> Result<TestProblem, TestbedError> {
    if nx == 0 || ny == 0 {
        return Err(TestbedError::EmptyDimension);
    }
    Ok(TestProblem::new("laplacian", laplacian_stencil(nx, ny).identity_minus()))
}

/// Laplacian problem of dimension `d` on the most nearly square grid.
pub fn laplacian_for_dim(d: usize) -> Result<TestProblem, TestbedError> {
    if d == 0 {
        return Err(TestbedError::EmptyDimension);
    }
    let (nx, ny) = grid_shape(d);
    laplacian_grid(nx, ny)
}

/// Scaled model covariance `M/3`, `M_ii = 1 + sqrt(i)`, `M_ij = 1/|i-j|^2`
/// with one-based `i`, before the `I - ·` rewrite.
pub fn covariance_matrix(d: usize) -> DenseMatrix {
    DenseMatrix::from_fn(d, |i, j| {
        let m = if i == j {
            1.0 + ((i + 1) as f64).sqrt()
        } else {
            let gap = i.abs_diff(j) as f64;
            1.0 / (gap * gap)
        };
        m / COVARIANCE_SCALE
    })
}

/// Model covariance problem with its convergence verdict. The verdict fails
/// for moderate `d` (the scaled diagonal exceeds 1 from `d = 5` on).
pub fn model_covariance(d: usize) -> Result<(TestProblem, ConvergenceReport), TestbedError> {
    if d == 0 {
        return Err(TestbedError::EmptyDimension);
    }
    let problem = TestProblem::new("covariance", covariance_matrix(d).identity_minus());
    let report = problem.convergence()?;
    Ok((problem, report))
}

#[derive(Debug, Clone)]
pub struct KatzProblem {
    pub problem: TestProblem,
    pub alpha: f64,
    pub adjacency_norm: f64,
}

impl KatzProblem {
    /// Exact centrality `(I - α adj)^{-1} 1`.
    pub fn reference_centrality(&self) -> Result<Vec<f64>, LinalgError> {
        let inv = self.problem.reference_inverse()?;
        Ok(inv.mul_vec(&vec![1.0; inv.dim()]))
    }
}

/// `A' = α · adj` with `α = 0.85 / ||adj||_2`.
pub fn katz_matrix(adj: &AdjacencyMatrix) -> Result<KatzProblem, TestbedError> {
    let m = adj.matrix();
    let norm = spectral_norm(m, 1e-12);
    if !norm.converged {
        return Err(TestbedError::NormNoConvergence);
    }
    if norm.value == 0.0 {
        return Err(TestbedError::EmptyGraph);
    }
    let alpha = KATZ_DAMPING / norm.value;
    Ok(KatzProblem {
        problem: TestProblem::new("katz", m.scale(alpha)),
        alpha,
        adjacency_norm: norm.value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn laplacian_single_cell() {
        let p = laplacian_5pt(1).unwrap();
        assert_abs_diff_eq!(p.a[(0, 0)], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(p.reference_inverse().unwrap()[(0, 0)], 2.5, epsilon = 1e-12);
    }

    #[test]
    fn laplacian_two_by_two_stencil() {
        let s = laplacian_stencil(2, 2);
        let expected = DenseMatrix::from_rows(&[
            [0.4, -0.1, -0.1, 0.0],
            [-0.1, 0.4, 0.0, -0.1],
            [-0.1, 0.0, 0.4, -0.1],
            [0.0, -0.1, -0.1, 0.4],
        ])
        .unwrap();
        assert!(s.max_abs_diff(&expected) < 1e-15);
        assert_eq!(laplacian_5pt(2).unwrap().b, s);
    }

    #[test]
    fn laplacian_row_sums_bounded() {
        for n in 1..=6 {
            let s = laplacian_stencil(n, n);
            for row in s.rows() {
                assert!(row.iter().map(|v| v.abs()).sum::<f64>() <= 0.8 + 1e-15);
            }
        }
    }

    #[test]
    fn grid_shapes() {
        assert_eq!(grid_shape(16), (4, 4));
        assert_eq!(grid_shape(6), (2, 3));
        assert_eq!(grid_shape(128), (8, 16));
        assert_eq!(grid_shape(7), (1, 7));
        assert_eq!(grid_shape(1), (1, 1));
    }

    #[test]
    fn covariance_small() {
        let (p, report) = model_covariance(1).unwrap();
        assert_abs_diff_eq!(p.b[(0, 0)], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.a[(0, 0)], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.reference_inverse().unwrap()[(0, 0)], 1.5, epsilon = 1e-12);
        assert!(report.converges());

        let (p, _) = model_covariance(2).unwrap();
        assert_abs_diff_eq!(p.b[(0, 0)], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.b[(0, 1)], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.b[(1, 1)], (1.0 + 2f64.sqrt()) / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.b[(1, 1)], 0.8047, epsilon = 1e-4);
    }

    #[test]
    fn covariance_symmetric_and_deterministic() {
        let m = covariance_matrix(9);
        assert_eq!(m, m.transpose());
        assert_eq!(m, covariance_matrix(9));
    }

    #[test]
    fn covariance_verdict_flips_with_dimension() {
        assert!(model_covariance(6).unwrap().1.converges());
        assert!(!model_covariance(64).unwrap().1.converges());
    }

    #[test]
    fn katz_two_cycle() {
        let adj = AdjacencyMatrix::new(DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap()).unwrap();
        let k = katz_matrix(&adj).unwrap();
        assert_abs_diff_eq!(k.alpha, 0.85, epsilon = 1e-12);
        for x in k.reference_centrality().unwrap() {
            assert_abs_diff_eq!(x, 1.0 / 0.15, epsilon = 1e-9);
        }
    }

    #[test]
    fn katz_empty_graph() {
        let adj = AdjacencyMatrix::new(DenseMatrix::zeros(3)).unwrap();
        assert!(matches!(katz_matrix(&adj), Err(TestbedError::EmptyGraph)));
    }
}
