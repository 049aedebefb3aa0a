//! Transition kernels `P` built from `A`, and the second-moment convergence
//! check `rho(H) < 1` with `H_ij = A_ij^2 / P_ij`.

use thiserror::Error;

use crate::linalg::{spectral_radius, DenseMatrix, PowerEstimate};

/// Default mixing weight of the uniform kernel in [`SupportExtended`].
pub const DEFAULT_EPS: f64 = 0.01;

const ROW_SUM_TOLERANCE: f64 = 1e-12;
const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 200_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransitionError {
    #[error("row {0} of A is identically zero")]
    ZeroRow(usize),
    #[error("mixing weight eps must lie in (0, 1), got {0}")]
    InvalidEps(f64),
    #[error("row {row} of P is not a probability vector: {reason}")]
    NotStochastic { row: usize, reason: &'static str },
    #[error("P_{row}{col} = 0 but A_{row}{col} != 0")]
    SupportViolation { row: usize, col: usize },
    #[error("dimension mismatch: A is {a}x{a}, P is {p}x{p}")]
    DimensionMismatch { a: usize, p: usize },
    #[error("unknown transition kernel '{0}'")]
    UnknownKernel(String),
}

/// Row-stochastic matrix with per-row cumulative tables for inverse-CDF sampling.
#[derive(Clone, Debug)]
pub struct TransitionKernel {
    probs: DenseMatrix,
    cumsum: Vec<f64>,
}

impl TransitionKernel {
    pub fn from_probs(probs: DenseMatrix) -> Result<Self, TransitionError> {
        let d = probs.dim();
        let mut cumsum = Vec::with_capacity(d * d);
        for (i, row) in probs.rows().enumerate() {
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(TransitionError::NotStochastic {
                    row: i,
                    reason: "entry outside [0, 1]",
                });
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(TransitionError::NotStochastic {
                    row: i,
                    reason: "row does not sum to 1",
                });
            }
            let mut acc = 0.0;
            for &p in row {
                acc += p;
                cumsum.push(acc);
            }
            // last strictly positive entry closes the table exactly at 1
            let last = row.iter().rposition(|&p| p > 0.0).expect("row sums to 1");
            for c in &mut cumsum[i * d + last..(i + 1) * d] {
                *c = 1.0;
            }
        }
        Ok(Self { probs, cumsum })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.probs.dim()
    }

    #[inline]
    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.probs[(i, j)]
    }

    pub fn probs(&self) -> &DenseMatrix {
        &self.probs
    }

    /// Smallest `j` with `u < F_i(j)`; `u` must lie in `[0, 1)`.
    #[inline]
    pub fn sample(&self, i: usize, u: f64) -> usize {
        let d = self.dim();
        let row = &self.cumsum[i * d..(i + 1) * d];
        row.partition_point(|&c| c <= u).min(d - 1)
    }

    /// First `(i, j)` with `A_ij != 0` and `P_ij == 0`, if any.
    pub fn support_violation(&self, a: &DenseMatrix) -> Option<(usize, usize)> {
        let d = self.dim();
        (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .find(|&(i, j)| a[(i, j)] != 0.0 && self.prob(i, j) == 0.0)
    }
}

/// `P_ij = |A_ij| / sum_k |A_ik|`.
pub fn build_row_normalized(a: &DenseMatrix) -> Result<TransitionKernel, TransitionError> {
    let d = a.dim();
    let mut probs = DenseMatrix::zeros(d);
    for (i, row) in a.rows().enumerate() {
        let total: f64 = row.iter().map(|v| v.abs()).sum();
        if total == 0.0 {
            return Err(TransitionError::ZeroRow(i));
        }
        for (j, v) in row.iter().enumerate() {
            probs[(i, j)] = v.abs() / total;
        }
    }
    TransitionKernel::from_probs(probs)
}

/// `P = (1 - eps) Q + eps / d`, where `Q` is the row-normalized kernel with
/// zero rows replaced by uniform rows. Irreducible and aperiodic for any `A`.
pub fn build_support_extended(a: &DenseMatrix, eps: f64) -> Result<TransitionKernel, TransitionError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(TransitionError::InvalidEps(eps));
    }
    let d = a.dim();
    let uniform = 1.0 / d as f64;
    let mut probs = DenseMatrix::zeros(d);
    for (i, row) in a.rows().enumerate() {
        let total: f64 = row.iter().map(|v| v.abs()).sum();
        for (j, v) in row.iter().enumerate() {
            let q = if total == 0.0 { uniform } else { v.abs() / total };
            probs[(i, j)] = (1.0 - eps) * q + eps * uniform;
        }
    }
    TransitionKernel::from_probs(probs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Converges,
    Diverges,
    /// Power iteration did not settle; callers treat this as a failure.
    Indeterminate,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub rho_hat: f64,
    pub verdict: Verdict,
    pub power: PowerEstimate,
    pub hhat: DenseMatrix,
}

impl ConvergenceReport {
    pub fn converges(&self) -> bool {
        self.verdict == Verdict::Converges
    }
}

/// Entrywise second-moment matrix `H_ij = A_ij^2 / P_ij` (0 where `P_ij = 0`).
pub fn hhat(a: &DenseMatrix, p: &TransitionKernel) -> DenseMatrix {
    DenseMatrix::from_fn(a.dim(), |i, j| {
        let pij = p.prob(i, j);
        if pij == 0.0 {
            0.0
        } else {
            a[(i, j)] * a[(i, j)] / pij
        }
    })
}

pub fn check_convergence(a: &DenseMatrix, p: &TransitionKernel) -> Result<ConvergenceReport, TransitionError> {
    if a.dim() != p.dim() {
        return Err(TransitionError::DimensionMismatch { a: a.dim(), p: p.dim() });
    }
    if let Some((row, col)) = p.support_violation(a) {
        return Err(TransitionError::SupportViolation { row, col });
    }
    let hhat = hhat(a, p);
    let power = spectral_radius(&hhat, POWER_TOL, POWER_MAX_ITERS);
    let verdict = if !power.converged {
        Verdict::Indeterminate
    } else if power.value < 1.0 {
        Verdict::Converges
    } else {
        Verdict::Diverges
    };
    Ok(ConvergenceReport {
        rho_hat: power.value,
        verdict,
        power,
        hhat,
    })
}

/// A named way of deriving `P` from `A`.
pub trait KernelBuilder: Send + Sync {
    fn name(&self) -> &'static str;
    fn build(&self, a: &DenseMatrix) -> Result<TransitionKernel, TransitionError>;
}

pub struct RowNormalized;

impl KernelBuilder for RowNormalized {
    fn name(&self) -> &'static str {
        "rownorm"
    }

    fn build(&self, a: &DenseMatrix) -> Result<TransitionKernel, TransitionError> {
        build_row_normalized(a)
    }
}

pub struct SupportExtended {
    pub eps: f64,
}

impl KernelBuilder for SupportExtended {
    fn name(&self) -> &'static str {
        "blend"
    }

    fn build(&self, a: &DenseMatrix) -> Result<TransitionKernel, TransitionError> {
        build_support_extended(a, self.eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn row_normalization() {
        let a = m(&[
            &[0.4, -0.1, -0.1, 0.0],
            &[-0.1, 0.4, 0.0, -0.1],
            &[-0.1, 0.0, 0.4, -0.1],
            &[0.0, -0.1, -0.1, 0.4],
        ]);
        let p = build_row_normalized(&a).unwrap();
        let expected = [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 0.0];
        for (j, e) in expected.iter().enumerate() {
            assert_abs_diff_eq!(p.prob(0, j), e, epsilon = 1e-15);
        }
        assert_eq!(build_row_normalized(&m(&[&[0.5]])).unwrap().prob(0, 0), 1.0);
        let p = build_row_normalized(&m(&[&[0.4, 0.2], &[0.2, 0.4]])).unwrap();
        assert_abs_diff_eq!(p.prob(1, 0), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.prob(1, 1), 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_row_rejected() {
        let err = build_row_normalized(&m(&[&[0.5, 0.1], &[0.0, 0.0]])).unwrap_err();
        assert_eq!(err, TransitionError::ZeroRow(1));
    }

    #[test]
    fn support_extension() {
        let p = build_support_extended(&m(&[&[0.0, 1.0], &[1.0, 0.0]]), 0.1).unwrap();
        assert_abs_diff_eq!(p.prob(0, 0), 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(p.prob(0, 1), 0.95, epsilon = 1e-15);
        assert_abs_diff_eq!(p.prob(1, 0), 0.95, epsilon = 1e-15);

        let p = build_support_extended(&m(&[&[0.3, 0.1], &[0.0, 0.0]]), 0.2).unwrap();
        assert_abs_diff_eq!(p.prob(1, 0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.prob(1, 1), 0.5, epsilon = 1e-15);

        for eps in [0.0, 1.0, -0.5, f64::NAN] {
            assert!(matches!(
                build_support_extended(&m(&[&[0.5]]), eps),
                Err(TransitionError::InvalidEps(_))
            ));
        }
    }

    #[test]
    fn support_extension_tends_to_row_normalized() {
        let a = m(&[&[0.3, -0.2, 0.0], &[0.1, 0.1, 0.5], &[0.0, -0.4, 0.2]]);
        let q = build_row_normalized(&a).unwrap();
        let mut previous = f64::INFINITY;
        for eps in [1e-1, 1e-3, 1e-6, 1e-9] {
            let p = build_support_extended(&a, eps).unwrap();
            let gap = p.probs().max_abs_diff(q.probs());
            assert!(gap < previous && gap <= eps);
            previous = gap;
        }
    }

    #[test]
    fn cumulative_table_ends_at_one() {
        let p = TransitionKernel::from_probs(m(&[&[0.1, 0.2, 0.7, 0.0], &[0.25; 4], &[0.0, 0.0, 0.0, 1.0], &[1.0, 0.0, 0.0, 0.0]])).unwrap();
        assert_eq!(p.sample(0, 0.0), 0);
        assert_eq!(p.sample(0, 0.1), 1);
        assert_eq!(p.sample(0, 0.999_999_999_999), 2);
        assert_eq!(p.sample(2, 0.0), 3);
        assert_eq!(p.sample(3, 0.999_999_999_999), 0);
        assert_eq!(p.sample(1, 0.5), 2);
    }

    #[test]
    fn invalid_probabilities() {
        assert!(TransitionKernel::from_probs(m(&[&[0.5, 0.4], &[0.5, 0.5]])).is_err());
        assert!(TransitionKernel::from_probs(m(&[&[1.5, -0.5], &[0.5, 0.5]])).is_err());
    }

    #[test]
    fn convergence_examples() {
        let r = check_convergence(&m(&[&[0.5]]), &build_row_normalized(&m(&[&[0.5]])).unwrap()).unwrap();
        assert_abs_diff_eq!(r.hhat[(0, 0)], 0.25);
        assert_abs_diff_eq!(r.rho_hat, 0.25, epsilon = 1e-10);
        assert!(r.converges());

        let a = m(&[&[0.4, 0.2], &[0.2, 0.4]]);
        let r = check_convergence(&a, &build_row_normalized(&a).unwrap()).unwrap();
        assert!(r.hhat.max_abs_diff(&m(&[&[0.24, 0.12], &[0.12, 0.24]])) < 1e-15);
        assert_abs_diff_eq!(r.rho_hat, 0.36, epsilon = 1e-9);
        assert!(r.converges());

        let a = m(&[&[0.99, 0.99], &[0.99, 0.99]]);
        let r = check_convergence(&a, &build_row_normalized(&a).unwrap()).unwrap();
        assert_abs_diff_eq!(r.hhat[(0, 1)], 1.9602, epsilon = 1e-12);
        assert_abs_diff_eq!(r.rho_hat, 3.9204, epsilon = 1e-9);
        assert_eq!(r.verdict, Verdict::Diverges);
    }

    #[test]
    fn support_violation_detected() {
        let a = m(&[&[0.5, 0.1], &[0.1, 0.5]]);
        let p = TransitionKernel::from_probs(m(&[&[1.0, 0.0], &[0.5, 0.5]])).unwrap();
        assert_eq!(
            check_convergence(&a, &p).unwrap_err(),
            TransitionError::SupportViolation { row: 0, col: 1 }
        );
    }

    #[test]
    fn verdict_invariant_under_relabeling() {
        let a = m(&[&[0.3, -0.2, 0.1], &[0.1, 0.1, 0.5], &[0.05, -0.4, 0.2]]);
        let base = check_convergence(&a, &build_row_normalized(&a).unwrap()).unwrap();
        // simultaneous relabeling of states by the cycle 0 -> 1 -> 2 -> 0
        let perm = [1, 2, 0];
        let b = DenseMatrix::from_fn(3, |i, j| a[(perm[i], perm[j])]);
        let r = check_convergence(&b, &build_row_normalized(&b).unwrap()).unwrap();
        assert_eq!(base.verdict, r.verdict);
        assert_abs_diff_eq!(base.rho_hat, r.rho_hat, epsilon = 1e-9);
    }
}
