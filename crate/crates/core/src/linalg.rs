//! Dense square matrices and the exact reference routines used to validate
//! the stochastic estimators: direct inversion, Neumann partial sums, and
//! power-iteration estimates of the spectral radius and spectral norm.

use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

use crate::engine::ChainRng;

/// Pivots with magnitude below this value are treated as zero.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix dimension must be at least 1")]
    Empty,
    #[error("expected {expected} entries for a {dim}x{dim} matrix, got {got}")]
    BadShape { dim: usize, expected: usize, got: usize },
    #[error("entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("matrix is singular (pivot {pivot:e} in column {col})")]
    SingularMatrix { col: usize, pivot: f64 },
}

/// Row-major real `d x d` matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be at least 1");
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diagonal(values: &[f64]) -> Result<Self, LinalgError> {
        if values.is_empty() {
            return Err(LinalgError::Empty);
        }
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m.validate()?;
        Ok(m)
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.data[i * dim + j] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from row-major storage, validating shape and finiteness.
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if dim == 0 {
            return Err(LinalgError::Empty);
        }
        if data.len() != dim * dim {
            return Err(LinalgError::BadShape {
                dim,
                expected: dim * dim,
                got: data.len(),
            });
        }
        let m = Self { dim, data };
        m.validate()?;
        Ok(m)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, LinalgError> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(LinalgError::BadShape {
                    dim,
                    expected: dim * dim,
                    got: r.len() * dim,
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_row_major(dim, data)
    }

    fn validate(&self) -> Result<(), LinalgError> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(p) => Err(LinalgError::NonFinite {
                row: p / self.dim,
                col: p % self.dim,
            }),
            None => Ok(()),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&v| v >= 0.0)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    fn check_dims(&self, other: &Self) -> Result<(), LinalgError> {
        if self.dim != other.dim {
            return Err(LinalgError::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_dims(other)?;
        Ok(Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_dims(other)?;
        Ok(Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_dims(other)?;
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            let out_row = &mut out.data[i * d..(i + 1) * d];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "vector length must match dimension");
        self.rows()
            .map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `I - self`.
    pub fn identity_minus(&self) -> Self {
        let mut m = self.scale(-1.0);
        for i in 0..self.dim {
            m[(i, i)] += 1.0;
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows()).finish()
    }
}

/// Gauss-Jordan inversion with partial pivoting.
pub fn exact_inverse(m: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    let d = m.dim();
    let mut work = m.clone();
    let mut inv = DenseMatrix::identity(d);
    for col in 0..d {
        let (pivot_row, pivot) = (col..d)
            .map(|r| (r, work[(r, col)]))
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .expect("non-empty pivot range");
        if pivot.abs() < PIVOT_TOLERANCE {
            return Err(LinalgError::SingularMatrix { col, pivot });
        }
        if pivot_row != col {
            swap_rows(&mut work, pivot_row, col);
            swap_rows(&mut inv, pivot_row, col);
        }
        let scale = 1.0 / pivot;
        for j in 0..d {
            work[(col, j)] *= scale;
            inv[(col, j)] *= scale;
        }
        for r in 0..d {
            if r == col {
                continue;
            }
            let factor = work[(r, col)];
            if factor == 0.0 {
                continue;
            }
            for j in 0..d {
                work[(r, j)] -= factor * work[(col, j)];
                inv[(r, j)] -= factor * inv[(col, j)];
            }
        }
    }
    Ok(inv)
}

fn swap_rows(m: &mut DenseMatrix, a: usize, b: usize) {
    let d = m.dim();
    for j in 0..d {
        m.data.swap(a * d + j, b * d + j);
    }
}

/// `sum_{n=0..=k} a^n`, by repeated multiply-accumulate.
pub fn neumann_partial_sum(a: &DenseMatrix, k: usize) -> DenseMatrix {
    let mut power = DenseMatrix::identity(a.dim());
    let mut sum = power.clone();
    for _ in 0..k {
        power = power.matmul(a).expect("same dimension");
        sum = sum.add(&power).expect("same dimension");
    }
    sum
}

/// Outcome of a power-iteration estimate. `converged == false` means the
/// iteration budget ran out and `value` is the best estimate available.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerEstimate {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Spectral radius by power iteration.
///
/// Nonnegative matrices use the shifted iteration `x <- (M + I) x`, whose
/// Collatz-Wielandt bounds bracket `rho(M) + 1` from both sides; the iteration
/// stops once the bracket is narrower than `tol`. Nilpotent nonnegative
/// matrices are detected exactly (`M^d 1 = 0`). Signed matrices use the
/// geometric growth rate of `||M^k x||` with periodic restarts.
pub fn spectral_radius(m: &DenseMatrix, tol: f64, max_iters: usize) -> PowerEstimate {
    if m.is_nonnegative() {
        spectral_radius_nonnegative(m, tol, max_iters)
    } else {
        spectral_radius_signed(m, tol, max_iters)
    }
}

fn normalize(x: &mut [f64]) -> f64 {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
    norm
}

const NEGLIGIBLE_COMPONENT: f64 = 1e-12;

fn spectral_radius_nonnegative(m: &DenseMatrix, tol: f64, max_iters: usize) -> PowerEstimate {
    let d = m.dim();
    // nilpotent check: M^d 1 == 0 iff M^d == 0 for nonnegative M
    let mut y = vec![1.0; d];
    for _ in 0..d {
        y = m.mul_vec(&y);
        if y.iter().all(|&v| v == 0.0) {
            return PowerEstimate {
                value: 0.0,
                converged: true,
                iterations: 0,
            };
        }
        normalize(&mut y);
    }

    let mut x = vec![1.0 / (d as f64).sqrt(); d];
    let mut lower = 0.0;
    let mut upper = f64::INFINITY;
    for it in 1..=max_iters {
        let mx = m.mul_vec(&x);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        let mut next: Vec<f64> = Vec::with_capacity(d);
        // Components that decayed below the cutoff belong to blocks of a
        // reducible matrix with a smaller radius; their ratios never approach
        // the dominant one, so they are left out of the bounds.
        let cutoff = x.iter().cloned().fold(0.0, f64::max) * NEGLIGIBLE_COMPONENT;
        for (xi, mxi) in x.iter().zip(&mx) {
            let s = mxi + xi;
            if *xi > cutoff {
                let ratio = s / xi;
                lo = lo.min(ratio);
                hi = hi.max(ratio);
            }
            next.push(s);
        }
        if it == 1 {
            lower = lo - 1.0;
            upper = hi - 1.0;
        } else {
            lower = f64::max(lower, lo - 1.0).min(hi - 1.0);
            upper = f64::min(upper, hi - 1.0).max(lo - 1.0);
        }
        if upper - lower <= tol {
            return PowerEstimate {
                value: (0.5 * (lower + upper)).max(0.0),
                converged: true,
                iterations: it,
            };
        }
        normalize(&mut next);
        x = next;
    }
    PowerEstimate {
        value: (0.5 * (lower + upper)).max(0.0),
        converged: false,
        iterations: max_iters,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Modulus of the dominant eigenvalue suggested by the Krylov triple
/// `x, Mx, M^2 x` (with `|x| = 1`). Once `Mx` is parallel to `x` within
/// `tol` the Rayleigh quotient is used; otherwise the largest Ritz value of
/// `M` projected onto the orthonormalized span of `x` and `Mx`, which also
/// resolves dominant conjugate pairs and dominant pairs `±λ`.
fn krylov_modulus(x: &[f64], y1: &[f64], y2: &[f64], tol: f64) -> f64 {
    let h11 = dot(x, y1);
    let r: Vec<f64> = y1.iter().zip(x).map(|(y, q)| y - h11 * q).collect();
    let h21 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if h21 <= tol * h11.abs().max(1.0) {
        return h11.abs();
    }
    let q2: Vec<f64> = r.iter().map(|v| v / h21).collect();
    // M q2 = (M^2 x - h11 M x) / h21
    let mq2: Vec<f64> = y2.iter().zip(y1).map(|(a, b)| (a - h11 * b) / h21).collect();
    let (h12, h22) = (dot(x, &mq2), dot(&q2, &mq2));
    let half_trace = 0.5 * (h11 + h22);
    let det = h11 * h22 - h12 * h21;
    let disc = half_trace * half_trace - det;
    if disc >= 0.0 {
        let root = disc.sqrt();
        f64::max((half_trace + root).abs(), (half_trace - root).abs())
    } else {
        // conjugate pair with |t|^2 = det
        det.sqrt()
    }
}

fn spectral_radius_signed(m: &DenseMatrix, tol: f64, max_iters: usize) -> PowerEstimate {
    const STABLE_ITERATIONS: usize = 3;
    let d = m.dim();
    let mut rng = ChainRng::new(0x005e_ed0f_5bec, 0);
    let mut x = vec![1.0 / (d as f64).sqrt(); d];
    let mut y1 = m.mul_vec(&x);
    let mut restarts = 0;
    let mut previous = f64::NAN;
    let mut stable = 0;
    for it in 1..=max_iters {
        let n1 = y1.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n1 == 0.0 {
            // the iterate fell into the null space; a random direction that
            // also collapses repeatedly means every generic vector is annihilated
            if restarts == 2 {
                return PowerEstimate {
                    value: 0.0,
                    converged: true,
                    iterations: it,
                };
            }
            restarts += 1;
            x = (0..d).map(|_| rng.uniform() - 0.5).collect();
            normalize(&mut x);
            y1 = m.mul_vec(&x);
            continue;
        }
        let y2 = m.mul_vec(&y1);
        let estimate = krylov_modulus(&x, &y1, &y2, tol);
        if (estimate - previous).abs() <= tol * estimate.max(1.0) {
            stable += 1;
            if stable == STABLE_ITERATIONS {
                return PowerEstimate {
                    value: estimate,
                    converged: true,
                    iterations: it,
                };
            }
        } else {
            stable = 0;
        }
        previous = estimate;
        x = y1.iter().map(|v| v / n1).collect();
        y1 = y2.iter().map(|v| v / n1).collect();
    }
    PowerEstimate {
        value: if previous.is_nan() { 0.0 } else { previous },
        converged: false,
        iterations: max_iters,
    }
}

/// Largest singular value via power iteration on `M^T M`, relative accuracy `tol`.
pub fn spectral_norm(m: &DenseMatrix, tol: f64) -> PowerEstimate {
    const MAX_ITERS: usize = 100_000;
    let d = m.dim();
    let gram = m.transpose().matmul(m).expect("same dimension");
    let mut x = vec![1.0 / (d as f64).sqrt(); d];
    let mut rng = ChainRng::new(0x005e_ed0f_2a0b, 0);
    let mut previous = f64::NAN;
    let mut restarted = false;
    for it in 1..=MAX_ITERS {
        let mut gx = gram.mul_vec(&x);
        let rayleigh: f64 = x.iter().zip(&gx).map(|(a, b)| a * b).sum();
        let n = normalize(&mut gx);
        if n == 0.0 {
            if restarted || gram.as_slice().iter().all(|&v| v == 0.0) {
                return PowerEstimate {
                    value: 0.0,
                    converged: true,
                    iterations: it,
                };
            }
            // start vector in the null space; fall back to a seeded random one
            x = (0..d).map(|_| rng.uniform() - 0.5).collect();
            normalize(&mut x);
            restarted = true;
            continue;
        }
        let sigma = rayleigh.max(0.0).sqrt();
        if (sigma - previous).abs() <= 0.5 * tol * sigma {
            return PowerEstimate {
                value: sigma,
                converged: true,
                iterations: it,
            };
        }
        previous = sigma;
        x = gx;
    }
    PowerEstimate {
        value: previous,
        converged: false,
        iterations: MAX_ITERS,
    }
}
