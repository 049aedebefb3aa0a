//! Result types shared by the estimators.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::linalg::DenseMatrix;

/// `d x d` matrix of nonnegative counts (the cycle-count matrix).
#[derive(Clone, PartialEq, Eq)]
pub struct CountMatrix {
    dim: usize,
    data: Vec<u64>,
}

impl CountMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.data
    }

    pub fn min(&self) -> u64 {
        self.data.iter().copied().min().unwrap_or(0)
    }

    pub fn max(&self) -> u64 {
        self.data.iter().copied().max().unwrap_or(0)
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = u64> + '_ {
        (0..self.dim).map(move |k| self.data[k * self.dim + j])
    }
}

impl Index<(usize, usize)> for CountMatrix {
    type Output = u64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &u64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for CountMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut u64 {
        &mut self.data[i * self.dim + j]
    }
}

impl fmt::Debug for CountMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.data.chunks(self.dim.max(1))).finish()
    }
}

/// Estimated inverse; flagged entries hold `NaN`.
#[derive(Clone, PartialEq)]
pub struct EstimateMatrix {
    dim: usize,
    values: Vec<f64>,
}

impl EstimateMatrix {
    pub fn new(dim: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), dim * dim, "estimate must be d x d");
        Self { dim, values }
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        Self::new(m.dim(), m.as_slice().to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `None` for flagged entries.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let v = self.values[i * self.dim + j];
        v.is_finite().then_some(v)
    }

    pub fn flagged_count(&self) -> usize {
        self.values.iter().filter(|v| !v.is_finite()).count()
    }

    /// The estimate as a dense matrix, if no entry is flagged.
    pub fn to_dense(&self) -> Option<DenseMatrix> {
        DenseMatrix::from_row_major(self.dim, self.values.clone()).ok()
    }

    /// Row sums `C 1`; a row containing a flagged entry sums to `NaN`.
    pub fn row_sums(&self) -> Vec<f64> {
        self.values.chunks(self.dim).map(|r| r.iter().sum()).collect()
    }
}

impl fmt::Debug for EstimateMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.values.chunks(self.dim)).finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    /// Stopped at the transition cap before every count reached its target.
    CapReached,
}

#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub method: &'static str,
    pub c_hat: EstimateMatrix,
    /// Cycle counts (regenerative estimators only).
    pub gamma: Option<CountMatrix>,
    /// Total Markov transitions sampled.
    pub steps: u64,
    pub accesses: u64,
    pub flagged: Vec<(usize, usize)>,
    pub seed: u64,
    pub stream: u64,
    /// Cycle-count target `N` (regenerative estimators only).
    pub target: Option<u64>,
    pub status: RunStatus,
}
