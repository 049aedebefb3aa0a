//! Classical truncated Ulam-von Neumann estimator: `R` weighted walks of
//! `r_k` transitions from each starting row.

use crate::engine::{ChainRng, ChainState, CountedOracle, EngineError};
use crate::linalg::DenseMatrix;
use crate::transition::TransitionKernel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassicConfig {
    pub replications: u64,
    pub truncation: u64,
    pub seed: u64,
    /// Replication stream; row `i` draws from stream `(stream << 32) | i`.
    pub stream: u64,
}

impl ClassicConfig {
    pub fn new(replications: u64, truncation: u64, seed: u64) -> Self {
        Self {
            replications: replications.max(1),
            truncation,
            seed,
            stream: 0,
        }
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    fn row_rng(&self, row: usize) -> ChainRng {
        ChainRng::new(self.seed, (self.stream << 32) | row as u64)
    }
}

/// Walk `X(0) = start, X(1), ...` with running weight `W_k`, `W_0 = 1`.
pub struct WeightedWalk<'k> {
    chain: ChainState,
    kernel: &'k TransitionKernel,
    weight: f64,
}

impl<'k> WeightedWalk<'k> {
    pub fn new(start: usize, kernel: &'k TransitionKernel, rng: ChainRng) -> Self {
        Self {
            chain: ChainState::new(start, rng),
            kernel,
            weight: 1.0,
        }
    }

    /// Restarts at `start` with `W_0 = 1`, keeping the random stream.
    pub fn restart(&mut self, start: usize) {
        self.chain.reset_to(start);
        self.weight = 1.0;
    }

    pub fn state(&self) -> usize {
        self.chain.current()
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Advances one transition, returning `(X(k), W_k)`.
    pub fn advance(&mut self, oracle: &mut CountedOracle<'_>) -> Result<(usize, f64), EngineError> {
        let from = self.chain.current();
        let to = self.chain.step(self.kernel);
        self.weight *= oracle.weight_ratio(self.kernel, from, to)?;
        Ok((to, self.weight))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowEstimate {
    pub values: Vec<f64>,
    /// Columns whose accumulated value overflowed to a non-finite number.
    pub flagged: Vec<usize>,
}

/// `C_ij ~ (1/R) sum_r sum_{k=0..r_k} W^r_k 1[X_r(k) = j]` for fixed `i`.
pub fn estimate_row(
    oracle: &mut CountedOracle<'_>,
    kernel: &TransitionKernel,
    row: usize,
    cfg: &ClassicConfig,
) -> Result<RowEstimate, EngineError> {
    let d = kernel.dim();
    let mut sums = vec![0.0; d];
    let mut walk = WeightedWalk::new(row, kernel, cfg.row_rng(row));
    for _ in 0..cfg.replications {
        walk.restart(row);
        sums[row] += 1.0;
        for _ in 0..cfg.truncation {
            let (state, weight) = walk.advance(oracle)?;
            sums[state] += weight;
        }
    }
    let r = cfg.replications as f64;
    let values: Vec<f64> = sums.into_iter().map(|s| s / r).collect();
    let flagged = values
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_finite())
        .map(|(j, _)| j)
        .collect();
    Ok(RowEstimate { values, flagged })
}

#[derive(Debug, Clone)]
pub struct ClassicEstimate {
    /// Non-finite entries are kept as-is and listed in `flagged`.
    pub c_hat: Vec<f64>,
    pub dim: usize,
    pub accesses: u64,
    pub transitions: u64,
    pub flagged: Vec<(usize, usize)>,
}

impl ClassicEstimate {
    /// The estimate as a matrix, with flagged entries replaced by NaN.
    pub fn matrix_with_sentinels(&self) -> Vec<f64> {
        self.c_hat
            .iter()
            .map(|&v| if v.is_finite() { v } else { f64::NAN })
            .collect()
    }

    pub fn to_dense(&self) -> Option<DenseMatrix> {
        DenseMatrix::from_row_major(self.dim, self.c_hat.clone()).ok()
    }
}

pub fn estimate_matrix(
    oracle: &mut CountedOracle<'_>,
    kernel: &TransitionKernel,
    cfg: &ClassicConfig,
) -> Result<ClassicEstimate, EngineError> {
    let d = kernel.dim();
    let before = oracle.accesses();
    let mut c_hat = Vec::with_capacity(d * d);
    let mut flagged = Vec::new();
    for i in 0..d {
        let row = estimate_row(oracle, kernel, i, cfg)?;
        flagged.extend(row.flagged.iter().map(|&j| (i, j)));
        c_hat.extend(row.values);
    }
    Ok(ClassicEstimate {
        c_hat,
        dim: d,
        accesses: oracle.accesses() - before,
        transitions: d as u64 * cfg.replications * cfg.truncation,
        flagged,
    })
}
