//! Regenerative Ulam-von Neumann estimator.
//!
//! A single chain is simulated while three `d x d` matrices track every
//! first-passage cycle `i -> j` at once:
//!
//! * `Λ` holds the running product of step weights of each open cycle,
//! * `Σ` accumulates the weights of closed cycles,
//! * `Γ` counts closed cycles.
//!
//! One transition `i -> j` re-opens row `i` of `Λ` (entries that are zero),
//! scales `Λ` by `A_ij / P_ij`, closes column `j` into `Σ` and `Γ`, and zeroes
//! column `j`. The run stops once every entry of `Γ` has reached `N`, and the
//! estimate is assembled from the cycle means `Σ_ij / Γ_ij`:
//!
//! ```text
//! C_jj = 1 / (1 - Σ_jj/Γ_jj)
//! C_ij = (Σ_ij/Γ_ij) · C_jj        (i != j)
//! ```
//!
//! The running-weight matrix sits behind [`RunningWeights`]: [`DenseWeights`]
//! multiplies every entry on every step, [`ScaledWeights`] keeps a lazy global
//! factor so a step costs `O(d)` instead of `O(d^2)`.

use thiserror::Error;

use crate::engine::{ChainRng, ChainState, CountedOracle, EngineError};
use crate::linalg::DenseMatrix;
use crate::report::{CountMatrix, EstimateMatrix, EstimateReport, RunStatus};
use crate::transition::TransitionKernel;

/// Default transition cap.
pub const DEFAULT_CAP: u64 = 1_000_000_000;

/// A column is flagged when its mean return-cycle weight reaches `1 - this`.
pub const DENOMINATOR_GUARD: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegenError {
    #[error("second moment undefined: mean cycle weight {mean_alpha} and mean squared weight {mean_alpha_sq} must both be < 1")]
    MomentDomain { mean_alpha: f64, mean_alpha_sq: f64 },
}

/// Storage for the running cycle weights `Λ`.
pub trait RunningWeights: Clone + Send {
    fn with_dim(dim: usize) -> Self;

    /// `Λ_ik += 1[Λ_ik = 0]` for every `k`.
    fn reopen_row(&mut self, i: usize);

    /// `Λ <- Λ · w`.
    fn scale(&mut self, w: f64);

    /// Passes `(k, Λ_kj)` to `visit` for every row `k`, then zeroes column `j`.
    fn close_column(&mut self, j: usize, visit: impl FnMut(usize, f64));

    fn get(&self, k: usize, j: usize) -> f64;
}

/// `Λ` stored explicitly and rescaled in full on every transition.
#[derive(Clone, Debug)]
pub struct DenseWeights {
    dim: usize,
    data: Vec<f64>,
}

impl RunningWeights for DenseWeights {
    fn with_dim(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    #[inline]
    fn reopen_row(&mut self, i: usize) {
        for v in &mut self.data[i * self.dim..(i + 1) * self.dim] {
            if *v == 0.0 {
                *v = 1.0;
            }
        }
    }

    #[inline]
    fn scale(&mut self, w: f64) {
        for v in &mut self.data {
            *v *= w;
        }
    }

    #[inline]
    fn close_column(&mut self, j: usize, mut visit: impl FnMut(usize, f64)) {
        for k in 0..self.dim {
            let v = &mut self.data[k * self.dim + j];
            visit(k, *v);
            *v = 0.0;
        }
    }

    fn get(&self, k: usize, j: usize) -> f64 {
        self.data[k * self.dim + j]
    }
}

/// `Λ = factor · stored`, so scaling touches one scalar.
#[derive(Clone, Debug)]
pub struct ScaledWeights {
    dim: usize,
    stored: Vec<f64>,
    factor: f64,
}

impl ScaledWeights {
    const RENORMALIZE_BELOW: f64 = 1e-100;
    const RENORMALIZE_ABOVE: f64 = 1e100;

    fn renormalize(&mut self) {
        let f = self.factor;
        for v in &mut self.stored {
            *v *= f;
        }
        self.factor = 1.0;
    }
}

impl RunningWeights for ScaledWeights {
    fn with_dim(dim: usize) -> Self {
        Self {
            dim,
            stored: vec![0.0; dim * dim],
            factor: 1.0,
        }
    }

    #[inline]
    fn reopen_row(&mut self, i: usize) {
        let unit = 1.0 / self.factor;
        for v in &mut self.stored[i * self.dim..(i + 1) * self.dim] {
            if *v == 0.0 {
                *v = unit;
            }
        }
    }

    #[inline]
    fn scale(&mut self, w: f64) {
        if w == 0.0 {
            self.stored.iter_mut().for_each(|v| *v = 0.0);
            self.factor = 1.0;
            return;
        }
        self.factor *= w;
        let magnitude = self.factor.abs();
        if !(Self::RENORMALIZE_BELOW..=Self::RENORMALIZE_ABOVE).contains(&magnitude) {
            self.renormalize();
        }
    }

    #[inline]
    fn close_column(&mut self, j: usize, mut visit: impl FnMut(usize, f64)) {
        for k in 0..self.dim {
            let v = &mut self.stored[k * self.dim + j];
            visit(k, *v * self.factor);
            *v = 0.0;
        }
    }

    fn get(&self, k: usize, j: usize) -> f64 {
        self.stored[k * self.dim + j] * self.factor
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegenConfig {
    /// Cycle-count target `N`: stop once `min Γ >= N`.
    pub target: u64,
    /// Maximum number of transitions.
    pub cap: u64,
    pub seed: u64,
    pub stream: u64,
}

impl RegenConfig {
    pub fn new(target: u64, seed: u64) -> Self {
        Self {
            target,
            cap: DEFAULT_CAP,
            seed,
            stream: 0,
        }
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    /// Stream shared by every chain simulated under this configuration.
    pub fn rng(&self) -> ChainRng {
        ChainRng::new(self.seed, self.stream << 32)
    }
}

/// One sampled transition and its weight `A_ij / P_ij`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct RegenState<W: RunningWeights = DenseWeights> {
    dim: usize,
    lambda: W,
    sigma: DenseMatrix,
    gamma: CountMatrix,
    chain: ChainState,
    accesses: u64,
    target: u64,
    below_target: usize,
}

impl<W: RunningWeights> RegenState<W> {
    /// Fresh state at a given starting state. `target` only drives
    /// [`is_complete`](Self::is_complete).
    pub fn new(dim: usize, start: usize, rng: ChainRng, target: u64) -> Self {
        Self {
            dim,
            lambda: W::with_dim(dim),
            sigma: DenseMatrix::zeros(dim),
            gamma: CountMatrix::zeros(dim),
            chain: ChainState::new(start, rng),
            accesses: 0,
            target,
            below_target: if target == 0 { 0 } else { dim * dim },
        }
    }

    /// Fresh state with the starting state drawn uniformly from the config's stream.
    pub fn start(dim: usize, cfg: &RegenConfig) -> Self {
        let chain = ChainState::uniform_start(dim, cfg.rng());
        let mut st = Self::new(dim, 0, cfg.rng(), cfg.target);
        st.chain = chain;
        st
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> &W {
        &self.lambda
    }

    pub fn sigma(&self) -> &DenseMatrix {
        &self.sigma
    }

    pub fn gamma(&self) -> &CountMatrix {
        &self.gamma
    }

    pub fn current(&self) -> usize {
        self.chain.current()
    }

    /// Transitions sampled so far (`K`).
    pub fn steps(&self) -> u64 {
        self.chain.steps()
    }

    pub fn accesses(&self) -> u64 {
        self.accesses
    }

    pub fn target(&self) -> u64 {
        self.target
    }

    /// `min Γ >= N`, tracked incrementally.
    pub fn is_complete(&self) -> bool {
        self.below_target == 0
    }

    /// One transition of the regenerative update.
    pub fn step(&mut self, oracle: &mut CountedOracle<'_>, kernel: &TransitionKernel) -> Result<Transition, EngineError> {
        let from = self.chain.current();
        self.lambda.reopen_row(from);
        let to = self.chain.step(kernel);
        let weight = oracle.weight_ratio(kernel, from, to)?;
        self.accesses += 1;
        self.lambda.scale(weight);

        let d = self.dim;
        let target = self.target;
        let gamma = &mut self.gamma;
        let sigma = self.sigma.as_mut_slice();
        let below = &mut self.below_target;
        self.lambda.close_column(to, |k, v| {
            if v != 0.0 {
                let g = &mut gamma[(k, to)];
                *g += 1;
                if *g == target {
                    *below -= 1;
                }
            }
            sigma[k * d + to] += v;
        });
        Ok(Transition { from, to, weight })
    }

    /// Mean cycle weight `Σ_ij / Γ_ij`, or `None` before the first closed cycle.
    pub fn cycle_mean(&self, i: usize, j: usize) -> Option<f64> {
        let g = self.gamma[(i, j)];
        (g > 0).then(|| self.sigma[(i, j)] / g as f64)
    }
}

/// Runs the regenerative chain until `min Γ >= N` or the cap is hit.
pub fn run<W: RunningWeights>(
    oracle: &mut CountedOracle<'_>,
    kernel: &TransitionKernel,
    cfg: &RegenConfig,
) -> Result<(RegenState<W>, RunStatus), EngineError> {
    let mut st = RegenState::<W>::start(kernel.dim(), cfg);
    while !st.is_complete() {
        if st.steps() >= cfg.cap {
            return Ok((st, RunStatus::CapReached));
        }
        st.step(oracle, kernel)?;
    }
    Ok((st, RunStatus::Completed))
}

/// Assembles `C` from the cycle means. Entries without a closed cycle, and
/// whole columns whose mean return weight is `>= 1 - 1e-9`, are flagged
/// and hold `NaN`.
pub fn assemble_estimate<W: RunningWeights>(st: &RegenState<W>, status: RunStatus, seed: u64, stream: u64) -> EstimateReport {
    let d = st.dim();
    let mut values = vec![f64::NAN; d * d];
    let mut flagged = Vec::new();
    for j in 0..d {
        let diag = st
            .cycle_mean(j, j)
            .filter(|&m| m < 1.0 - DENOMINATOR_GUARD)
            .map(|m| 1.0 / (1.0 - m));
        for i in 0..d {
            let value = match (diag, i == j) {
                (Some(c_jj), true) => Some(c_jj),
                (Some(c_jj), false) => st.cycle_mean(i, j).map(|m| m * c_jj),
                (None, _) => None,
            };
            match value {
                Some(v) if v.is_finite() => values[i * d + j] = v,
                _ => flagged.push((i, j)),
            }
        }
    }
    flagged.sort_unstable();
    EstimateReport {
        method: "regen",
        c_hat: EstimateMatrix::new(d, values),
        gamma: Some(st.gamma().clone()),
        steps: st.steps(),
        accesses: st.accesses(),
        flagged,
        seed,
        stream,
        target: Some(st.target()),
        status,
    }
}

/// `E[Z^2] = (1 + E[α]) / ((1 - E[α]) (1 - E[α^2]))` for the return-cycle
/// sum `Z = 1 + α Z`.
pub fn second_moment_diag(mean_alpha: f64, mean_alpha_sq: f64) -> Result<f64, RegenError> {
    if !(mean_alpha < 1.0 && mean_alpha_sq < 1.0) {
        return Err(RegenError::MomentDomain {
            mean_alpha,
            mean_alpha_sq,
        });
    }
    Ok((1.0 + mean_alpha) / ((1.0 - mean_alpha) * (1.0 - mean_alpha_sq)))
}
