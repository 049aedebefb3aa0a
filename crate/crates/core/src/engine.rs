//! Seeded Markov-chain stepping and the access-counted view of `A`.
//!
//! All randomness comes from [`ChainRng`], a ChaCha8 stream cipher keyed by a
//! 64-bit seed with a separate 64-bit stream id. Two generators with the same
//! `(seed, stream)` produce identical sequences on every platform, and distinct
//! stream ids give independent sequences, so replications can run in parallel
//! without sharing state.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::DenseMatrix;
use crate::transition::TransitionKernel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("transition {from} -> {to} has zero probability")]
    ZeroProbabilityTransition { from: usize, to: usize },
}

/// Deterministic generator split by `(seed, stream)`.
#[derive(Clone, Debug)]
pub struct ChainRng {
    inner: ChaCha8Rng,
}

impl ChainRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    /// Uniform draw on `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        (self.inner.next_u64() >> 11) as f64 * SCALE
    }

    /// Uniform index in `0..n` from a single draw.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
}

/// Current position of a chain on `0..d` plus its transition counter.
#[derive(Clone, Debug)]
pub struct ChainState {
    current: usize,
    steps: u64,
    rng: ChainRng,
}

impl ChainState {
    pub fn new(start: usize, rng: ChainRng) -> Self {
        Self {
            current: start,
            steps: 0,
            rng,
        }
    }

    /// Starts at a state drawn uniformly from `0..dim`; consumes one draw.
    pub fn uniform_start(dim: usize, mut rng: ChainRng) -> Self {
        let start = rng.index(dim);
        Self::new(start, rng)
    }

    #[inline]
    pub fn current(&self) -> usize {
        self.current
    }

    #[inline]
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Moves without consuming a transition (used when restarting replications).
    pub fn reset_to(&mut self, state: usize) {
        self.current = state;
    }

    /// One transition by inverse CDF on a single uniform draw.
    #[inline]
    pub fn step(&mut self, kernel: &TransitionKernel) -> usize {
        let u = self.rng.uniform();
        let next = kernel.sample(self.current, u);
        self.current = next;
        self.steps += 1;
        next
    }
}

/// Read access to the entries of `A`, possibly computed on demand.
pub trait EntrySource: Sync {
    fn dim(&self) -> usize;
    fn entry(&self, i: usize, j: usize) -> f64;
}

impl EntrySource for DenseMatrix {
    fn dim(&self) -> usize {
        DenseMatrix::dim(self)
    }

    #[inline]
    fn entry(&self, i: usize, j: usize) -> f64 {
        self[(i, j)]
    }
}

/// Entries produced by a closure, for matrices that are only implicitly defined.
pub struct FnEntries<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(usize, usize) -> f64 + Sync> FnEntries<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(usize, usize) -> f64 + Sync> EntrySource for FnEntries<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        (self.f)(i, j)
    }
}

/// Counts every read of `A`. One oracle per worker; merge counts with `+`.
pub struct CountedOracle<'a> {
    source: &'a dyn EntrySource,
    accesses: u64,
}

impl<'a> CountedOracle<'a> {
    pub fn new(source: &'a dyn EntrySource) -> Self {
        Self {
            source,
            accesses: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.source.dim()
    }

    pub fn accesses(&self) -> u64 {
        self.accesses
    }

    pub fn reset(&mut self) {
        self.accesses = 0;
    }

    #[inline]
    pub fn entry(&mut self, i: usize, j: usize) -> f64 {
        self.accesses += 1;
        self.source.entry(i, j)
    }

    /// Single-step weight `A_ij / P_ij`.
    #[inline]
    pub fn weight_ratio(&mut self, kernel: &TransitionKernel, i: usize, j: usize) -> Result<f64, EngineError> {
        let p = kernel.prob(i, j);
        if p == 0.0 {
            return Err(EngineError::ZeroProbabilityTransition { from: i, to: j });
        }
        Ok(self.entry(i, j) / p)
    }
}
