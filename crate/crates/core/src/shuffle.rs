//! Count-only regenerative run and the binary-matrix / permutation view of it.
//!
//! Stripped of weights, the regenerative update keeps a binary matrix `Π`
//! of open cycles: arriving at `j` adds column `j` of `Π` to `Γ`, clears
//! column `j`, and (on the next step) sets row `j` to ones. The combined
//! clear-then-fill is the operator `T_j`. After every state has been visited
//! once, `Π` is determined by the recency order of the states, and `T_j`
//! acts on that order by moving `j` to the front.

use thiserror::Error;

use crate::engine::{ChainRng, ChainState, EngineError};
use crate::regen::RegenConfig;
use crate::report::{CountMatrix, RunStatus};
use crate::transition::TransitionKernel;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ShuffleError {
    #[error("{0:?} is not a permutation of 0..{1}")]
    NotAPermutation(Vec<usize>, usize),
}

/// `d x d` matrix over `{0, 1}`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct BinaryMatrix {
    dim: usize,
    bits: Vec<bool>,
}

impl BinaryMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            bits: vec![false; dim * dim],
        }
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        Self {
            dim,
            bits: (0..dim * dim).map(|p| f(p / dim, p % dim)).collect(),
        }
    }

    /// Lower-triangular ones, `Π_ij = 1` iff `i >= j`.
    pub fn lower_triangular(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| i >= j)
    }

    /// Reads a `dim^2`-bit pattern, row-major, least significant bit first.
    pub fn from_bits(dim: usize, pattern: u64) -> Self {
        Self::from_fn(dim, |i, j| pattern >> (i * dim + j) & 1 == 1)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.bits[i * self.dim + j] = v;
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        self.bits.chunks(self.dim).map(|r| r.iter().map(|&b| b as u8).collect()).collect()
    }

    /// In-place `T_j`: clear column `j` off the diagonal, then fill row `j`.
    pub fn apply_t_mut(&mut self, j: usize) {
        for u in 0..self.dim {
            if u != j {
                self.set(u, j, false);
            }
        }
        for v in 0..self.dim {
            self.set(j, v, true);
        }
    }

    pub fn apply_t(&self, j: usize) -> Self {
        let mut out = self.clone();
        out.apply_t_mut(j);
        out
    }

    /// Applies `T_{js[0]}` first, then `T_{js[1]}`, and so on.
    pub fn apply_sequence(&self, js: &[usize]) -> Self {
        let mut out = self.clone();
        for &j in js {
            out.apply_t_mut(j);
        }
        out
    }

    /// `Π_ii = 1` and `Π_ij + Π_ji = 1` for `i != j`.
    pub fn is_tournament(&self) -> bool {
        (0..self.dim).all(|i| {
            self.get(i, i) && (0..i).all(|j| self.get(i, j) != self.get(j, i))
        })
    }
}

/// Recency order of the states, most recently visited first.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Permutation {
    order: Vec<usize>,
}

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self, ShuffleError> {
        let d = order.len();
        let mut seen = vec![false; d];
        for &s in &order {
            if s >= d || std::mem::replace(&mut seen[s], true) {
                return Err(ShuffleError::NotAPermutation(order, d));
            }
        }
        Ok(Self { order })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            order: (0..dim).collect(),
        }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn dim(&self) -> usize {
        self.order.len()
    }

    /// All `d!` permutations in lexicographic order.
    pub fn all(dim: usize) -> Vec<Permutation> {
        let mut out = Vec::new();
        let mut current = Vec::with_capacity(dim);
        let mut used = vec![false; dim];
        fn rec(dim: usize, current: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Permutation>) {
            if current.len() == dim {
                out.push(Permutation { order: current.clone() });
                return;
            }
            for s in 0..dim {
                if !used[s] {
                    used[s] = true;
                    current.push(s);
                    rec(dim, current, used, out);
                    current.pop();
                    used[s] = false;
                }
            }
        }
        rec(dim, &mut current, &mut used, &mut out);
        out
    }

    /// Sequence of `T` applications that produces this recency order
    /// (least recent first).
    pub fn application_order(&self) -> Vec<usize> {
        self.order.iter().rev().copied().collect()
    }

    /// Move-to-front of state `j`.
    pub fn step(&self, j: usize) -> Permutation {
        let mut order = Vec::with_capacity(self.order.len());
        order.push(j);
        order.extend(self.order.iter().copied().filter(|&s| s != j));
        Permutation { order }
    }
}

/// `Π_uv = 1` iff `u == v` or `u` was visited more recently than `v`.
pub fn pi_from_permutation(sigma: &Permutation) -> BinaryMatrix {
    let d = sigma.dim();
    let mut position = vec![0; d];
    for (p, &s) in sigma.order().iter().enumerate() {
        position[s] = p;
    }
    BinaryMatrix::from_fn(d, |u, v| position[u] <= position[v])
}

pub fn permutation_step(sigma: &Permutation, j: usize) -> Permutation {
    sigma.step(j)
}

/// True once every state `0..visited.len()` has been visited.
pub fn warmup_complete(visited: &[bool]) -> bool {
    visited.iter().all(|&v| v)
}

#[derive(Debug, Clone)]
pub struct GammaRun {
    pub gamma: CountMatrix,
    pub steps: u64,
    pub status: RunStatus,
}

/// Count-only run: `Π_i. = 1`; sample `j`; `Γ_.j += Π_.j`; `Π_.j = 0`.
///
/// Uses the same stream layout as [`crate::regen::run`], so with identical
/// configuration both consume identical draws.
pub fn run_gamma(kernel: &TransitionKernel, cfg: &RegenConfig) -> Result<GammaRun, EngineError> {
    let mut tracker = GammaTracker::start(kernel.dim(), cfg);
    while !tracker.is_complete() {
        if tracker.steps() >= cfg.cap {
            return Ok(tracker.finish(RunStatus::CapReached));
        }
        tracker.step(kernel);
    }
    Ok(tracker.finish(RunStatus::Completed))
}

/// Step-by-step count-only chain, exposing `Π` for inspection.
#[derive(Debug, Clone)]
pub struct GammaTracker {
    pi: BinaryMatrix,
    gamma: CountMatrix,
    chain: ChainState,
    target: u64,
    below_target: usize,
}

impl GammaTracker {
    pub fn start(dim: usize, cfg: &RegenConfig) -> Self {
        Self {
            pi: BinaryMatrix::zeros(dim),
            gamma: CountMatrix::zeros(dim),
            chain: ChainState::uniform_start(dim, cfg.rng()),
            target: cfg.target,
            below_target: if cfg.target == 0 { 0 } else { dim * dim },
        }
    }

    pub fn pi(&self) -> &BinaryMatrix {
        &self.pi
    }

    pub fn gamma(&self) -> &CountMatrix {
        &self.gamma
    }

    pub fn current(&self) -> usize {
        self.chain.current()
    }

    pub fn steps(&self) -> u64 {
        self.chain.steps()
    }

    pub fn is_complete(&self) -> bool {
        self.below_target == 0
    }

    pub fn step(&mut self, kernel: &TransitionKernel) -> usize {
        let d = self.pi.dim();
        let i = self.chain.current();
        for k in 0..d {
            self.pi.set(i, k, true);
        }
        let j = self.chain.step(kernel);
        for k in 0..d {
            if self.pi.get(k, j) {
                let g = &mut self.gamma[(k, j)];
                *g += 1;
                if *g == self.target {
                    self.below_target -= 1;
                }
                self.pi.set(k, j, false);
            }
        }
        j
    }

    /// `Π` as seen at the top of the next step (row of the current state filled).
    pub fn pi_before_sampling(&self) -> BinaryMatrix {
        let mut pi = self.pi.clone();
        let i = self.chain.current();
        for k in 0..pi.dim() {
            pi.set(i, k, true);
        }
        pi
    }

    fn finish(self, status: RunStatus) -> GammaRun {
        GammaRun {
            steps: self.chain.steps(),
            gamma: self.gamma,
            status,
        }
    }
}

/// Outcome of one family of checks in [`invariant_suite`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub cases: usize,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantReport {
    pub dim: usize,
    pub checks: Vec<InvariantCheck>,
}

impl InvariantReport {
    pub fn violations(&self) -> usize {
        self.checks.iter().map(|c| c.violations).sum()
    }
}

/// Random starting matrices per sequence in [`invariant_suite`].
pub const STARTING_MATRICES: usize = 100;

fn random_binary(dim: usize, rng: &mut ChainRng) -> BinaryMatrix {
    let bits: Vec<bool> = (0..dim * dim).map(|_| rng.uniform() < 0.5).collect();
    BinaryMatrix::from_fn(dim, |i, j| bits[i * dim + j])
}

fn random_permutation(dim: usize, rng: &mut ChainRng) -> Permutation {
    let mut order: Vec<usize> = (0..dim).collect();
    for k in (1..dim).rev() {
        order.swap(k, rng.index(k + 1));
    }
    Permutation { order }
}

/// Operator-level checks of the `Π` machinery on dimension `dim`:
///
/// * a traced count-only run of `steps` steps on the uniform kernel keeps
///   `Π` a tournament after warm-up and equal to the matrix of the tracked
///   recency order;
/// * `T_i T_J T_i Π = T_i T_J Π` for random sequences `J` of length at most
///   12, each from [`STARTING_MATRICES`] random matrices `Π`;
/// * every full application sequence (all `dim!` of them for `dim <= 5`)
///   yields the recency matrix from each random starting matrix;
/// * `T_j` on matrices commutes with move-to-front on permutations;
/// * for `dim <= 5`, the `dim!` recency orders give `dim!` distinct matrices.
pub fn invariant_suite(dim: usize, steps: u64, seed: u64) -> InvariantReport {
    let mut rng = ChainRng::new(seed, u64::MAX);
    let mut checks = Vec::new();

    let uniform = TransitionKernel::from_probs(
        crate::linalg::DenseMatrix::from_fn(dim, |_, _| 1.0 / dim as f64),
    )
    .expect("uniform rows are stochastic");
    let cfg = RegenConfig::new(u64::MAX, seed);
    let mut tracker = GammaTracker::start(dim, &cfg);
    let mut visited = vec![false; dim];
    let mut recency: Vec<usize> = Vec::new();
    let (mut cases, mut violations) = (0, 0);
    for _ in 0..steps {
        let i = tracker.current();
        visited[i] = true;
        recency.retain(|&s| s != i);
        recency.insert(0, i);
        if warmup_complete(&visited) {
            let pi = tracker.pi_before_sampling();
            let sigma = Permutation { order: recency.clone() };
            cases += 1;
            if !pi.is_tournament() || pi != pi_from_permutation(&sigma) {
                violations += 1;
            }
        }
        tracker.step(&uniform);
    }
    checks.push(InvariantCheck {
        name: "traced tournament",
        cases,
        violations,
    });

    let trials = 100;
    let starts: Vec<BinaryMatrix> = (0..STARTING_MATRICES).map(|_| random_binary(dim, &mut rng)).collect();
    let mut violations = 0;
    for _ in 0..trials {
        let len = rng.index(13);
        let i = rng.index(dim);
        let inner: Vec<usize> = (0..len).map(|_| rng.index(dim)).collect();
        let mut with_repeat = vec![i];
        with_repeat.extend(&inner);
        with_repeat.push(i);
        let mut without = inner.clone();
        without.push(i);
        violations += starts
            .iter()
            .filter(|pi| pi.apply_sequence(&with_repeat) != pi.apply_sequence(&without))
            .count();
    }
    checks.push(InvariantCheck {
        name: "repetition",
        cases: trials * starts.len(),
        violations,
    });

    let perms: Vec<Permutation> = if dim <= 5 {
        Permutation::all(dim)
    } else {
        (0..trials).map(|_| random_permutation(dim, &mut rng)).collect()
    };
    let mut violations = 0;
    for sigma in &perms {
        let seq = sigma.application_order();
        let expected = pi_from_permutation(sigma);
        violations += starts.iter().filter(|pi| pi.apply_sequence(&seq) != expected).count();
    }
    checks.push(InvariantCheck {
        name: "start independence",
        cases: perms.len() * starts.len(),
        violations,
    });

    let mut violations = 0;
    for _ in 0..trials {
        let sigma = random_permutation(dim, &mut rng);
        let j = rng.index(dim);
        if pi_from_permutation(&sigma).apply_t(j) != pi_from_permutation(&permutation_step(&sigma, j)) {
            violations += 1;
        }
    }
    checks.push(InvariantCheck {
        name: "commutation",
        cases: trials,
        violations,
    });

    if dim <= 5 {
        let image: std::collections::HashSet<BinaryMatrix> = perms.iter().map(pi_from_permutation).collect();
        checks.push(InvariantCheck {
            name: "image size",
            cases: perms.len(),
            violations: perms.len() - image.len(),
        });
    }

    InvariantReport { dim, checks }
}
