//! Estimators and transition kernels behind common traits, looked up by name.
//!
//! ```
//! use regen_uvn::registry::{EstimatorParams, EstimatorRegistry};
//!
//! let registry = EstimatorRegistry::with_defaults();
//! let params = EstimatorParams { target: 10, ..EstimatorParams::default() };
//! let est = registry.create("regen", &params).unwrap();
//! assert_eq!(est.name(), "regen");
//! ```

use std::collections::BTreeMap;
use std::marker::PhantomData;

use thiserror::Error;

use crate::classic::{self, ClassicConfig};
use crate::engine::{CountedOracle, EngineError, EntrySource};
use crate::regen::{self, DenseWeights, RegenConfig, RunningWeights, ScaledWeights, DEFAULT_CAP};
use crate::report::{EstimateMatrix, EstimateReport, RunStatus};
use crate::transition::{KernelBuilder, RowNormalized, SupportExtended, DEFAULT_EPS};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegistryError {
    #[error("unknown {kind} '{name}' (available: {available})")]
    Unknown {
        kind: &'static str,
        name: String,
        available: String,
    },
}

/// An estimator of `(I - A)^{-1}` driven by a transition kernel.
pub trait InverseEstimator: Send + Sync {
    fn name(&self) -> &'static str;

    fn estimate(
        &self,
        source: &dyn EntrySource,
        kernel: &crate::transition::TransitionKernel,
        seed: u64,
        stream: u64,
    ) -> Result<EstimateReport, EngineError>;
}

/// Truncated walks: `replications` walks of `truncation` steps per row.
pub struct ClassicEstimator {
    pub replications: u64,
    pub truncation: u64,
}

impl InverseEstimator for ClassicEstimator {
    fn name(&self) -> &'static str {
        "classic"
    }

    fn estimate(
        &self,
        source: &dyn EntrySource,
        kernel: &crate::transition::TransitionKernel,
        seed: u64,
        stream: u64,
    ) -> Result<EstimateReport, EngineError> {
        let cfg = ClassicConfig::new(self.replications, self.truncation, seed).with_stream(stream);
        let mut oracle = CountedOracle::new(source);
        let est = classic::estimate_matrix(&mut oracle, kernel, &cfg)?;
        Ok(EstimateReport {
            method: self.name(),
            c_hat: EstimateMatrix::new(est.dim, est.matrix_with_sentinels()),
            gamma: None,
            steps: est.transitions,
            accesses: est.accesses,
            flagged: est.flagged,
            seed,
            stream,
            target: None,
            status: RunStatus::Completed,
        })
    }
}

/// Regenerative estimator with a choice of running-weight storage.
pub struct RegenEstimator<W> {
    pub target: u64,
    pub cap: u64,
    name: &'static str,
    _weights: PhantomData<fn() -> W>,
}

impl<W: RunningWeights> RegenEstimator<W> {
    fn named(name: &'static str, target: u64, cap: u64) -> Self {
        Self {
            target,
            cap,
            name,
            _weights: PhantomData,
        }
    }
}

impl RegenEstimator<DenseWeights> {
    pub fn dense(target: u64, cap: u64) -> Self {
        Self::named("regen", target, cap)
    }
}

impl RegenEstimator<ScaledWeights> {
    pub fn scaled(target: u64, cap: u64) -> Self {
        Self::named("regen-scaled", target, cap)
    }
}

impl<W: RunningWeights> InverseEstimator for RegenEstimator<W> {
    fn name(&self) -> &'static str {
        self.name
    }

    fn estimate(
        &self,
        source: &dyn EntrySource,
        kernel: &crate::transition::TransitionKernel,
        seed: u64,
        stream: u64,
    ) -> Result<EstimateReport, EngineError> {
        let cfg = RegenConfig::new(self.target, seed).with_cap(self.cap).with_stream(stream);
        let mut oracle = CountedOracle::new(source);
        let (state, status) = regen::run::<W>(&mut oracle, kernel, &cfg)?;
        let mut report = regen::assemble_estimate(&state, status, seed, stream);
        report.method = self.name;
        Ok(report)
    }
}

/// Parameters understood by the built-in estimator factories.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EstimatorParams {
    pub replications: u64,
    pub truncation: u64,
    pub target: u64,
    pub cap: u64,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        Self {
            replications: 1,
            truncation: 1,
            target: 1,
            cap: DEFAULT_CAP,
        }
    }
}

pub type EstimatorFactory = fn(&EstimatorParams) -> Box<dyn InverseEstimator>;

#[derive(Default)]
pub struct EstimatorRegistry {
    factories: BTreeMap<&'static str, EstimatorFactory>,
}

impl EstimatorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// `classic`, `regen` (dense running weights) and `regen-scaled`.
    pub fn with_defaults() -> Self {
        let mut r = Self::new();
        r.register("classic", |p| {
            Box::new(ClassicEstimator {
                replications: p.replications,
                truncation: p.truncation,
            })
        });
        r.register("regen", |p| Box::new(RegenEstimator::dense(p.target, p.cap)));
        r.register("regen-scaled", |p| Box::new(RegenEstimator::scaled(p.target, p.cap)));
        r
    }

    pub fn register(&mut self, name: &'static str, factory: EstimatorFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    pub fn create(&self, name: &str, params: &EstimatorParams) -> Result<Box<dyn InverseEstimator>, RegistryError> {
        self.factories
            .get(name)
            .map(|f| f(params))
            .ok_or_else(|| RegistryError::Unknown {
                kind: "estimator",
                name: name.to_string(),
                available: self.names().collect::<Vec<_>>().join(", "),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub eps: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self { eps: DEFAULT_EPS }
    }
}

pub type KernelFactory = fn(&KernelParams) -> Box<dyn KernelBuilder>;

#[derive(Default)]
pub struct KernelRegistry {
    factories: BTreeMap<&'static str, KernelFactory>,
}

impl KernelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// `rownorm` and `blend`.
    pub fn with_defaults() -> Self {
        let mut r = Self::new();
        r.register("rownorm", |_| Box::new(RowNormalized));
        r.register("blend", |p| Box::new(SupportExtended { eps: p.eps }));
        r
    }

    pub fn register(&mut self, name: &'static str, factory: KernelFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    pub fn create(&self, name: &str, params: &KernelParams) -> Result<Box<dyn KernelBuilder>, RegistryError> {
        self.factories
            .get(name)
            .map(|f| f(params))
            .ok_or_else(|| RegistryError::Unknown {
                kind: "transition kernel",
                name: name.to_string(),
                available: self.names().collect::<Vec<_>>().join(", "),
            })
    }
}
