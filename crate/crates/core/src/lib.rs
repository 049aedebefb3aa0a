//! Monte Carlo estimation of matrix inverses `(I - A)^{-1}` from random walks.
//!
//! Two estimators are provided: the classic truncated-walk estimator and a
//! regenerative estimator that reads every transition's weight once and keeps
//! running cycle statistics for all entries at the same time.

pub mod classic;
pub mod engine;
pub mod linalg;
pub mod metrics;
pub mod regen;
pub mod registry;
pub mod report;
pub mod shuffle;
pub mod sweep;
pub mod testbeds;
pub mod transition;

pub use engine::{ChainRng, CountedOracle, EngineError, EntrySource};
pub use linalg::{DenseMatrix, LinalgError};
pub use registry::{EstimatorRegistry, InverseEstimator, KernelRegistry};
pub use report::{EstimateMatrix, EstimateReport, RunStatus};
pub use transition::{TransitionError, TransitionKernel};
