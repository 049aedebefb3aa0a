//! Experiment sweeps over estimator configurations and replications, with a
//! flat CSV schema shared by every experiment.
//!
//! Every configuration is run once per replication `rep` with seed `seed` and
//! stream `rep`, so each row can be regenerated from `(experiment, seed, rep)`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::EngineError;
use crate::linalg::{DenseMatrix, LinalgError};
use crate::metrics::{self, mean_and_se};
use crate::registry::{ClassicEstimator, InverseEstimator, RegenEstimator};
use crate::regen::DEFAULT_CAP;
use crate::report::EstimateReport;
use crate::testbeds::{KatzProblem, TestProblem, TestbedError};
use crate::transition::{build_row_normalized, check_convergence, TransitionError, TransitionKernel};

/// Replications per configuration unless overridden.
pub const DEFAULT_REPLICATIONS: u64 = 10;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("{family}: convergence criterion fails (rho(H) = {rho:.6}, verdict {verdict})")]
    Convergence { family: String, rho: f64, verdict: String },
    #[error(transparent)]
    Testbed(#[from] TestbedError),
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One CSV row. Field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub experiment: String,
    pub family: String,
    pub d: usize,
    pub param: String,
    pub value: String,
    pub seed: u64,
    pub rep: u64,
    pub rel_frob: f64,
    /// Magnitude of the signed relative trace error.
    pub rel_trace: f64,
    pub accesses: u64,
    #[serde(rename = "K")]
    pub k: u64,
    pub flagged: usize,
    pub ms: f64,
}

/// Column order of the sweep CSV.
pub const CSV_HEADER: &str = "experiment,family,d,param,value,seed,rep,rel_frob,rel_trace,accesses,K,flagged,ms";

/// One estimator configuration of a sweep.
pub struct SweepConfig {
    pub param: String,
    pub value: String,
    pub estimator: Box<dyn InverseEstimator>,
}

impl SweepConfig {
    pub fn regen(method: &str, target: u64, cap: u64) -> Self {
        let estimator: Box<dyn InverseEstimator> = match method {
            "regen-scaled" => Box::new(RegenEstimator::scaled(target, cap)),
            _ => Box::new(RegenEstimator::dense(target, cap)),
        };
        Self {
            param: "N".into(),
            value: target.to_string(),
            estimator,
        }
    }

    pub fn classic(replications: u64, truncation: u64) -> Self {
        Self {
            param: "R:rk".into(),
            value: format!("{replications}:{truncation}"),
            estimator: Box::new(ClassicEstimator {
                replications,
                truncation,
            }),
        }
    }
}

/// A problem with its kernel and exact reference inverse.
pub struct PreparedProblem {
    pub problem: TestProblem,
    pub kernel: TransitionKernel,
    pub reference: DenseMatrix,
}

impl PreparedProblem {
    /// Row-normalized kernel; fails unless the convergence check passes.
    pub fn new(problem: TestProblem) -> Result<Self, SweepError> {
        let kernel = build_row_normalized(&problem.a)?;
        Self::with_kernel(problem, kernel)
    }

    pub fn with_kernel(problem: TestProblem, kernel: TransitionKernel) -> Result<Self, SweepError> {
        let report = check_convergence(&problem.a, &kernel)?;
        if !report.converges() {
            return Err(SweepError::Convergence {
                family: problem.family.clone(),
                rho: report.rho_hat,
                verdict: format!("{:?}", report.verdict),
            });
        }
        let reference = problem.reference_inverse()?;
        Ok(Self {
            problem,
            kernel,
            reference,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub row: SweepRow,
    pub report: EstimateReport,
}

/// Runs one configuration for one replication.
pub fn run_one(
    experiment: &str,
    prepared: &PreparedProblem,
    config: &SweepConfig,
    seed: u64,
    rep: u64,
) -> Result<RunOutcome, SweepError> {
    let started = Instant::now();
    let report = config.estimator.estimate(&prepared.problem.a, &prepared.kernel, seed, rep)?;
    let ms = started.elapsed().as_secs_f64() * 1e3;
    let rel_frob = metrics::rel_frobenius_error(&prepared.reference, &report.c_hat)
        .map(|m| m.value)
        .unwrap_or(f64::NAN);
    let rel_trace = metrics::rel_trace_error(&prepared.reference, &report.c_hat)
        .map(|m| m.value.abs())
        .unwrap_or(f64::NAN);
    let row = SweepRow {
        experiment: experiment.to_string(),
        family: prepared.problem.family.clone(),
        d: prepared.problem.dim(),
        param: config.param.clone(),
        value: config.value.clone(),
        seed,
        rep,
        rel_frob,
        rel_trace,
        accesses: report.accesses,
        k: report.steps,
        flagged: report.flagged.len(),
        ms,
    };
    Ok(RunOutcome { row, report })
}

/// Every configuration times `reps` replications, in parallel. Outcomes are
/// ordered by configuration, then replication.
pub fn run_sweep(
    experiment: &str,
    prepared: &PreparedProblem,
    configs: &[SweepConfig],
    seed: u64,
    reps: u64,
) -> Result<Vec<RunOutcome>, SweepError> {
    let jobs: Vec<(usize, u64)> = (0..configs.len()).flat_map(|c| (0..reps).map(move |r| (c, r))).collect();
    jobs.par_iter()
        .map(|&(c, rep)| run_one(experiment, prepared, &configs[c], seed, rep))
        .collect()
}

pub fn multiples(d: usize, factors: &[u64]) -> Vec<u64> {
    factors.iter().map(|f| f * d as u64).collect()
}

/// Entrywise error heatmaps at `N in {d, 2d, 4d, 8d}`.
pub struct HeatmapSweep {
    pub outcomes: Vec<RunOutcome>,
    /// `(N, mean over replications of |C - Ĉ|)`; flagged entries are skipped.
    pub grids: Vec<(u64, Vec<Vec<f64>>)>,
}

pub fn heatmap_sweep(
    experiment: &str,
    prepared: &PreparedProblem,
    targets: &[u64],
    method: &str,
    seed: u64,
    reps: u64,
) -> Result<HeatmapSweep, SweepError> {
    let configs: Vec<SweepConfig> = targets.iter().map(|&n| SweepConfig::regen(method, n, DEFAULT_CAP)).collect();
    let outcomes = run_sweep(experiment, prepared, &configs, seed, reps)?;
    let d = prepared.problem.dim();
    let grids = targets
        .iter()
        .map(|&n| {
            let runs: Vec<&RunOutcome> = outcomes.iter().filter(|o| o.row.value == n.to_string()).collect();
            let grid = (0..d)
                .map(|i| {
                    (0..d)
                        .map(|j| {
                            let errs: Vec<f64> = runs
                                .iter()
                                .filter_map(|o| o.report.c_hat.get(i, j))
                                .map(|v| (v - prepared.reference[(i, j)]).abs())
                                .collect();
                            mean_and_se(&errs).0
                        })
                        .collect()
                })
                .collect();
            (n, grid)
        })
        .collect();
    Ok(HeatmapSweep { outcomes, grids })
}

/// Relative errors and iteration counts at `N in {d, ..., 6d}`.
pub fn accuracy_sweep(
    experiment: &str,
    prepared: &PreparedProblem,
    targets: &[u64],
    method: &str,
    seed: u64,
    reps: u64,
) -> Result<Vec<RunOutcome>, SweepError> {
    let configs: Vec<SweepConfig> = targets.iter().map(|&n| SweepConfig::regen(method, n, DEFAULT_CAP)).collect();
    run_sweep(experiment, prepared, &configs, seed, reps)
}

/// Classic `R x r_k` grid against regenerative `N` grid, in accesses of `A`.
pub fn error_vs_access_sweep(
    prepared: &PreparedProblem,
    classic_grid: &[(u64, u64)],
    regen_targets: &[u64],
    method: &str,
    seed: u64,
    reps: u64,
) -> Result<Vec<RunOutcome>, SweepError> {
    let mut configs: Vec<SweepConfig> = classic_grid.iter().map(|&(r, k)| SweepConfig::classic(r, k)).collect();
    configs.extend(regen_targets.iter().map(|&n| SweepConfig::regen(method, n, DEFAULT_CAP)));
    run_sweep("fig13", prepared, &configs, seed, reps)
}

/// `R in {d, 2d, 3d}` x `r_k in {d, 2d}`.
pub fn default_classic_grid(d: usize) -> Vec<(u64, u64)> {
    let d = d as u64;
    let mut grid = Vec::new();
    for r in [d, 2 * d, 3 * d] {
        for k in [d, 2 * d] {
            grid.push((r, k));
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KatzRow {
    #[serde(rename = "N")]
    pub n: u64,
    pub seed: u64,
    pub rep: u64,
    pub rel_frob: f64,
    pub rel_centrality: f64,
    pub ranked_correct: usize,
    pub accesses: u64,
    #[serde(rename = "K")]
    pub k: u64,
}

pub struct KatzSweep {
    pub outcomes: Vec<RunOutcome>,
    pub rows: Vec<KatzRow>,
}

/// Katz centrality from `Ĉ 1` at each `N`.
pub fn katz_sweep(katz: &KatzProblem, targets: &[u64], method: &str, seed: u64, reps: u64) -> Result<KatzSweep, SweepError> {
    let prepared = PreparedProblem::new(katz.problem.clone())?;
    let truth = katz.reference_centrality()?;
    let configs: Vec<SweepConfig> = targets.iter().map(|&n| SweepConfig::regen(method, n, DEFAULT_CAP)).collect();
    let outcomes = run_sweep("katz", &prepared, &configs, seed, reps)?;
    let rows = outcomes
        .iter()
        .map(|o| {
            let est = o.report.c_hat.row_sums();
            KatzRow {
                n: o.report.target.unwrap_or(0),
                seed: o.row.seed,
                rep: o.row.rep,
                rel_frob: o.row.rel_frob,
                rel_centrality: metrics::rel_vector_error(&truth, &est).unwrap_or(f64::NAN),
                ranked_correct: if est.iter().all(|v| v.is_finite()) {
                    metrics::ranking_agreement(&truth, &est)
                } else {
                    0
                },
                accesses: o.row.accesses,
                k: o.row.k,
            }
        })
        .collect();
    Ok(KatzSweep { outcomes, rows })
}

/// Mean and standard error per configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub family: String,
    pub d: usize,
    pub param: String,
    pub value: String,
    pub reps: usize,
    pub rel_frob_mean: f64,
    pub rel_frob_se: f64,
    pub rel_trace_mean: f64,
    pub rel_trace_se: f64,
    pub accesses_mean: f64,
    #[serde(rename = "K_mean")]
    pub k_mean: f64,
    #[serde(rename = "K_se")]
    pub k_se: f64,
    pub flagged_mean: f64,
}

/// Groups rows by configuration, preserving first-appearance order.
pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut order: Vec<(String, String, usize, String, String)> = Vec::new();
    let mut groups: BTreeMap<(String, String, usize, String, String), Vec<&SweepRow>> = BTreeMap::new();
    for r in rows {
        let key = (r.experiment.clone(), r.family.clone(), r.d, r.param.clone(), r.value.clone());
        let entry = groups.entry(key.clone()).or_default();
        if entry.is_empty() {
            order.push(key);
        }
        entry.push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let g = &groups[&key];
            let finite = |f: fn(&SweepRow) -> f64| -> Vec<f64> { g.iter().map(|r| f(r)).filter(|v| v.is_finite()).collect() };
            let (rel_frob_mean, rel_frob_se) = mean_and_se(&finite(|r| r.rel_frob));
            let (rel_trace_mean, rel_trace_se) = mean_and_se(&finite(|r| r.rel_trace));
            let (k_mean, k_se) = mean_and_se(&finite(|r| r.k as f64));
            SummaryRow {
                experiment: key.0,
                family: key.1,
                d: key.2,
                param: key.3,
                value: key.4,
                reps: g.len(),
                rel_frob_mean,
                rel_frob_se,
                rel_trace_mean,
                rel_trace_se,
                accesses_mean: mean_and_se(&finite(|r| r.accesses as f64)).0,
                k_mean,
                k_se,
                flagged_mean: mean_and_se(&finite(|r| r.flagged as f64)).0,
            }
        })
        .collect()
}

pub fn write_csv<T: Serialize>(writer: impl Write, rows: &[T]) -> Result<(), SweepError> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(reader: impl Read) -> Result<Vec<SweepRow>, SweepError> {
    let mut r = csv::Reader::from_reader(reader);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// A `d x d` grid as CSV lines, one matrix row per line.
pub fn write_grid(mut writer: impl Write, grid: &[Vec<f64>]) -> Result<(), SweepError> {
    for row in grid {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(writer, "{}", line.join(","))?;
    }
    Ok(())
}
