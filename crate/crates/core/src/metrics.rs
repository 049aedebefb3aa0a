//! Error metrics and small statistics helpers used by the experiments.

use thiserror::Error;

use crate::linalg::DenseMatrix;
use crate::report::EstimateMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("every entry of the estimate is flagged")]
    AllFlagged,
    #[error("reference has zero norm")]
    ZeroReference,
    #[error("reference trace is zero")]
    ZeroTrace,
    #[error("fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("log-log fit needs positive coordinates")]
    NonPositive,
    #[error("x values coincide; slope undefined")]
    DegenerateFit,
}

/// Metric value plus the number of flagged entries left out of it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measured {
    pub value: f64,
    pub excluded: usize,
}

fn check_dims(truth: &DenseMatrix, est: &EstimateMatrix) -> Result<(), MetricError> {
    if truth.dim() != est.dim() {
        return Err(MetricError::DimensionMismatch(truth.dim(), est.dim()));
    }
    Ok(())
}

/// `||C - Ĉ||_F / ||C||_F` over the entries that are not flagged.
pub fn rel_frobenius_error(truth: &DenseMatrix, est: &EstimateMatrix) -> Result<Measured, MetricError> {
    check_dims(truth, est)?;
    let (mut num, mut den, mut excluded, mut kept) = (0.0, 0.0, 0, 0);
    for (&c, &e) in truth.as_slice().iter().zip(est.values()) {
        if !e.is_finite() {
            excluded += 1;
            continue;
        }
        kept += 1;
        num += (c - e) * (c - e);
        den += c * c;
    }
    if kept == 0 {
        return Err(MetricError::AllFlagged);
    }
    if den == 0.0 {
        return Err(MetricError::ZeroReference);
    }
    Ok(Measured {
        value: (num / den).sqrt(),
        excluded,
    })
}

/// Signed `Tr(C - Ĉ) / Tr(C)`, over unflagged diagonal entries.
pub fn rel_trace_error(truth: &DenseMatrix, est: &EstimateMatrix) -> Result<Measured, MetricError> {
    check_dims(truth, est)?;
    let (mut num, mut den, mut excluded) = (0.0, 0.0, 0);
    for i in 0..truth.dim() {
        match est.get(i, i) {
            Some(e) => {
                num += truth[(i, i)] - e;
                den += truth[(i, i)];
            }
            None => excluded += 1,
        }
    }
    if excluded == truth.dim() {
        return Err(MetricError::AllFlagged);
    }
    if den == 0.0 {
        return Err(MetricError::ZeroTrace);
    }
    Ok(Measured {
        value: num / den,
        excluded,
    })
}

/// Largest `|C_ij - Ĉ_ij|` over unflagged entries.
pub fn max_abs_error(truth: &DenseMatrix, est: &EstimateMatrix) -> Result<Measured, MetricError> {
    check_dims(truth, est)?;
    let mut worst: Option<f64> = None;
    let mut excluded = 0;
    for (&c, &e) in truth.as_slice().iter().zip(est.values()) {
        if e.is_finite() {
            worst = Some(worst.unwrap_or(0.0).max((c - e).abs()));
        } else {
            excluded += 1;
        }
    }
    worst.map(|value| Measured { value, excluded }).ok_or(MetricError::AllFlagged)
}

/// `||x - x̂||_2 / ||x||_2`; non-finite estimates propagate as `NaN`.
pub fn rel_vector_error(truth: &[f64], est: &[f64]) -> Result<f64, MetricError> {
    if truth.len() != est.len() {
        return Err(MetricError::DimensionMismatch(truth.len(), est.len()));
    }
    let den: f64 = truth.iter().map(|v| v * v).sum();
    if den == 0.0 {
        return Err(MetricError::ZeroReference);
    }
    let num: f64 = truth.iter().zip(est).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((num / den).sqrt())
}

/// Rank of each position under descending order, ties to the lower index.
fn ranks(x: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
    let mut rank = vec![0; x.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    rank
}

/// Number of positions holding the same rank in both vectors.
pub fn ranking_agreement(truth: &[f64], est: &[f64]) -> usize {
    assert_eq!(truth.len(), est.len(), "vectors must have equal length");
    ranks(truth).into_iter().zip(ranks(est)).filter(|(a, b)| a == b).count()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares line through `points`, optionally in log-log coordinates.
pub fn slope_fit(points: &[(f64, f64)], log_log: bool) -> Result<LineFit, MetricError> {
    if points.len() < 3 {
        return Err(MetricError::TooFewPoints(points.len()));
    }
    let pts: Vec<(f64, f64)> = if log_log {
        if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
            return Err(MetricError::NonPositive);
        }
        points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect()
    } else {
        points.to_vec()
    };
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= f64::EPSILON * mx.abs().max(1.0) * n {
        return Err(MetricError::DegenerateFit);
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LineFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
