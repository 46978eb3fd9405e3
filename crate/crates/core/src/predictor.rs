//! Units entering ensemble selection.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendTag {
    LinearGnn,
    NativeLogreg,
    NativeKnn,
    External,
}

/// Held-out probabilities over the pool's holdout rows and query
/// probabilities over `Q`, both row-stochastic.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    pub id: String,
    pub backend: BackendTag,
    pub holdout_probs: DMatrix<f64>,
    pub query_probs: DMatrix<f64>,
    /// Table columns used, one set per subtask. Empty for linear predictors,
    /// which see a whole encoding block.
    pub columns: Vec<Vec<usize>>,
}

/// A non-fatal event worth surfacing in the metrics report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notice {
    pub source: String,
    pub message: String,
}

impl Notice {
    pub fn new(source: impl Into<String>, message: impl Into<String>) -> Self {
        Self { source: source.into(), message: message.into() }
    }
}

/// Checks that every row is non-negative and sums to one within `tol`.
pub fn is_row_stochastic(p: &DMatrix<f64>, tol: f64) -> bool {
    p.row_iter()
        .all(|r| r.iter().all(|&x| x >= 0.0 && x.is_finite()) && (r.sum() - 1.0).abs() <= tol)
}

/// Index of the row maximum; the lowest index wins ties.
pub fn argmax_row(row: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, x) in row.into_iter().enumerate() {
        if x > best.1 {
            best = (i, x);
        }
    }
    best.0
}
