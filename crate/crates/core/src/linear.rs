//! LinearGNNs: closed-form ridge classifiers on single encoding blocks.

use nalgebra::{Cholesky, DMatrix, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoders::EncodingBlock;
use crate::folds::{stratified_folds, FoldPlan};
use crate::predictor::{BackendTag, Notice, Predictor};
use crate::seeding::stream;
use crate::tabular::NodeTable;

#[derive(Debug, Error)]
pub enum LinearError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("{0}")]
    Shape(String),
    #[error("ridge system is not positive definite (lambda = {0:e})")]
    NotPositiveDefinite(f64),
    #[error("ridge strength must be positive, got {0}")]
    BadLambda(f64),
}

/// Ridge strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RidgePenalty {
    /// Multiple of the mean diagonal of `Z̃ᵀZ̃`.
    Relative(f64),
    Absolute(f64),
}

impl Default for RidgePenalty {
    fn default() -> Self {
        Self::Relative(1e-2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearConfig {
    pub penalty: RidgePenalty,
    pub epsilon: f64,
    pub folds: usize,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self { penalty: RidgePenalty::default(), epsilon: 1e-8, folds: 5 }
    }
}

/// Multi-output ridge regression onto one-hot targets.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeClassifier {
    /// `(D + 1) x C` with the bias in the last row, or `D x C` without intercept.
    pub weights: DMatrix<f64>,
    pub lambda: f64,
    pub block_name: String,
    pub intercept: bool,
}

fn augment(z: &DMatrix<f64>, intercept: bool) -> DMatrix<f64> {
    if intercept {
        z.clone().insert_column(z.ncols(), 1.0)
    } else {
        z.clone()
    }
}

fn cholesky(a: DMatrix<f64>, lambda: f64) -> Result<Cholesky<f64, Dyn>, LinearError> {
    Cholesky::new(a).ok_or(LinearError::NotPositiveDefinite(lambda))
}

impl RidgeClassifier {
    /// Solves `(Z̃ᵀZ̃ + λI) W = Z̃ᵀY` by Cholesky with one refinement step.
    /// When the design is wider than tall, the equivalent dual system
    /// `W = Z̃ᵀ (Z̃Z̃ᵀ + λI)⁻¹ Y` is solved instead.
    pub fn fit(
        z: &DMatrix<f64>,
        y: &DMatrix<f64>,
        penalty: RidgePenalty,
        intercept: bool,
        block_name: &str,
    ) -> Result<Self, LinearError> {
        if z.nrows() != y.nrows() || z.nrows() == 0 {
            return Err(LinearError::Shape(format!("{} design rows vs {} target rows", z.nrows(), y.nrows())));
        }
        if z.iter().any(|x| !x.is_finite()) {
            return Err(LinearError::NonFinite("design matrix"));
        }
        if y.iter().any(|x| !x.is_finite()) {
            return Err(LinearError::NonFinite("targets"));
        }
        let zt = augment(z, intercept);
        let (n, d) = zt.shape();
        let lambda = match penalty {
            RidgePenalty::Absolute(l) => l,
            RidgePenalty::Relative(r) => r * zt.norm_squared() / d.max(1) as f64,
        };
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(LinearError::BadLambda(lambda));
        }

        let weights = if d <= n {
            let mut a = zt.transpose() * &zt;
            for i in 0..d {
                a[(i, i)] += lambda;
            }
            let b = zt.transpose() * y;
            let chol = cholesky(a.clone(), lambda)?;
            let mut w = chol.solve(&b);
            let r = &b - &a * &w;
            w += chol.solve(&r);
            w
        } else {
            let mut k = &zt * zt.transpose();
            for i in 0..n {
                k[(i, i)] += lambda;
            }
            let chol = cholesky(k.clone(), lambda)?;
            let mut alpha = chol.solve(y);
            let r = y - &k * &alpha;
            alpha += chol.solve(&r);
            zt.transpose() * alpha
        };
        Ok(Self { weights, lambda, block_name: block_name.to_string(), intercept })
    }

    pub fn logits(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        augment(z, self.intercept) * &self.weights
    }

    /// Logits mapped to probabilities by [`normalize_logits`], row by row.
    pub fn predict_proba(&self, z: &DMatrix<f64>, epsilon: f64) -> DMatrix<f64> {
        normalize_rows(&self.logits(z), epsilon)
    }
}

/// Ridge fit with intercept and an absolute penalty.
pub fn fit_ridge(z: &DMatrix<f64>, y_onehot: &DMatrix<f64>, lambda: f64) -> Result<RidgeClassifier, LinearError> {
    RidgeClassifier::fit(z, y_onehot, RidgePenalty::Absolute(lambda), true, "")
}

/// Proportional scaling: shift so the smallest logit sits at `epsilon`,
/// then divide by the total.
pub fn normalize_logits(l: &[f64], epsilon: f64) -> Vec<f64> {
    let min = l.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = l.iter().map(|x| x - min + epsilon).collect();
    let total: f64 = shifted.iter().sum();
    shifted.into_iter().map(|x| x / total).collect()
}

pub(crate) fn normalize_rows(logits: &DMatrix<f64>, epsilon: f64) -> DMatrix<f64> {
    let mut out = logits.clone();
    for i in 0..logits.nrows() {
        let row: Vec<f64> = logits.row(i).iter().copied().collect();
        for (j, p) in normalize_logits(&row, epsilon).into_iter().enumerate() {
            out[(i, j)] = p;
        }
    }
    out
}

pub fn one_hot(labels: &[usize], num_classes: usize) -> DMatrix<f64> {
    let mut y = DMatrix::zeros(labels.len(), num_classes);
    for (i, &c) in labels.iter().enumerate() {
        y[(i, c)] = 1.0;
    }
    y
}

/// Held-out probabilities for the plan's evaluated rows, in ascending
/// position order: each row comes from a classifier fit on every other fold.
pub fn holdout_predictions(
    z_l: &DMatrix<f64>,
    labels: &[usize],
    num_classes: usize,
    plan: &FoldPlan,
    cfg: &LinearConfig,
    block_name: &str,
) -> Result<DMatrix<f64>, LinearError> {
    let rows = plan.holdout_rows();
    let slot: Vec<Option<usize>> = {
        let mut s = vec![None; labels.len()];
        for (k, &i) in rows.iter().enumerate() {
            s[i] = Some(k);
        }
        s
    };
    let mut out = DMatrix::zeros(rows.len(), num_classes);
    for fold in (0..plan.num_folds).filter(|&f| plan.evaluated[f]) {
        let test = plan.fold_rows(fold);
        if test.is_empty() {
            continue;
        }
        let train = plan.training_rows(fold);
        let z_train = z_l.select_rows(&train);
        let y_train = one_hot(&train.iter().map(|&i| labels[i]).collect::<Vec<_>>(), num_classes);
        let clf = RidgeClassifier::fit(&z_train, &y_train, cfg.penalty, true, block_name)?;
        let probs = clf.predict_proba(&z_l.select_rows(&test), cfg.epsilon);
        for (r, &i) in test.iter().enumerate() {
            out.set_row(slot[i].expect("evaluated fold row"), &probs.row(r));
        }
    }
    Ok(out)
}

/// Stratified k-fold held-out probabilities for every labeled row.
pub fn kfold_predictions(
    z_l: &DMatrix<f64>,
    labels: &[usize],
    num_classes: usize,
    folds: usize,
    seed: u64,
    cfg: &LinearConfig,
) -> Result<(DMatrix<f64>, Vec<Notice>), LinearError> {
    let (plan, notices) = stratified_folds(labels, folds, seed, stream::LINEAR_FOLDS);
    Ok((holdout_predictions(z_l, labels, num_classes, &plan, cfg, "")?, notices))
}

/// One predictor per block: held-out probabilities from `plan`, query
/// probabilities from a classifier fit on all of `L`.
pub fn make_linear_predictors(
    blocks: &[EncodingBlock],
    table: &NodeTable,
    plan: &FoldPlan,
    cfg: &LinearConfig,
) -> Result<Vec<Predictor>, LinearError> {
    blocks
        .par_iter()
        .map(|block| {
            let z_l = block.matrix.select_rows(&table.labeled);
            let holdout_probs = holdout_predictions(&z_l, &table.labels, table.num_classes, plan, cfg, &block.name)?;
            let y = one_hot(&table.labels, table.num_classes);
            let clf = RidgeClassifier::fit(&z_l, &y, cfg.penalty, true, &block.name)?;
            let query_probs = clf.predict_proba(&block.matrix.select_rows(&table.query), cfg.epsilon);
            Ok(Predictor {
                id: format!("linear-gnn/{}", block.name),
                backend: BackendTag::LinearGnn,
                holdout_probs,
                query_probs,
                columns: Vec::new(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::is_row_stochastic;

    #[test]
    fn hand_solved_normal_equations() {
        let z = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let y = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let clf = RidgeClassifier::fit(&z, &y, RidgePenalty::Absolute(1e-12), false, "t").unwrap();
        assert!((clf.weights[(0, 0)] - 0.2).abs() < 1e-10);
        assert!((clf.weights[(0, 1)] - 0.4).abs() < 1e-10);
    }

    #[test]
    fn single_class_targets() {
        let z = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.5, 1.0, -1.0, 2.0]);
        let y = one_hot(&[1, 1, 1], 3);
        let clf = fit_ridge(&z, &y, 1e-3).unwrap();
        let logits = clf.logits(&z);
        for i in 0..3 {
            assert!(logits[(i, 1)] > logits[(i, 0)] && logits[(i, 1)] > logits[(i, 2)]);
            assert_eq!(logits[(i, 0)], 0.0);
        }
    }

    #[test]
    fn huge_penalty_shrinks_to_zero() {
        let z = DMatrix::from_fn(6, 3, |i, j| (i * 3 + j) as f64 * 0.1);
        let y = one_hot(&[0, 1, 0, 1, 0, 1], 2);
        let clf = fit_ridge(&z, &y, 1e12).unwrap();
        assert!(clf.weights.amax() <= 1e-6);
    }

    #[test]
    fn dual_route_matches_primal() {
        let z = DMatrix::from_fn(4, 7, |i, j| ((i * 5 + j * 3) % 7) as f64 - 3.0);
        let y = one_hot(&[0, 1, 2, 1], 3);
        let dual = fit_ridge(&z, &y, 0.5).unwrap();
        let zt = augment(&z, true);
        let mut a = zt.transpose() * &zt;
        for i in 0..a.nrows() {
            a[(i, i)] += 0.5;
        }
        let primal = a.clone().lu().solve(&(zt.transpose() * &y)).unwrap();
        assert!((dual.weights - primal).amax() < 1e-10);
    }

    #[test]
    fn zero_lambda_rejected() {
        let z = DMatrix::from_element(2, 1, 1.0);
        let y = one_hot(&[0, 1], 2);
        assert!(matches!(fit_ridge(&z, &y, 0.0), Err(LinearError::BadLambda(_))));
        let mut bad = z.clone();
        bad[(0, 0)] = f64::INFINITY;
        assert!(matches!(fit_ridge(&bad, &y, 1.0), Err(LinearError::NonFinite(_))));
    }

    #[test]
    fn logit_normalization_examples() {
        let p = normalize_logits(&[2.0, -1.0, 3.0], 1e-15);
        assert!((p[0] - 3.0 / 7.0).abs() < 1e-12 && p[1] < 1e-12 && (p[2] - 4.0 / 7.0).abs() < 1e-12);
        for c in [-5.0, 0.0, 1e6] {
            assert_eq!(normalize_logits(&[c, c, c], 1e-8), vec![1.0 / 3.0; 3]);
        }
    }

    #[test]
    fn kfold_covers_every_row() {
        let z = DMatrix::from_fn(10, 2, |i, j| if j == 0 { (i / 5) as f64 } else { (i % 3) as f64 });
        let labels: Vec<usize> = (0..10).map(|i| i / 5).collect();
        let (p, notices) = kfold_predictions(&z, &labels, 2, 5, 0, &LinearConfig::default()).unwrap();
        assert!(notices.is_empty());
        assert_eq!(p.nrows(), 10);
        assert!(is_row_stochastic(&p, 1e-12));
    }
}
