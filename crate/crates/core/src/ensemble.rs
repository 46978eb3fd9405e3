//! Greedy forward ensemble selection with replacement, scored by held-out
//! accuracy, and the weighted combination of query predictions.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::predictor::{argmax_row, is_row_stochastic, Predictor};
use crate::seeding::{rng_for, stream};

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("predictor pool is empty")]
    EmptyPool,
    #[error("predictor {id}: {reason}")]
    Inconsistent { id: String, reason: String },
    #[error("{0}")]
    Shape(String),
}

/// Predictors sharing the same held-out rows, query rows and classes.
#[derive(Debug, Clone)]
pub struct PredictorPool {
    predictors: Vec<Predictor>,
    holdout_labels: Vec<usize>,
    num_classes: usize,
}

impl PredictorPool {
    pub fn new(predictors: Vec<Predictor>, holdout_labels: Vec<usize>, num_classes: usize) -> Result<Self, SelectionError> {
        let Some(first) = predictors.first() else {
            return Err(SelectionError::EmptyPool);
        };
        let queries = first.query_probs.nrows();
        for p in &predictors {
            let fail = |reason: String| SelectionError::Inconsistent { id: p.id.clone(), reason };
            if p.holdout_probs.shape() != (holdout_labels.len(), num_classes) {
                return Err(fail(format!("held-out shape {:?}", p.holdout_probs.shape())));
            }
            if p.query_probs.shape() != (queries, num_classes) {
                return Err(fail(format!("query shape {:?}", p.query_probs.shape())));
            }
            if !is_row_stochastic(&p.holdout_probs, 1e-6) || !is_row_stochastic(&p.query_probs, 1e-6) {
                return Err(fail("probabilities are not row-stochastic".into()));
            }
        }
        Ok(Self { predictors, holdout_labels, num_classes })
    }

    pub fn len(&self) -> usize {
        self.predictors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictors.is_empty()
    }

    pub fn predictors(&self) -> &[Predictor] {
        &self.predictors
    }

    pub fn holdout_labels(&self) -> &[usize] {
        &self.holdout_labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub chosen: usize,
    pub score: f64,
}

/// Convex weights over the pool plus the full greedy trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleWeights {
    pub weights: Vec<f64>,
    pub trace: Vec<SelectionStep>,
    /// Length of the kept prefix of `trace`.
    pub stopped_at: usize,
}

impl EnsembleWeights {
    pub fn uniform(len: usize) -> Self {
        Self { weights: vec![1.0 / len as f64; len], trace: Vec::new(), stopped_at: 0 }
    }

    /// Score of the kept prefix, if selection ran.
    pub fn best_score(&self) -> Option<f64> {
        self.stopped_at.checked_sub(1).map(|i| self.trace[i].score)
    }
}

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
pub fn accuracy(probs: &DMatrix<f64>, labels: &[usize]) -> f64 {
    assert_eq!(probs.nrows(), labels.len(), "probability rows vs labels");
    if labels.is_empty() {
        return 0.0;
    }
    let hits = probs
        .row_iter()
        .zip(labels)
        .filter(|(row, &y)| argmax_row(row.iter().copied()) == y)
        .count();
    hits as f64 / labels.len() as f64
}

/// Greedy forward selection with replacement for `max_iters` steps. Each
/// step adds the predictor whose inclusion maximizes accuracy of the running
/// mean; exact ties are broken uniformly with a seeded generator. Weights are
/// selection counts over the shortest prefix reaching the best score.
pub fn greedy_select(pool: &PredictorPool, max_iters: usize, seed: u64) -> Result<EnsembleWeights, SelectionError> {
    if pool.is_empty() {
        return Err(SelectionError::EmptyPool);
    }
    let max_iters = max_iters.max(1);
    let mut rng = rng_for(seed, &[stream::SELECTION]);
    let labels = pool.holdout_labels();
    let mut sum = DMatrix::zeros(labels.len(), pool.num_classes());
    let mut trace = Vec::with_capacity(max_iters);
    for t in 1..=max_iters {
        let scale = 1.0 / t as f64;
        let scores: Vec<f64> = pool
            .predictors()
            .iter()
            .map(|p| accuracy(&((&sum + &p.holdout_probs) * scale), labels))
            .collect();
        let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ties: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] == best).collect();
        let chosen = if ties.len() == 1 { ties[0] } else { ties[rng.gen_range(0..ties.len())] };
        sum += &pool.predictors()[chosen].holdout_probs;
        trace.push(SelectionStep { chosen, score: best });
    }
    let best = trace.iter().map(|s| s.score).fold(f64::NEG_INFINITY, f64::max);
    let stopped_at = trace.iter().position(|s| s.score == best).expect("non-empty trace") + 1;
    let mut weights = vec![0.0; pool.len()];
    for step in &trace[..stopped_at] {
        weights[step.chosen] += 1.0;
    }
    weights.iter_mut().for_each(|w| *w /= stopped_at as f64);
    Ok(EnsembleWeights { weights, trace, stopped_at })
}

/// `Σ_b w_b · query_probs_b`.
pub fn combine(weights: &EnsembleWeights, pool: &PredictorPool) -> Result<DMatrix<f64>, SelectionError> {
    weighted_sum(weights, pool, |p| &p.query_probs)
}

/// `Σ_b w_b · holdout_probs_b`, the combination scored during selection.
pub fn combine_holdout(weights: &EnsembleWeights, pool: &PredictorPool) -> Result<DMatrix<f64>, SelectionError> {
    weighted_sum(weights, pool, |p| &p.holdout_probs)
}

fn weighted_sum(
    weights: &EnsembleWeights,
    pool: &PredictorPool,
    probs: impl Fn(&Predictor) -> &DMatrix<f64>,
) -> Result<DMatrix<f64>, SelectionError> {
    if weights.weights.len() != pool.len() {
        return Err(SelectionError::Shape(format!("{} weights for {} predictors", weights.weights.len(), pool.len())));
    }
    let first = probs(&pool.predictors()[0]);
    let mut out = DMatrix::zeros(first.nrows(), first.ncols());
    for (w, p) in weights.weights.iter().zip(pool.predictors()) {
        if *w != 0.0 {
            out += probs(p) * *w;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::BackendTag;

    fn predictor(id: &str, holdout: DMatrix<f64>) -> Predictor {
        let query = holdout.clone();
        Predictor { id: id.into(), backend: BackendTag::LinearGnn, holdout_probs: holdout, query_probs: query, columns: vec![] }
    }

    fn one_hot_rows(classes: &[usize], c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(classes.len(), c, |i, j| if classes[i] == j { 1.0 } else { 0.0 })
    }

    #[test]
    fn accuracy_examples() {
        let labels = [0, 1, 1, 0];
        assert_eq!(accuracy(&one_hot_rows(&labels, 2), &labels), 1.0);
        assert_eq!(accuracy(&DMatrix::from_element(4, 3, 1.0 / 3.0), &[0, 0, 0, 0]), 1.0);
        assert_eq!(accuracy(&one_hot_rows(&[0, 1, 0, 1], 2), &labels), 0.5);
    }

    #[test]
    fn single_predictor_gets_all_weight() {
        let pool = PredictorPool::new(vec![predictor("a", one_hot_rows(&[0, 1], 2))], vec![0, 0], 2).unwrap();
        let w = greedy_select(&pool, 50, 0).unwrap();
        assert_eq!(w.weights, vec![1.0]);
    }

    #[test]
    fn perfect_beats_always_wrong() {
        let labels = vec![0, 1, 1, 0, 1];
        let wrong: Vec<usize> = labels.iter().map(|c| 1 - c).collect();
        let pool = PredictorPool::new(
            vec![predictor("wrong", one_hot_rows(&wrong, 2)), predictor("perfect", one_hot_rows(&labels, 2))],
            labels,
            2,
        )
        .unwrap();
        let w = greedy_select(&pool, 50, 3).unwrap();
        assert_eq!(w.weights, vec![0.0, 1.0]);
        assert_eq!(w.stopped_at, 1);
    }

    #[test]
    fn combine_rules() {
        let a = one_hot_rows(&[0, 1], 2);
        let b = DMatrix::from_element(2, 2, 0.5);
        let pool = PredictorPool::new(vec![predictor("a", a.clone()), predictor("b", b)], vec![0, 1], 2).unwrap();
        let w = EnsembleWeights { weights: vec![1.0, 0.0], trace: vec![], stopped_at: 0 };
        assert_eq!(combine(&w, &pool).unwrap(), a);
        let twin = PredictorPool::new(vec![predictor("a", a.clone()), predictor("a2", a.clone())], vec![0, 1], 2).unwrap();
        assert_eq!(combine(&EnsembleWeights::uniform(2), &twin).unwrap(), a);
        let bad = EnsembleWeights::uniform(3);
        assert!(combine(&bad, &pool).is_err());
    }

    #[test]
    fn pool_validation() {
        assert!(matches!(PredictorPool::new(vec![], vec![], 2), Err(SelectionError::EmptyPool)));
        let not_stochastic = DMatrix::from_element(2, 2, 0.7);
        assert!(PredictorPool::new(vec![predictor("x", not_stochastic)], vec![0, 1], 2).is_err());
    }
}
