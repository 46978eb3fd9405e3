//! The tabular learner contract and the two native backends.

use std::time::Duration;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::predictor::BackendTag;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("empty context")]
    EmptyContext,
    #[error("size limits exceeded: {0}")]
    Limits(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("learner reported an error: {0}")]
    Remote(String),
    #[error("no response within {0:?}")]
    Timeout(Duration),
}

/// One in-context prediction problem.
#[derive(Debug, Clone, Copy)]
pub struct LearnerTask<'a> {
    pub id: &'a str,
    pub seed: u64,
    pub num_classes: usize,
    pub context: &'a DMatrix<f64>,
    pub labels: &'a [usize],
    pub queries: &'a DMatrix<f64>,
    /// Table columns the matrices were cut from.
    pub columns: &'a [usize],
}

impl LearnerTask<'_> {
    fn check(&self) -> Result<(), LearnerError> {
        if self.context.nrows() == 0 {
            return Err(LearnerError::EmptyContext);
        }
        if self.context.iter().any(|x| !x.is_finite()) {
            return Err(LearnerError::NonFinite("context"));
        }
        if self.queries.iter().any(|x| !x.is_finite()) {
            return Err(LearnerError::NonFinite("queries"));
        }
        Ok(())
    }
}

/// `fit_predict` returns a `|queries| x num_classes` row-stochastic matrix
/// and is deterministic for fixed inputs and seed.
pub trait TabularLearner: Send + Sync {
    fn tag(&self) -> BackendTag;
    fn fit_predict(&self, task: &LearnerTask<'_>) -> Result<DMatrix<f64>, LearnerError>;
}

/// Column z-scoring from context statistics; constant columns are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    keep: Vec<usize>,
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let (mut keep, mut mean, mut std) = (Vec::new(), Vec::new(), Vec::new());
        for (j, col) in x.column_iter().enumerate() {
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let s = var.sqrt();
            if s > 1e-12 * m.abs().max(1.0) {
                keep.push(j);
                mean.push(m);
                std.push(s);
            }
        }
        Self { keep, mean, std }
    }

    pub fn width(&self) -> usize {
        self.keep.len()
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), self.keep.len(), |i, k| (x[(i, self.keep[k])] - self.mean[k]) / self.std[k])
    }
}

/// Mean softmax cross-entropy over the classes present in the context, plus
/// `λ/2 ‖W‖²` on the non-bias rows. `W` is `(d + 1) x k` with the bias last.
pub struct SoftmaxObjective<'a> {
    x: &'a DMatrix<f64>,
    targets: Vec<usize>,
    num_outputs: usize,
    lambda: f64,
}

impl<'a> SoftmaxObjective<'a> {
    /// `targets` index into `0..num_outputs`.
    pub fn new(x: &'a DMatrix<f64>, targets: Vec<usize>, num_outputs: usize, lambda: f64) -> Self {
        Self { x, targets, num_outputs, lambda }
    }

    fn scores(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        let d = self.x.ncols();
        let mut s = self.x * w.rows(0, d);
        for mut row in s.row_iter_mut() {
            row += w.row(d);
        }
        s
    }

    fn softmax_rows(s: &mut DMatrix<f64>) {
        for mut row in s.row_iter_mut() {
            let max = row.max();
            row.apply(|v| *v = (*v - max).exp());
            let total = row.sum();
            row /= total;
        }
    }

    pub fn loss(&self, w: &DMatrix<f64>) -> f64 {
        let d = self.x.ncols();
        let s = self.scores(w);
        let n = self.x.nrows() as f64;
        let mut total = 0.0;
        for (i, &t) in self.targets.iter().enumerate() {
            let row = s.row(i);
            let max = row.max();
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - row[t];
        }
        total / n + 0.5 * self.lambda * w.rows(0, d).norm_squared()
    }

    pub fn gradient(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        let d = self.x.ncols();
        let n = self.x.nrows() as f64;
        let mut p = self.scores(w);
        Self::softmax_rows(&mut p);
        for (i, &t) in self.targets.iter().enumerate() {
            p[(i, t)] -= 1.0;
        }
        p /= n;
        let mut g = DMatrix::zeros(d + 1, self.num_outputs);
        g.rows_mut(0, d).copy_from(&(self.x.transpose() * &p + w.rows(0, d) * self.lambda));
        g.row_mut(d).copy_from(&p.row_sum());
        g
    }

    pub fn probabilities(&self, w: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
        let d = self.x.ncols();
        let mut s = x * w.rows(0, d);
        for mut row in s.row_iter_mut() {
            row += w.row(d);
        }
        Self::softmax_rows(&mut s);
        s
    }
}

/// Multinomial logistic regression trained by full-batch gradient descent
/// from zero weights on z-scored columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    pub lambda: f64,
    pub iterations: usize,
    pub step: f64,
}

impl Default for LogisticRegression {
    fn default() -> Self {
        Self { lambda: 1e-2, iterations: 500, step: 0.1 }
    }
}

fn present_classes(labels: &[usize], num_classes: usize) -> Result<Vec<usize>, LearnerError> {
    let mut present = vec![false; num_classes];
    for &c in labels {
        if c >= num_classes {
            return Err(LearnerError::Limits(format!("label {c} outside {num_classes} classes")));
        }
        present[c] = true;
    }
    Ok((0..num_classes).filter(|&c| present[c]).collect())
}

impl TabularLearner for LogisticRegression {
    fn tag(&self) -> BackendTag {
        BackendTag::NativeLogreg
    }

    fn fit_predict(&self, task: &LearnerTask<'_>) -> Result<DMatrix<f64>, LearnerError> {
        task.check()?;
        let classes = present_classes(task.labels, task.num_classes)?;
        let mut out = DMatrix::zeros(task.queries.nrows(), task.num_classes);
        if classes.len() == 1 {
            out.column_mut(classes[0]).fill(1.0);
            return Ok(out);
        }
        let scaler = Standardizer::fit(task.context);
        let x = scaler.transform(task.context);
        let targets = task.labels.iter().map(|c| classes.binary_search(c).expect("present")).collect();
        let objective = SoftmaxObjective::new(&x, targets, classes.len(), self.lambda);
        let mut w = DMatrix::zeros(x.ncols() + 1, classes.len());
        for _ in 0..self.iterations {
            let g = objective.gradient(&w);
            w -= g * self.step;
        }
        let probs = objective.probabilities(&w, &scaler.transform(task.queries));
        for (k, &c) in classes.iter().enumerate() {
            out.set_column(c, &probs.column(k));
        }
        Ok(out)
    }
}

/// Inverse-distance weighted k-nearest neighbors on z-scored columns.
#[derive(Debug, Clone, PartialEq)]
pub struct KNearest {
    pub k: usize,
}

impl Default for KNearest {
    fn default() -> Self {
        Self { k: 10 }
    }
}

/// Squared Euclidean distance, accumulated in column order.
pub(crate) fn squared_distance(a: impl Iterator<Item = f64>, b: impl Iterator<Item = f64>) -> f64 {
    a.zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl TabularLearner for KNearest {
    fn tag(&self) -> BackendTag {
        BackendTag::NativeKnn
    }

    fn fit_predict(&self, task: &LearnerTask<'_>) -> Result<DMatrix<f64>, LearnerError> {
        task.check()?;
        present_classes(task.labels, task.num_classes)?;
        let scaler = Standardizer::fit(task.context);
        let ctx = scaler.transform(task.context);
        let qry = scaler.transform(task.queries);
        let k = self.k.clamp(1, ctx.nrows());
        let mut out = DMatrix::zeros(qry.nrows(), task.num_classes);
        let mut dist: Vec<(f64, usize)> = Vec::with_capacity(ctx.nrows());
        for q in 0..qry.nrows() {
            dist.clear();
            dist.extend((0..ctx.nrows()).map(|i| {
                (squared_distance(qry.row(q).iter().copied(), ctx.row(i).iter().copied()), i)
            }));
            let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < dist.len() {
                dist.select_nth_unstable_by(k - 1, order);
            }
            let nearest = &mut dist[..k];
            nearest.sort_by(order);
            let exact = nearest.iter().filter(|(d, _)| *d == 0.0).count();
            let mut total = 0.0;
            for &(d, i) in nearest.iter() {
                let w = match (exact, d == 0.0) {
                    (0, _) => 1.0 / d.sqrt(),
                    (_, true) => 1.0,
                    (_, false) => 0.0,
                };
                out[(q, task.labels[i])] += w;
                total += w;
            }
            out.row_mut(q).unscale_mut(total);
        }
        Ok(out)
    }
}
