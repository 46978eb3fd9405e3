//! Predictors built from tabular learners run on subsampled tables.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ecoc::{decode_round, ecoc_plan, EcocDecision, Subtask};
use super::learner::{LearnerError, LearnerTask, TabularLearner};
use super::subsample::{SubsampleBudgets, SubsampleSpec, MAX_CLASSES, MAX_COLUMNS, MAX_CONTEXT_ROWS};
use super::{NodeTable, TabularError};
use crate::folds::FoldPlan;
use crate::predictor::{Notice, Predictor};
use crate::seeding::{derive_seed, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TfmConfig {
    pub budgets: SubsampleBudgets,
    pub folds: usize,
}

impl Default for TfmConfig {
    fn default() -> Self {
        Self { budgets: SubsampleBudgets::default(), folds: 2 }
    }
}

/// A learner call failed; the predictor it belonged to is unusable.
#[derive(Debug, thiserror::Error)]
#[error("predictor {id}: {source}")]
pub struct PredictorFailure {
    pub id: String,
    #[source]
    pub source: LearnerError,
}

#[derive(Debug)]
pub struct TfmOutcome {
    pub results: Vec<Result<Predictor, PredictorFailure>>,
    /// Set when the class-count gate suppressed every learner predictor.
    pub gate: Option<Notice>,
}

struct SubtaskRun {
    holdout: DMatrix<f64>,
    query: DMatrix<f64>,
    columns: Vec<usize>,
}

fn run_subtask(
    table: &NodeTable,
    learner: &dyn TabularLearner,
    plan: &FoldPlan,
    task: &Subtask,
    spec: &SubsampleSpec,
    id: &str,
) -> Result<SubtaskRun, LearnerError> {
    let meta: Vec<usize> = table.labels.iter().map(|&c| task.output_of(c)).collect();
    let outputs = task.num_outputs();
    let learner_seed = derive_seed(spec.seed, &[stream::LEARNER]);
    let call = |support: &[usize], targets: DMatrix<f64>, phase: &str| {
        let ctx_rows = spec.sample_rows(&table.labels, support);
        let context = table.labeled_rows(&ctx_rows, &spec.columns);
        let labels: Vec<usize> = ctx_rows.iter().map(|&i| meta[i]).collect();
        assert!(
            context.nrows() <= MAX_CONTEXT_ROWS && context.ncols() <= MAX_COLUMNS && outputs <= MAX_CLASSES,
            "learner limits violated for {id}"
        );
        let call_id = format!("{id}/{phase}");
        learner.fit_predict(&LearnerTask {
            id: &call_id,
            seed: learner_seed,
            num_classes: outputs,
            context: &context,
            labels: &labels,
            queries: &targets,
            columns: &spec.columns,
        })
    };

    let holdout_rows = plan.holdout_rows();
    let mut slot = vec![usize::MAX; table.labeled.len()];
    for (k, &i) in holdout_rows.iter().enumerate() {
        slot[i] = k;
    }
    let mut holdout = DMatrix::zeros(holdout_rows.len(), outputs);
    for fold in (0..plan.num_folds).filter(|&f| plan.evaluated[f]) {
        let rows = plan.fold_rows(fold);
        if rows.is_empty() {
            continue;
        }
        let probs = call(&plan.training_rows(fold), table.labeled_rows(&rows, &spec.columns), &format!("fold{fold}"))?;
        for (r, &i) in rows.iter().enumerate() {
            holdout.set_row(slot[i], &probs.row(r));
        }
    }
    let all: Vec<usize> = (0..table.labeled.len()).collect();
    let query = call(&all, table.query_rows(&spec.columns), "query")?;
    Ok(SubtaskRun { holdout, query, columns: spec.columns.clone() })
}

/// Builds learner-backed predictors. Up to ten classes each of the
/// `num_tables` slots is one predictor; above that, slots are grouped into
/// ECOC rounds and each round is one predictor. Every subtask owns a frozen
/// column set shared by its held-out and query calls; its context rows are
/// re-drawn class-balanced from whichever labeled rows are admissible.
pub fn make_tfm_predictors(
    table: &NodeTable,
    num_tables: usize,
    learner: &dyn TabularLearner,
    plan: &FoldPlan,
    cfg: &TfmConfig,
    seed: u64,
) -> Result<TfmOutcome, TabularError> {
    cfg.budgets.validate()?;
    let plan_rounds = match ecoc_plan(table.num_classes, num_tables, seed) {
        EcocDecision::Plan(p) => p.rounds,
        EcocDecision::Refused { required, available } => {
            let notice = Notice::new(
                "ecoc",
                format!(
                    "{} classes need at least {required} learner tables, got {available}; no learner predictors",
                    table.num_classes
                ),
            );
            return Ok(TfmOutcome { results: Vec::new(), gate: Some(notice) });
        }
    };
    let specs: Vec<Vec<SubsampleSpec>> = plan_rounds
        .iter()
        .enumerate()
        .map(|(r, round)| {
            (0..round.len())
                .map(|s| SubsampleSpec::new(table, cfg.budgets, derive_seed(seed, &[stream::COLUMNS, r as u64, s as u64])))
                .collect::<Result<_, _>>()
        })
        .collect::<Result<_, _>>()?;

    let results = plan_rounds
        .par_iter()
        .zip(specs.par_iter())
        .enumerate()
        .map(|(r, (round, round_specs))| {
            let id = format!("tfm/{r}");
            let runs = round
                .iter()
                .zip(round_specs)
                .enumerate()
                .map(|(s, (task, spec))| run_subtask(table, learner, plan, task, spec, &format!("{id}/sub{s}")))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|source| PredictorFailure { id: id.clone(), source })?;
            let holdouts: Vec<_> = runs.iter().map(|x| x.holdout.clone()).collect();
            let queries: Vec<_> = runs.iter().map(|x| x.query.clone()).collect();
            Ok(Predictor {
                id,
                backend: learner.tag(),
                holdout_probs: decode_round(round, &holdouts, table.num_classes),
                query_probs: decode_round(round, &queries, table.num_classes),
                columns: runs.into_iter().map(|x| x.columns).collect(),
            })
        })
        .collect();
    Ok(TfmOutcome { results, gate: None })
}
