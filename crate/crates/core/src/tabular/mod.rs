//! Node table assembly, subsampling, ECOC decomposition and tabular learners.

mod ecoc;
mod external;
mod learner;
pub mod protocol;
mod subsample;
mod table;
mod tfm;

use thiserror::Error;

pub use ecoc::{decode_round, ecoc_plan, subtasks_per_round, EcocDecision, EcocPlan, Subtask, CLASSES_PER_BLOCK};
pub use external::{Endpoint, ExternalLearner, DEFAULT_TIMEOUT};
pub use learner::{KNearest, LearnerError, LearnerTask, LogisticRegression, SoftmaxObjective, Standardizer, TabularLearner};
pub use subsample::{
    class_quotas, subsample_columns, subsample_labeled_rows, SubsampleBudgets, SubsampleSpec, MAX_CLASSES,
    MAX_COLUMNS, MAX_CONTEXT_ROWS,
};
pub use table::{ColumnMeta, NodeTable};
pub use tfm::{make_tfm_predictors, PredictorFailure, TfmConfig, TfmOutcome};

#[derive(Debug, Error)]
pub enum TabularError {
    #[error("table shape: {0}")]
    Shape(String),
    #[error("subsampling budget: {0}")]
    Budget(String),
}
