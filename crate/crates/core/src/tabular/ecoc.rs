//! Output-code decomposition of many-class tasks into subtasks the learner
//! accepts: each subtask owns a block of at most nine classes as singletons
//! and lumps every other class into one catch-all output.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use super::subsample::MAX_CLASSES;
use crate::seeding::{rng_for, stream};

/// Singleton classes per subtask when a catch-all output is needed.
pub const CLASSES_PER_BLOCK: usize = MAX_CLASSES - 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subtask {
    /// Owned classes; output `i` is `classes[i]`.
    pub classes: Vec<usize>,
    /// Whether output `classes.len()` collects all other classes.
    pub catch_all: bool,
}

impl Subtask {
    pub fn num_outputs(&self) -> usize {
        self.classes.len() + usize::from(self.catch_all)
    }

    /// Output index for an original class.
    pub fn output_of(&self, class: usize) -> usize {
        self.classes.iter().position(|&c| c == class).unwrap_or_else(|| {
            assert!(self.catch_all, "class {class} not covered by an identity subtask");
            self.classes.len()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EcocPlan {
    pub num_classes: usize,
    /// Each round yields one full-class predictor.
    pub rounds: Vec<Vec<Subtask>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EcocDecision {
    Plan(EcocPlan),
    /// Too few model slots to cover every class once.
    Refused { required: usize, available: usize },
}

/// Subtasks needed per round to cover `num_classes`.
pub fn subtasks_per_round(num_classes: usize) -> usize {
    if num_classes <= MAX_CLASSES {
        1
    } else {
        num_classes.div_ceil(CLASSES_PER_BLOCK)
    }
}

/// Plans `num_tables` learner slots. Up to ten classes every slot is one
/// identity round. Above that, each round spends `⌈C/9⌉` slots on a seeded
/// random partition of the classes into near-equal blocks; leftover slots
/// are dropped and fewer than `⌈C/9⌉` slots is a refusal.
pub fn ecoc_plan(num_classes: usize, num_tables: usize, seed: u64) -> EcocDecision {
    if num_classes <= MAX_CLASSES {
        let identity = Subtask { classes: (0..num_classes).collect(), catch_all: false };
        return EcocDecision::Plan(EcocPlan { num_classes, rounds: vec![vec![identity]; num_tables] });
    }
    let per_round = subtasks_per_round(num_classes);
    if num_tables < per_round {
        return EcocDecision::Refused { required: per_round, available: num_tables };
    }
    let mut rng = rng_for(seed, &[stream::ECOC, num_classes as u64]);
    let rounds = (0..num_tables / per_round)
        .map(|_| {
            let mut order: Vec<usize> = (0..num_classes).collect();
            order.shuffle(&mut rng);
            let (base, extra) = (num_classes / per_round, num_classes % per_round);
            let mut at = 0;
            (0..per_round)
                .map(|s| {
                    let len = base + usize::from(s < extra);
                    let mut classes = order[at..at + len].to_vec();
                    classes.sort_unstable();
                    at += len;
                    Subtask { classes, catch_all: true }
                })
                .collect()
        })
        .collect();
    EcocDecision::Plan(EcocPlan { num_classes, rounds })
}

/// Assembles full-class scores for one round from per-subtask output
/// probabilities: each class takes its singleton probability, then rows are
/// renormalized (uniform if a row carries no singleton mass).
pub fn decode_round(round: &[Subtask], outputs: &[DMatrix<f64>], num_classes: usize) -> DMatrix<f64> {
    let rows = outputs.first().map_or(0, DMatrix::nrows);
    let mut scores = DMatrix::zeros(rows, num_classes);
    for (task, probs) in round.iter().zip(outputs) {
        for (i, &c) in task.classes.iter().enumerate() {
            scores.set_column(c, &probs.column(i));
        }
    }
    for mut row in scores.row_iter_mut() {
        let total = row.sum();
        if total > 0.0 {
            row /= total;
        } else {
            row.fill(1.0 / num_classes as f64);
        }
    }
    scores
}
