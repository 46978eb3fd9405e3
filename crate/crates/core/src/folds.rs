//! Stratified fold plans over the labeled rows.

use rand::seq::SliceRandom;

use crate::predictor::Notice;
use crate::seeding::rng_for;

/// Assignment of labeled rows (by position in `L`) to folds. Rows in
/// `evaluated` folds receive held-out predictions; the rest only serve as
/// training context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub seed: u64,
    pub num_folds: usize,
    pub assignment: Vec<usize>,
    pub evaluated: Vec<bool>,
}

impl FoldPlan {
    /// Positions that receive held-out predictions, ascending.
    pub fn holdout_rows(&self) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.evaluated[self.assignment[i]]).collect()
    }

    pub fn fold_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == fold).collect()
    }

    pub fn training_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] != fold).collect()
    }

    /// Whether every class present in `labels` appears in every training
    /// complement of an evaluated fold.
    pub fn covers_all_classes(&self, labels: &[usize]) -> bool {
        let num_classes = labels.iter().max().map_or(0, |m| m + 1);
        let mut counts = vec![vec![0usize; num_classes]; self.num_folds];
        for (i, &c) in labels.iter().enumerate() {
            counts[self.assignment[i]][c] += 1;
        }
        let total: Vec<usize> = (0..num_classes).map(|c| counts.iter().map(|f| f[c]).sum()).collect();
        (0..self.num_folds)
            .filter(|&f| self.evaluated[f])
            .all(|f| (0..num_classes).all(|c| total[c] == 0 || total[c] > counts[f][c]))
    }
}

fn by_class(labels: &[usize]) -> Vec<Vec<usize>> {
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut groups = vec![Vec::new(); num_classes];
    for (i, &c) in labels.iter().enumerate() {
        groups[c].push(i);
    }
    groups
}

fn assign_round_robin(labels: &[usize], folds: usize, seed: u64, tag: u64) -> FoldPlan {
    let mut rng = rng_for(seed, &[tag, folds as u64]);
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for mut members in by_class(labels) {
        members.shuffle(&mut rng);
        for i in members {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    FoldPlan { seed, num_folds: folds, assignment, evaluated: vec![true; folds] }
}

/// Class-stratified k-fold plan: rows of each class are shuffled and dealt
/// round-robin, continuing the deal across classes, so per-class counts
/// across folds differ by at most one.
///
/// `folds` is clamped to `[2, |L|]`. If some class would vanish from a
/// training complement, the fold count is lowered to the largest value that
/// avoids it; when none does (a class with a single row) the clamped count
/// is kept. Both adjustments are reported as notices.
pub fn stratified_folds(labels: &[usize], folds: usize, seed: u64, tag: u64) -> (FoldPlan, Vec<Notice>) {
    let mut notices = Vec::new();
    let clamped = folds.clamp(2, labels.len().max(2));
    if clamped != folds {
        notices.push(Notice::new("folds", format!("fold count {folds} clamped to {clamped}")));
    }
    for k in (2..=clamped).rev() {
        let plan = assign_round_robin(labels, k, seed, tag);
        if plan.covers_all_classes(labels) {
            if k != clamped {
                notices.push(Notice::new(
                    "folds",
                    format!("fold count reduced from {clamped} to {k} so every class appears in each training fold"),
                ));
            }
            return (plan, notices);
        }
    }
    notices.push(Notice::new(
        "folds",
        "a class has a single labeled row and is missing from one training fold".to_string(),
    ));
    (assign_round_robin(labels, clamped, seed, tag), notices)
}

/// Single stratified hold-out split: fold 0 is the hold-out set (about
/// `fraction` of each class, keeping at least one anchor row per class),
/// fold 1 the anchors. Only fold 0 is evaluated.
pub fn single_holdout(labels: &[usize], fraction: f64, seed: u64, tag: u64) -> FoldPlan {
    let mut rng = rng_for(seed, &[tag]);
    let mut assignment = vec![1; labels.len()];
    for mut members in by_class(labels) {
        members.shuffle(&mut rng);
        let n = members.len();
        let take = ((fraction * n as f64).round() as usize).min(n.saturating_sub(1));
        for &i in &members[..take] {
            assignment[i] = 0;
        }
    }
    FoldPlan { seed, num_folds: 2, assignment, evaluated: vec![true, false] }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stratified_balanced() {
        let labels: Vec<usize> = (0..10).map(|i| i / 5).collect();
        let (plan, notices) = stratified_folds(&labels, 5, 3, 0);
        assert!(notices.is_empty());
        for f in 0..5 {
            let train: Vec<usize> = plan.training_rows(f).iter().map(|&i| labels[i]).collect();
            assert!(train.contains(&0) && train.contains(&1));
            assert_eq!(plan.fold_rows(f).len(), 2);
        }
        for c in 0..2 {
            let per_fold: Vec<usize> =
                (0..5).map(|f| plan.fold_rows(f).iter().filter(|&&i| labels[i] == c).count()).collect();
            assert!(per_fold.iter().max().unwrap() - per_fold.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn leave_one_out_boundary() {
        let labels = vec![0, 0, 1, 1];
        let (plan, notices) = stratified_folds(&labels, 4, 0, 0);
        assert!(notices.is_empty());
        assert_eq!(plan.num_folds, 4);
        for f in 0..4 {
            assert_eq!(plan.fold_rows(f).len(), 1);
        }
    }

    #[test]
    fn singleton_class_is_reported() {
        let labels = vec![0, 0, 0, 0, 1];
        let (plan, notices) = stratified_folds(&labels, 3, 0, 0);
        assert_eq!(plan.num_folds, 3);
        assert!(!notices.is_empty());
    }

    #[test]
    fn too_many_folds_clamped() {
        let (plan, notices) = stratified_folds(&[0, 1, 0], 5, 0, 0);
        assert_eq!(plan.num_folds, 3);
        assert!(!notices.is_empty());
    }

    #[test]
    fn holdout_split() {
        let labels: Vec<usize> = (0..20).map(|i| i % 2).collect();
        let plan = single_holdout(&labels, 0.25, 1, 0);
        let h = plan.holdout_rows();
        assert!(h.len() >= 4 && h.len() <= 6);
        assert!(plan.covers_all_classes(&labels));
    }
}
