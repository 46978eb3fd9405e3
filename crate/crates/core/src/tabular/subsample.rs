//! Column and class-balanced row subsampling under learner size limits.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{NodeTable, TabularError};
use crate::encoders::EncodingKind;
use crate::seeding::{rng_for, stream};

/// Hard limits of the tabular learners.
pub const MAX_CONTEXT_ROWS: usize = 10_000;
pub const MAX_COLUMNS: usize = 500;
pub const MAX_CLASSES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubsampleBudgets {
    pub row_budget: usize,
    pub feature_col_budget: usize,
    pub structure_col_budget: usize,
}

impl Default for SubsampleBudgets {
    fn default() -> Self {
        Self { row_budget: 2500, feature_col_budget: 300, structure_col_budget: 100 }
    }
}

impl SubsampleBudgets {
    pub fn validate(&self) -> Result<(), TabularError> {
        if self.row_budget == 0 || self.row_budget > MAX_CONTEXT_ROWS {
            return Err(TabularError::Budget(format!("row budget must be in 1..={MAX_CONTEXT_ROWS}")));
        }
        let cols = self.feature_col_budget + self.structure_col_budget;
        if cols == 0 || cols > MAX_COLUMNS {
            return Err(TabularError::Budget(format!("column budgets must total 1..={MAX_COLUMNS}")));
        }
        Ok(())
    }
}

/// Uniformly samples up to `feature_col_budget` feature-kind and up to
/// `structure_col_budget` structure-kind columns without replacement.
/// Unused budget of one kind is not handed to the other. Sorted.
pub fn subsample_columns(table: &NodeTable, budgets: &SubsampleBudgets, seed: u64) -> Vec<usize> {
    let mut rng = rng_for(seed, &[stream::COLUMNS]);
    let mut out = Vec::new();
    for (kind, budget) in [
        (EncodingKind::Feature, budgets.feature_col_budget),
        (EncodingKind::Structure, budgets.structure_col_budget),
    ] {
        let pool = table.columns_of(kind);
        let take = budget.min(pool.len());
        out.extend(sample(&mut rng, pool.len(), take).into_iter().map(|i| pool[i]));
    }
    out.sort_unstable();
    out
}

fn largest_remainder(counts: &[usize], members: &[usize], total: usize) -> Vec<usize> {
    let mut alloc = vec![0; counts.len()];
    let weight: usize = members.iter().map(|&c| counts[c]).sum();
    if weight == 0 || total == 0 {
        return alloc;
    }
    let mut remainders = Vec::with_capacity(members.len());
    for &c in members {
        let q = total as f64 * counts[c] as f64 / weight as f64;
        alloc[c] = (q.floor() as usize).min(counts[c]);
        remainders.push((q - q.floor(), c));
    }
    let mut left = total - alloc.iter().sum::<usize>();
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, c) in &remainders {
        if left == 0 {
            break;
        }
        if alloc[c] < counts[c] {
            alloc[c] += 1;
            left -= 1;
        }
    }
    // only reached when caps bind: fill any class with room, largest first
    let mut by_size = members.to_vec();
    by_size.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    while left > 0 {
        let before = left;
        for &c in &by_size {
            if left > 0 && alloc[c] < counts[c] {
                alloc[c] += 1;
                left -= 1;
            }
        }
        if before == left {
            break;
        }
    }
    alloc
}

/// Per-class row quotas summing to `min(budget, Σ counts)`.
///
/// Classes whose proportional share falls below one row are pinned to one
/// row (repeatedly, as pinning shrinks the remaining budget); the rest split
/// the remaining budget by largest-remainder apportionment. Pinning only
/// applies when the budget covers every present class.
pub fn class_quotas(counts: &[usize], budget: usize) -> Vec<usize> {
    let total: usize = counts.iter().sum();
    if budget >= total {
        return counts.to_vec();
    }
    let present: Vec<usize> = (0..counts.len()).filter(|&c| counts[c] > 0).collect();
    if budget < present.len() {
        return largest_remainder(counts, &present, budget);
    }
    let mut pinned = vec![false; counts.len()];
    loop {
        let active: Vec<usize> = present.iter().copied().filter(|&c| !pinned[c]).collect();
        let n_pinned = present.len() - active.len();
        let remaining = (budget - n_pinned) as f64;
        let weight: usize = active.iter().map(|&c| counts[c]).sum();
        let newly: Vec<usize> =
            active.iter().copied().filter(|&c| remaining * (counts[c] as f64) < weight as f64).collect();
        if newly.is_empty() {
            let mut alloc = largest_remainder(counts, &active, budget - n_pinned);
            for &c in &present {
                if pinned[c] {
                    alloc[c] = 1;
                }
            }
            return alloc;
        }
        for c in newly {
            pinned[c] = true;
        }
    }
}

/// Class-balanced sample of labeled rows: `class_quotas` per class, then
/// uniform without replacement within each class. Returns sorted positions
/// into `labels`.
pub fn subsample_labeled_rows(labels: &[usize], budget: usize, seed: u64) -> Vec<usize> {
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut members = vec![Vec::new(); num_classes];
    for (i, &c) in labels.iter().enumerate() {
        members[c].push(i);
    }
    let counts: Vec<usize> = members.iter().map(Vec::len).collect();
    let quotas = class_quotas(&counts, budget);
    let mut rng = rng_for(seed, &[stream::ROWS]);
    let mut out = Vec::with_capacity(quotas.iter().sum());
    for (c, rows) in members.iter().enumerate() {
        if quotas[c] == rows.len() {
            out.extend_from_slice(rows);
        } else {
            out.extend(sample(&mut rng, rows.len(), quotas[c]).into_iter().map(|i| rows[i]));
        }
    }
    out.sort_unstable();
    out
}

/// Subsampling state of one learner call site: a frozen column set and a
/// seeded row sampler that can be re-run on any support within `L`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsampleSpec {
    pub seed: u64,
    pub budgets: SubsampleBudgets,
    pub columns: Vec<usize>,
}

impl SubsampleSpec {
    pub fn new(table: &NodeTable, budgets: SubsampleBudgets, seed: u64) -> Result<Self, TabularError> {
        budgets.validate()?;
        let columns = subsample_columns(table, &budgets, seed);
        Ok(Self { seed, budgets, columns })
    }

    /// Class-balanced sample of `support` (positions into `labels`).
    pub fn sample_rows(&self, labels: &[usize], support: &[usize]) -> Vec<usize> {
        let restricted: Vec<usize> = support.iter().map(|&i| labels[i]).collect();
        subsample_labeled_rows(&restricted, self.budgets.row_budget, self.seed)
            .into_iter()
            .map(|k| support[k])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::{BlockSource, EncodingBlock};
    use nalgebra::DMatrix;

    fn table(features: usize, structure: usize) -> NodeTable {
        let blocks = vec![
            EncodingBlock::new(BlockSource::Raw { pca_dim: None }, DMatrix::zeros(4, features)).unwrap(),
            EncodingBlock::new(BlockSource::RandomWalk { steps: structure }, DMatrix::zeros(4, structure)).unwrap(),
        ];
        NodeTable::build(&blocks, vec![0, 1], vec![0, 1], vec![2], 2).unwrap()
    }

    #[test]
    fn column_budget_clamp() {
        let t = table(5000, 72);
        let cols = subsample_columns(&t, &SubsampleBudgets::default(), 1);
        assert_eq!(cols.len(), 372);
        assert!(cols.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(cols.iter().filter(|&&c| c >= 5000).count(), 72);
    }

    #[test]
    fn column_sampling_seeded() {
        let t = table(1000, 200);
        let b = SubsampleBudgets::default();
        assert_eq!(subsample_columns(&t, &b, 5), subsample_columns(&t, &b, 5));
        assert_ne!(subsample_columns(&t, &b, 5), subsample_columns(&t, &b, 6));
    }

    #[test]
    fn quota_examples() {
        assert_eq!(class_quotas(&[6, 4], 5), vec![3, 2]);
        assert_eq!(class_quotas(&[98, 1, 1], 10), vec![8, 1, 1]);
        assert_eq!(class_quotas(&[3, 2], 10), vec![3, 2]);
        assert_eq!(class_quotas(&[5, 0, 5], 4), vec![2, 0, 2]);
        assert_eq!(class_quotas(&[10, 10, 10], 2).iter().sum::<usize>(), 2);
    }

    #[test]
    fn rows_balanced_and_deterministic() {
        let labels: Vec<usize> = (0..10).map(|i| usize::from(i >= 6)).collect();
        let rows = subsample_labeled_rows(&labels, 5, 3);
        assert_eq!(rows.len(), 5);
        assert_eq!(rows.iter().filter(|&&i| labels[i] == 0).count(), 3);
        assert_eq!(rows, subsample_labeled_rows(&labels, 5, 3));
        assert_eq!(subsample_labeled_rows(&labels, 50, 3), (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn restricted_support() {
        let t = table(10, 5);
        let spec = SubsampleSpec::new(&t, SubsampleBudgets { row_budget: 2, ..Default::default() }, 0).unwrap();
        let labels = vec![0, 1, 0, 1, 0, 1];
        let support = vec![1, 2, 3, 4];
        let rows = spec.sample_rows(&labels, &support);
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| support.contains(r)));
        assert_eq!(rows.iter().filter(|&&r| labels[r] == 0).count(), 1);
    }

    #[test]
    fn budget_validation() {
        assert!(SubsampleBudgets { row_budget: 20_000, ..Default::default() }.validate().is_err());
        assert!(SubsampleBudgets { feature_col_budget: 450, ..Default::default() }.validate().is_err());
        assert!(SubsampleBudgets::default().validate().is_ok());
    }
}
