use std::collections::BTreeSet;

use nalgebra::DMatrix;
use proptest::prelude::*;
use tabgfm::folds::stratified_folds;
use tabgfm::graph::{normalized_adjacency, Graph};
use tabgfm::linear::{fit_ridge, normalize_logits, one_hot};

fn graph_strategy() -> impl Strategy<Value = Graph> {
    (2usize..20).prop_flat_map(|n| {
        proptest::collection::btree_set((0..n, 0..n), 0..3 * n).prop_map(move |pairs| {
            let edges: BTreeSet<_> = pairs.into_iter().filter(|(u, v)| u != v).map(|(u, v)| (u.min(v), u.max(v))).collect();
            Graph::new(n, edges.into_iter().collect(), DMatrix::zeros(n, 1), vec![Some(0); n], 1).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn normalized_logits_are_on_simplex_and_keep_order(l in proptest::collection::vec(-1e3f64..1e3, 1..12)) {
        let p = normalize_logits(&l, 1e-8);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|&x| x > 0.0));
        for i in 0..l.len() {
            for j in 0..l.len() {
                if l[i] < l[j] {
                    prop_assert!(p[i] <= p[j]);
                }
            }
        }
    }

    #[test]
    fn random_walk_rows_sum_to_one_or_zero(g in graph_strategy()) {
        let a = normalized_adjacency(&g).to_dense();
        let degrees = g.degrees();
        for (i, row) in a.row_iter().enumerate() {
            let expected = if degrees[i] == 0 { 0.0 } else { 1.0 };
            prop_assert!((row.sum() - expected).abs() < 1e-12);
            prop_assert!(row.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn folds_partition_labeled_rows(
        labels in proptest::collection::vec(0usize..4, 2..60),
        folds in 2usize..8,
        seed in any::<u64>(),
    ) {
        let (plan, _) = stratified_folds(&labels, folds, seed, 0);
        prop_assert_eq!(plan.assignment.len(), labels.len());
        let mut seen = vec![false; labels.len()];
        for f in 0..plan.num_folds {
            for i in plan.fold_rows(f) {
                prop_assert!(!seen[i]);
                seen[i] = true;
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
        for c in 0..4 {
            let per_fold: Vec<usize> = (0..plan.num_folds)
                .map(|f| plan.fold_rows(f).iter().filter(|&&i| labels[i] == c).count())
                .collect();
            let (lo, hi) = (per_fold.iter().min().unwrap(), per_fold.iter().max().unwrap());
            prop_assert!(hi - lo <= 1);
        }
    }

    #[test]
    fn ridge_ignores_an_appended_zero_column(
        values in proptest::collection::vec(-3.0f64..3.0, 30),
        lambda in 1e-3f64..10.0,
    ) {
        let z = DMatrix::from_row_slice(10, 3, &values);
        let labels: Vec<usize> = (0..10).map(|i| i % 3).collect();
        let y = one_hot(&labels, 3);
        let padded = z.clone().insert_column(3, 0.0);
        let a = fit_ridge(&z, &y, lambda).unwrap().logits(&z);
        let b = fit_ridge(&padded, &y, lambda).unwrap().logits(&padded);
        prop_assert!((a - b).amax() < 1e-8);
    }
}
