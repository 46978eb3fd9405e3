//! Oracle suites comparing production routines against the brute-force
//! references in [`crate::oracle`], plus a few known-answer fixtures.

use std::fmt::Write as _;
use std::sync::Mutex;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::encoders::{
    laplacian_pe_with, lanczos_smallest, random_walk_pe, smooth_features, BlockSource, EigenSolver, EncodingBlock,
    LanczosOptions,
};
use crate::ensemble::{accuracy, combine_holdout, greedy_select, PredictorPool};
use crate::folds::stratified_folds;
use crate::graph::{normalized_adjacency, sym_normalized_laplacian, Graph};
use crate::linear::{fit_ridge, normalize_logits, one_hot};
use crate::oracle;
use crate::predictor::{BackendTag, Predictor};
use crate::seeding::{rng_for, stream};
use crate::tabular::{
    class_quotas, decode_round, ecoc_plan, make_tfm_predictors, subtasks_per_round, EcocDecision, KNearest,
    LearnerError, LearnerTask, LogisticRegression, NodeTable, SoftmaxObjective, TabularLearner, TfmConfig,
};

/// Known answers the suites assert against.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixtures {
    /// Return probabilities on the triangle for walk lengths 1..=3.
    pub k3_rwpe: [f64; 3],
    /// Normalized Laplacian spectrum of the 4-cycle.
    pub c4_spectrum: [f64; 4],
    /// One smoothing step of `[1, 0, 1]` on the path 0-1-2.
    pub path_smoothing: [f64; 3],
    /// `normalize_logits([2, -1, 3])` as epsilon goes to zero.
    pub logits_example: [f64; 3],
    /// Selection weights for the pool `{always wrong, perfect}`.
    pub perfect_pool_weights: [f64; 2],
    /// `(classes, tables, learner predictors)` gate cases.
    pub gate_table: [(usize, usize, usize); 3],
    /// Class counts for which ECOC decoding is checked with a perfect learner.
    pub ecoc_classes: [usize; 3],
}

impl Default for Fixtures {
    fn default() -> Self {
        Self {
            k3_rwpe: [0.0, 0.5, 0.25],
            c4_spectrum: [0.0, 1.0, 1.0, 2.0],
            path_smoothing: [0.0, 1.0, 0.0],
            logits_example: [3.0 / 7.0, 0.0, 4.0 / 7.0],
            perfect_pool_weights: [0.0, 1.0],
            gate_table: [(40, 4, 0), (40, 5, 1), (40, 10, 2)],
            ecoc_classes: [11, 40, 90],
        }
    }
}

/// Outcome of one suite: how many checks ran and which ones failed.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub checks: usize,
    pub failures: Vec<String>,
    pub seconds: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

struct Checker {
    checks: usize,
    failures: Vec<String>,
}

impl Checker {
    fn new() -> Self {
        Self { checks: 0, failures: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok && self.failures.len() < 20 {
            self.failures.push(what());
        }
    }

    fn finish(self, name: &'static str, start: std::time::Instant) -> SuiteReport {
        SuiteReport { name, checks: self.checks, failures: self.failures, seconds: start.elapsed().as_secs_f64() }
    }
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Random simple graph with `n` nodes and edge probability `p`.
fn random_edges(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    edges
}

fn graph_from(n: usize, edges: &[(usize, usize)], x: DMatrix<f64>) -> Graph {
    Graph::new(n, edges.to_vec(), x, vec![Some(0); n], 1).expect("valid random graph")
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

/// Neighbor smoothing, random-walk return probabilities and Laplacian
/// eigenvectors against brute-force and dense references.
pub fn encoder_suite(fx: &Fixtures, seed: u64) -> SuiteReport {
    let start = std::time::Instant::now();
    let mut ck = Checker::new();
    let mut rng = rng_for(seed, &[1]);

    for t in 0..100 {
        let n = rng.gen_range(1..=50);
        let p = rng.gen_range(0.0..0.3);
        let edges = random_edges(&mut rng, n, p);
        let x = random_matrix(&mut rng, n, 3);
        let k = rng.gen_range(1..=4);
        let g = graph_from(n, &edges, x.clone());
        let got = smooth_features(&normalized_adjacency(&g), &x, k).expect("smoothing");
        let diff = max_abs_diff(&got, &oracle::neighbor_average(n, &edges, &x, k));
        ck.check(diff <= 1e-10, || format!("smoothing graph {t} (n={n}, k={k}): diff {diff:e}"));
    }

    let path = graph_from(3, &[(0, 1), (1, 2)], DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 1.0]));
    let s = smooth_features(&normalized_adjacency(&path), path.features(), 1).expect("smoothing");
    let diff = (0..3).map(|i| (s[(i, 0)] - fx.path_smoothing[i]).abs()).fold(0.0, f64::max);
    ck.check(diff <= 1e-12, || format!("path smoothing fixture: diff {diff:e}"));

    for t in 0..100 {
        let n = rng.gen_range(1..=12);
        let p = rng.gen_range(0.1..0.8);
        let edges = random_edges(&mut rng, n, p);
        let steps = rng.gen_range(1..=10);
        let g = graph_from(n, &edges, DMatrix::zeros(n, 1));
        let got = random_walk_pe(&normalized_adjacency(&g), steps).expect("rwpe");
        let diff = max_abs_diff(&got, &oracle::rwpe_dense_powers(n, &edges, steps));
        ck.check(diff <= 1e-9, || format!("rwpe graph {t} (n={n}): diff vs dense powers {diff:e}"));
        if n <= 6 {
            let walks = oracle::rwpe_closed_walks(n, &edges, steps.min(5));
            let diff = max_abs_diff(&got.columns(0, steps.min(5)).into_owned(), &walks);
            ck.check(diff <= 1e-12, || format!("rwpe graph {t}: diff vs walk enumeration {diff:e}"));
        }
    }

    let k3 = [(0, 1), (1, 2), (0, 2)];
    let g = graph_from(3, &k3, DMatrix::zeros(3, 1));
    let got = random_walk_pe(&normalized_adjacency(&g), 3).expect("rwpe");
    let walks = oracle::rwpe_closed_walks(3, &k3, 3);
    for i in 0..3 {
        for s in 0..3 {
            let (a, w) = (got[(i, s)], walks[(i, s)]);
            ck.check((a - fx.k3_rwpe[s]).abs() <= 1e-12, || format!("K3 rwpe node {i} step {}: {a}", s + 1));
            ck.check((w - fx.k3_rwpe[s]).abs() <= 1e-12, || format!("K3 walk enumeration step {}: {w}", s + 1));
        }
    }

    for t in 0..100 {
        let n = rng.gen_range(2..=50);
        let p = rng.gen_range(0.05..0.5);
        let edges = random_edges(&mut rng, n, p);
        let k = rng.gen_range(1..=10);
        let g = graph_from(n, &edges, DMatrix::zeros(n, 1));
        let l = sym_normalized_laplacian(&g);
        let dense = l.to_dense();
        let (values, pe) = laplacian_pe_with(&l, k, &EigenSolver::Dense).expect("lappe");
        let kept = values.len();
        ck.check(kept == k.min(n - 1), || format!("lappe graph {t}: kept {kept} columns"));
        let cols = pe.columns(0, kept).into_owned();
        let resid = max_abs_diff(&(&dense * &cols), &(&cols * DMatrix::from_diagonal(&values.clone().into())));
        ck.check(resid <= 1e-8, || format!("lappe graph {t} (n={n}): eigen residual {resid:e}"));
        let gram = max_abs_diff(&(cols.transpose() * &cols), &DMatrix::identity(kept, kept));
        ck.check(gram <= 1e-8, || format!("lappe graph {t}: Gram deviation {gram:e}"));
        let pad = pe.columns(kept, k - kept).amax();
        ck.check(pad == 0.0, || format!("lappe graph {t}: padding not zero"));
        let (ref_values, _) = oracle::jacobi_eigen(&dense);
        let diff = values.iter().zip(&ref_values[1..]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ck.check(diff <= 1e-8, || format!("lappe graph {t}: eigenvalues differ from Jacobi by {diff:e}"));
    }

    let c4 = [(0, 1), (1, 2), (2, 3), (0, 3)];
    let g = graph_from(4, &c4, DMatrix::zeros(4, 1));
    let l = sym_normalized_laplacian(&g);
    let (jacobi, _) = oracle::jacobi_eigen(&l.to_dense());
    let (dense, _) = laplacian_pe_with(&l, 3, &EigenSolver::Dense).expect("lappe");
    let (krylov, _) = lanczos_smallest(&l, 4, &LanczosOptions::default()).expect("lanczos");
    for i in 0..4 {
        let e = fx.c4_spectrum[i];
        ck.check((jacobi[i] - e).abs() <= 1e-9, || format!("C4 Jacobi eigenvalue {i}: {}", jacobi[i]));
        ck.check((krylov[i] - e).abs() <= 1e-9, || format!("C4 Krylov eigenvalue {i}: {}", krylov[i]));
        if i > 0 {
            ck.check((dense[i - 1] - e).abs() <= 1e-9, || format!("C4 dense eigenvalue {i}: {}", dense[i - 1]));
        }
    }

    ck.finish("encoders", start)
}

/// Ridge normal equations and logit normalization.
pub fn ridge_suite(fx: &Fixtures, seed: u64) -> SuiteReport {
    let start = std::time::Instant::now();
    let mut ck = Checker::new();
    let mut rng = rng_for(seed, &[2]);

    for t in 0..100 {
        let n = rng.gen_range(2..=40);
        let d = rng.gen_range(1..=30);
        let c = rng.gen_range(2..=5);
        let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
        let z = random_matrix(&mut rng, n, d) * scale;
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
        let y = one_hot(&labels, c);
        let lambda = 10f64.powf(rng.gen_range(-4.0..1.0));
        let Ok(clf) = fit_ridge(&z, &y, lambda) else {
            ck.check(false, || format!("ridge instance {t}: fit failed"));
            continue;
        };
        let (resid, rhs) = oracle::ridge_normal_residual(&z, &y, &clf.weights, lambda);
        ck.check(resid <= 1e-8 * (1.0 + rhs), || {
            format!("ridge instance {t} (n={n}, d={d}): residual {resid:e} vs bound {:e}", 1e-8 * (1.0 + rhs))
        });
        let zt = oracle::with_ones(&z);
        let a = zt.transpose() * &zt + DMatrix::identity(d + 1, d + 1) * lambda;
        if let Some(w) = oracle::gauss_solve(&a, &(zt.transpose() * &y)) {
            let diff = max_abs_diff(&w, &clf.weights);
            let tol = 1e-6 * (1.0 + w.amax());
            ck.check(diff <= tol, || format!("ridge instance {t}: weights differ from elimination by {diff:e}"));
        }
    }

    for t in 0..1000 {
        let len = rng.gen_range(1..=20);
        let coarse = rng.gen_bool(0.3);
        let l: Vec<f64> = (0..len)
            .map(|_| {
                let v: f64 = rng.gen_range(-50.0..50.0);
                if coarse {
                    v.round()
                } else {
                    v
                }
            })
            .collect();
        let p = normalize_logits(&l, 1e-8);
        let sum: f64 = p.iter().sum();
        ck.check((sum - 1.0).abs() <= 1e-12 && p.iter().all(|&x| x >= 0.0), || {
            format!("normalize_logits vector {t}: not a simplex row (sum {sum})")
        });
        let ranked = (0..len).all(|i| (0..len).all(|j| l[i].partial_cmp(&l[j]) == p[i].partial_cmp(&p[j])));
        ck.check(ranked, || format!("normalize_logits vector {t}: ranking changed"));
    }

    let p = normalize_logits(&[2.0, -1.0, 3.0], 1e-15);
    let diff = p.iter().zip(&fx.logits_example).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ck.check(diff <= 1e-12, || format!("logits fixture: diff {diff:e}"));
    let p = normalize_logits(&[4.0, 4.0, 4.0], 1e-8);
    ck.check(p.iter().all(|&x| (x - 1.0 / 3.0).abs() <= 1e-15), || "constant logits not uniform".to_string());

    ck.finish("ridge", start)
}

fn predictor(id: String, holdout: DMatrix<f64>) -> Predictor {
    Predictor { id, backend: BackendTag::LinearGnn, query_probs: holdout.clone(), holdout_probs: holdout, columns: vec![] }
}

fn random_probs(rng: &mut ChaCha8Rng, labels: &[usize], c: usize) -> DMatrix<f64> {
    let skill = rng.gen_range(0.0..3.0);
    let mut m = DMatrix::from_fn(labels.len(), c, |_, _| rng.gen_range(0.0..1.0));
    for (i, &y) in labels.iter().enumerate() {
        m[(i, y)] += skill * rng.gen_range(0.0..1.0);
        let s = m.row(i).sum();
        m.row_mut(i).unscale_mut(s);
    }
    m
}

/// Greedy selection traces on random pools.
pub fn selection_suite(fx: &Fixtures, seed: u64) -> SuiteReport {
    let start = std::time::Instant::now();
    let mut ck = Checker::new();
    let mut rng = rng_for(seed, &[3]);

    let one = PredictorPool::new(vec![predictor("only".into(), DMatrix::from_element(3, 2, 0.5))], vec![0, 1, 1], 2)
        .expect("pool");
    let w = greedy_select(&one, 50, seed).expect("selection");
    ck.check(w.weights == vec![1.0], || format!("single predictor weights {:?}", w.weights));

    let labels = vec![0, 1, 1, 0, 2];
    let wrong: Vec<usize> = labels.iter().map(|c| (c + 1) % 3).collect();
    let pool = PredictorPool::new(
        vec![predictor("wrong".into(), one_hot(&wrong, 3)), predictor("perfect".into(), one_hot(&labels, 3))],
        labels,
        3,
    )
    .expect("pool");
    let w = greedy_select(&pool, 50, seed).expect("selection");
    ck.check(w.weights == fx.perfect_pool_weights, || format!("perfect/wrong pool weights {:?}", w.weights));

    for t in 0..200 {
        let n = rng.gen_range(1..=200);
        let c = rng.gen_range(2..=6);
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
        let size = rng.gen_range(1..=12);
        let mut preds: Vec<Predictor> = Vec::with_capacity(size);
        for b in 0..size {
            let m = if b > 0 && rng.gen_bool(0.2) {
                preds[rng.gen_range(0..b)].holdout_probs.clone()
            } else {
                random_probs(&mut rng, &labels, c)
            };
            preds.push(predictor(format!("p{b}"), m));
        }
        let pool = PredictorPool::new(preds, labels.clone(), c).expect("pool");
        let sel_seed = rng.gen();
        let w = greedy_select(&pool, 50, sel_seed).expect("selection");
        let again = greedy_select(&pool, 50, sel_seed).expect("selection");
        ck.check(w == again, || format!("pool {t}: selection not deterministic"));

        let best_single = pool.predictors().iter().map(|p| accuracy(&p.holdout_probs, &labels)).fold(0.0, f64::max);
        let ens = accuracy(&combine_holdout(&w, &pool).expect("combine"), &labels);
        ck.check(ens >= best_single, || format!("pool {t}: ensemble {ens} below best single {best_single}"));

        let holdouts: Vec<&DMatrix<f64>> = pool.predictors().iter().map(|p| &p.holdout_probs).collect();
        let chosen: Vec<usize> = w.trace.iter().map(|s| s.chosen).collect();
        let scores = oracle::prefix_scores(&holdouts, &chosen, &labels);
        let traced: Vec<f64> = w.trace.iter().map(|s| s.score).collect();
        ck.check(scores == traced, || format!("pool {t}: trace scores differ from recomputed prefix scores"));
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ck.check(w.best_score() == Some(max) && scores[..w.stopped_at - 1].iter().all(|&s| s < max), || {
            format!("pool {t}: stopped prefix is not the first maximum")
        });
        let sum: f64 = w.weights.iter().sum();
        let multiples = w.weights.iter().all(|&x| {
            let m = x * w.stopped_at as f64;
            x >= 0.0 && (m - m.round()).abs() <= 1e-9
        });
        ck.check((sum - 1.0).abs() <= 1e-12 && multiples, || format!("pool {t}: weights {:?}", w.weights));
    }

    ck.finish("selection", start)
}

/// Learner that records the columns of every call and answers uniformly.
#[derive(Default)]
struct RecordingLearner {
    calls: Mutex<Vec<(String, Vec<usize>, usize)>>,
}

impl TabularLearner for RecordingLearner {
    fn tag(&self) -> BackendTag {
        BackendTag::External
    }

    fn fit_predict(&self, task: &LearnerTask<'_>) -> Result<DMatrix<f64>, LearnerError> {
        self.calls.lock().expect("lock").push((task.id.to_string(), task.columns.to_vec(), task.context.nrows()));
        Ok(DMatrix::from_element(task.queries.nrows(), task.num_classes, 1.0 / task.num_classes as f64))
    }
}

fn random_table(rng: &mut ChaCha8Rng, n: usize, c: usize, feature_cols: usize, structure_cols: usize) -> NodeTable {
    let blocks = vec![
        EncodingBlock::new(BlockSource::Raw { pca_dim: None }, random_matrix(rng, n, feature_cols)).expect("block"),
        EncodingBlock::new(BlockSource::RandomWalk { steps: structure_cols }, random_matrix(rng, n, structure_cols))
            .expect("block"),
    ];
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.shuffle(rng);
    let split = n * 2 / 3;
    let labeled = nodes[..split].to_vec();
    let labels = (0..split).map(|i| i % c).collect();
    NodeTable::build(&blocks, labeled, labels, nodes[split..].to_vec(), c).expect("table")
}

/// Class quotas, frozen column sets, the class-count gate and ECOC decoding.
pub fn subsample_suite(fx: &Fixtures, seed: u64) -> SuiteReport {
    let start = std::time::Instant::now();
    let mut ck = Checker::new();
    let mut rng = rng_for(seed, &[4]);

    for t in 0..100 {
        let c = rng.gen_range(2..=12);
        let counts: Vec<usize> = (0..c)
            .map(|_| {
                let cap = rng.gen_range(1..=400);
                if rng.gen_bool(0.15) {
                    0
                } else {
                    rng.gen_range(1..=cap)
                }
            })
            .collect();
        let total: usize = counts.iter().sum();
        if total == 0 {
            continue;
        }
        let budget = rng.gen_range(1..=total + 10);
        let q = class_quotas(&counts, budget);
        ck.check(q.iter().sum::<usize>() == budget.min(total), || format!("quotas {t}: wrong total"));
        ck.check(q.iter().zip(&counts).all(|(a, b)| a <= b), || format!("quotas {t}: quota above class size"));
        let present: Vec<usize> = (0..c).filter(|&k| counts[k] > 0).collect();
        if budget >= total {
            ck.check(q == counts, || format!("quotas {t}: budget covers all rows but quotas differ"));
            continue;
        }
        if budget < present.len() {
            let dev = present
                .iter()
                .map(|&k| (q[k] as f64 - budget as f64 * counts[k] as f64 / total as f64).abs())
                .fold(0.0, f64::max);
            ck.check(dev < 1.0, || format!("quotas {t}: deviation {dev} without floors"));
            continue;
        }
        ck.check(present.iter().all(|&k| q[k] >= 1), || format!("quotas {t}: floor of one violated"));
        let mut pinned: Vec<bool> = vec![false; c];
        loop {
            let rem = (budget - pinned.iter().filter(|&&p| p).count()) as f64;
            let w: usize = present.iter().filter(|&&k| !pinned[k]).map(|&k| counts[k]).sum();
            let newly: Vec<usize> =
                present.iter().copied().filter(|&k| !pinned[k] && rem * (counts[k] as f64) < w as f64).collect();
            if newly.is_empty() {
                let dev = present
                    .iter()
                    .filter(|&&k| !pinned[k])
                    .map(|&k| (q[k] as f64 - rem * counts[k] as f64 / w as f64).abs())
                    .fold(0.0, f64::max);
                ck.check(dev < 1.0, || format!("quotas {t}: deviation {dev} after floors"));
                ck.check(present.iter().filter(|&&k| pinned[k]).all(|&k| q[k] == 1), || {
                    format!("quotas {t}: pinned class above its floor")
                });
                break;
            }
            for k in newly {
                pinned[k] = true;
            }
        }
        if !pinned.iter().any(|&p| p) {
            let dev = present
                .iter()
                .map(|&k| (q[k] as f64 - budget as f64 * counts[k] as f64 / total as f64).abs())
                .fold(0.0, f64::max);
            ck.check(dev < 1.0, || format!("quotas {t}: deviation {dev} from plain proportionality"));
        }
    }

    let cfg = TfmConfig { budgets: crate::tabular::SubsampleBudgets { row_budget: 30, feature_col_budget: 6, structure_col_budget: 3 }, folds: 2 };
    for (t, c) in [3usize, 7, 13, 25].into_iter().enumerate() {
        let table = random_table(&mut rng, 6 * c + 30, c, 10, 5);
        let (plan, _) = stratified_folds(&table.labels, cfg.folds, seed, stream::TFM_FOLDS);
        let learner = RecordingLearner::default();
        let b = 2 * subtasks_per_round(c);
        let outcome = make_tfm_predictors(&table, b, &learner, &plan, &cfg, seed + t as u64).expect("tfm");
        let calls = learner.calls.into_inner().expect("lock");
        for pred in outcome.results.into_iter().map(|r| r.expect("recording learner never fails")) {
            for (s, cols) in pred.columns.iter().enumerate() {
                let prefix = format!("{}/sub{s}/", pred.id);
                let used: Vec<&Vec<usize>> = calls.iter().filter(|x| x.0.starts_with(&prefix)).map(|x| &x.1).collect();
                ck.check(used.len() == plan.num_folds + 1, || format!("{prefix}: {} learner calls", used.len()));
                ck.check(used.iter().all(|u| *u == cols), || format!("{prefix}: column set changed between phases"));
            }
        }
        ck.check(calls.iter().all(|x| x.1.len() <= 9 && x.2 <= 30), || format!("C={c}: call exceeded budgets"));
    }

    for (c, b, want) in fx.gate_table {
        let table = random_table(&mut rng, 4 * c, c, 4, 2);
        let (plan, _) = stratified_folds(&table.labels, 2, seed, stream::TFM_FOLDS);
        let learner = RecordingLearner::default();
        let outcome = make_tfm_predictors(&table, b, &learner, &plan, &TfmConfig::default(), seed).expect("tfm");
        let got = outcome.results.len();
        ck.check(got == want, || format!("gate C={c}, B={b}: {got} learner predictors, expected {want}"));
        ck.check(outcome.gate.is_some() == (want == 0), || format!("gate C={c}, B={b}: notice mismatch"));
    }

    for c in fx.ecoc_classes {
        let per_round = subtasks_per_round(c);
        for b in [per_round, 2 * per_round + 1] {
            let EcocDecision::Plan(plan) = ecoc_plan(c, b, seed) else {
                ck.check(false, || format!("ECOC C={c}, B={b}: refused"));
                continue;
            };
            ck.check(plan.rounds.len() == b / per_round, || format!("ECOC C={c}, B={b}: round count"));
            let truth: Vec<usize> = (0..3 * c).map(|i| (i * 7 + 3) % c).collect();
            for (r, round) in plan.rounds.iter().enumerate() {
                let outputs: Vec<DMatrix<f64>> = round
                    .iter()
                    .map(|task| {
                        let meta: Vec<usize> = truth.iter().map(|&y| task.output_of(y)).collect();
                        one_hot(&meta, task.num_outputs())
                    })
                    .collect();
                let decoded = decode_round(round, &outputs, c);
                let acc = accuracy(&decoded, &truth);
                ck.check(acc == 1.0, || format!("ECOC C={c}, round {r}: perfect-oracle decode accuracy {acc}"));
            }
        }
    }

    ck.finish("subsample-ecoc", start)
}

/// Logistic-regression gradient and kNN against brute force.
pub fn learner_suite(_fx: &Fixtures, seed: u64) -> SuiteReport {
    let start = std::time::Instant::now();
    let mut ck = Checker::new();
    let mut rng = rng_for(seed, &[5]);

    for t in 0..20 {
        let n = rng.gen_range(3..=30);
        let d = rng.gen_range(1..=6);
        let k = rng.gen_range(2..=5);
        let x = random_matrix(&mut rng, n, d) * 2.0;
        let targets: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let obj = SoftmaxObjective::new(&x, targets, k, 1e-2);
        let w = random_matrix(&mut rng, d + 1, k);
        let fd = oracle::central_difference(|w| obj.loss(w), &w, 1e-5);
        let diff = max_abs_diff(&obj.gradient(&w), &fd);
        ck.check(diff <= 1e-5, || format!("logreg gradient instance {t}: max diff {diff:e}"));
    }

    for t in 0..50 {
        let n = rng.gen_range(1..=60);
        let d = rng.gen_range(1..=5);
        let c = rng.gen_range(2..=4);
        let mut ctx = random_matrix(&mut rng, n, d);
        if rng.gen_bool(0.3) {
            ctx.column_mut(0).fill(2.5);
        }
        if rng.gen_bool(0.5) {
            ctx = ctx.map(|v| (v * 3.0).round());
        }
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
        let m = rng.gen_range(1..=20);
        let mut q = random_matrix(&mut rng, m, d);
        for i in 0..m {
            if rng.gen_bool(0.3) {
                q.set_row(i, &ctx.row(rng.gen_range(0..n)));
            }
        }
        let k = rng.gen_range(1..=15);
        let task = LearnerTask { id: "knn", seed: 0, num_classes: c, context: &ctx, labels: &labels, queries: &q, columns: &[] };
        let got = KNearest { k }.fit_predict(&task).expect("knn");
        let want = oracle::knn_brute(&ctx, &labels, &q, k, c);
        ck.check(got == want, || format!("kNN fixture {t}: differs from all-pairs oracle by {:e}", max_abs_diff(&got, &want)));
    }

    let mut ctx = DMatrix::zeros(40, 2);
    let mut labels = Vec::new();
    for i in 0..40 {
        let c = i % 2;
        ctx[(i, 0)] = if c == 0 { -3.0 } else { 3.0 };
        ctx[(i, 0)] += rng.gen_range(-0.5..0.5);
        ctx[(i, 1)] = rng.gen_range(-0.5..0.5);
        labels.push(c);
    }
    let truth: Vec<usize> = (0..50).map(|i| i % 2).collect();
    let q = DMatrix::from_fn(50, 2, |i, j| {
        let centre = match (j, truth[i]) {
            (0, 0) => -3.0,
            (0, _) => 3.0,
            _ => 0.0,
        };
        centre + rng.gen_range(-0.5..0.5)
    });
    let task = LearnerTask { id: "logreg", seed: 0, num_classes: 2, context: &ctx, labels: &labels, queries: &q, columns: &[] };
    let acc = accuracy(&LogisticRegression::default().fit_predict(&task).expect("logreg"), &truth);
    ck.check(acc == 1.0, || format!("logreg separable blobs: accuracy {acc}"));

    ck.finish("learners", start)
}

/// Every suite with the given fixtures.
pub fn run_suites(fx: &Fixtures, seed: u64) -> Vec<SuiteReport> {
    vec![
        encoder_suite(fx, seed),
        ridge_suite(fx, seed),
        selection_suite(fx, seed),
        subsample_suite(fx, seed),
        learner_suite(fx, seed),
    ]
}

/// Plain-text summary table, one row per suite plus its failures.
pub fn format_table(reports: &[SuiteReport]) -> String {
    let mut out = format!("{:<16} {:>7} {:>8} {:>9}  result\n", "suite", "checks", "failed", "seconds");
    for r in reports {
        let verdict = if r.passed() { "pass" } else { "FAIL" };
        writeln!(out, "{:<16} {:>7} {:>8} {:>9.2}  {verdict}", r.name, r.checks, r.failures.len(), r.seconds)
            .expect("write to string");
        for f in &r.failures {
            writeln!(out, "    - {f}").expect("write to string");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corrupted_fixture_fails_its_suite() {
        let fx = Fixtures { k3_rwpe: [0.0, 0.5, 0.3], ..Default::default() };
        let r = encoder_suite(&fx, 0);
        assert!(!r.passed());
        assert!(r.failures.iter().all(|f| f.starts_with("K3")), "{:?}", r.failures);

        let fx = Fixtures { gate_table: [(40, 4, 1), (40, 5, 1), (40, 10, 2)], ..Default::default() };
        let r = subsample_suite(&fx, 0);
        assert!(r.failures.iter().any(|f| f.starts_with("gate C=40, B=4")), "{:?}", r.failures);
    }

    #[test]
    fn table_lists_failures() {
        let r = SuiteReport { name: "x", checks: 2, failures: vec!["boom".into()], seconds: 0.0 };
        let t = format_table(&[r]);
        assert!(t.contains("FAIL") && t.contains("- boom"));
    }
}
