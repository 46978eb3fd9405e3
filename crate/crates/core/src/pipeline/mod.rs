//! End-to-end orchestration: config, per-seed runs, B sweeps, metrics and
//! synthetic datasets.

mod config;
mod report;
mod synth;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::{Ablation, BackendConfig, EnsembleMode, HoldoutMode, RunConfig, ENDPOINT_ENV};
pub use report::{summarize, MetricsReport, SeedNotice, SeedResult, SkippedPredictor, StageTiming};
pub use synth::{generate_synthetic, SynthParams};

use crate::encoders::{build_encodings, EncoderConfig, EncoderError, EncodingBlock};
use crate::ensemble::{accuracy, combine, combine_holdout, greedy_select, EnsembleWeights, PredictorPool, SelectionError};
use crate::folds::{single_holdout, stratified_folds, FoldPlan};
use crate::graph::{load_dataset, save_dataset, Dataset, FeatureFormat, Graph, GraphError};
use crate::linear::{make_linear_predictors, LinearError};
use crate::predictor::{Notice, Predictor};
use crate::seeding::{derive_seed, stream};
use crate::tabular::{
    make_tfm_predictors, ExternalLearner, KNearest, LearnerError, LogisticRegression, NodeTable, PredictorFailure,
    TabularError, TabularLearner,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Tabular(#[from] TabularError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Learner(#[from] PredictorFailure),
    #[error("could not start learner backend: {0}")]
    Backend(LearnerError),
    #[error("seed {seed}: {reason}")]
    Split { seed: u64, reason: String },
    #[error("seed {seed}: every predictor failed")]
    AllPredictorsFailed { seed: u64 },
    #[error("{0} self-test suites failed")]
    SelftestFailed(usize),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl PipelineError {
    /// Whether the failure lies in the configuration rather than the run.
    pub fn is_config_error(&self) -> bool {
        matches!(self, PipelineError::Config(_))
    }
}

/// Encodings shared across seeds and runs, keyed by a content hash of the
/// graph and the effective encoder settings.
#[derive(Debug, Default)]
pub struct EncodingCache {
    entries: HashMap<[u8; 32], Arc<Vec<EncodingBlock>>>,
    hits: usize,
}

impl EncodingCache {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Lookups answered without recomputation.
    pub fn hits(&self) -> usize {
        self.hits
    }

    pub fn key(graph: &Graph, cfg: &EncoderConfig) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(cfg).expect("encoder config serializes"));
        h.update((graph.num_nodes() as u64).to_le_bytes());
        for &(u, v) in graph.edges() {
            h.update((u as u64).to_le_bytes());
            h.update((v as u64).to_le_bytes());
        }
        let x = graph.features();
        h.update((x.ncols() as u64).to_le_bytes());
        for v in x.iter() {
            h.update(v.to_bits().to_le_bytes());
        }
        h.finalize().into()
    }

    pub fn get_or_build(&mut self, graph: &Graph, cfg: &EncoderConfig) -> Result<Arc<Vec<EncodingBlock>>, EncoderError> {
        let key = Self::key(graph, cfg);
        if let Some(blocks) = self.entries.get(&key) {
            self.hits += 1;
            return Ok(Arc::clone(blocks));
        }
        let blocks = Arc::new(build_encodings(graph, cfg)?);
        self.entries.insert(key, Arc::clone(&blocks));
        Ok(blocks)
    }
}

/// Builds the learner backend named by the config.
pub fn make_learner(backend: &BackendConfig) -> Result<Box<dyn TabularLearner>, PipelineError> {
    Ok(match backend {
        BackendConfig::NativeLogreg => Box::new(LogisticRegression::default()),
        BackendConfig::NativeKnn => Box::new(KNearest::default()),
        BackendConfig::External { .. } => {
            let (ep, timeout) = backend.resolved_endpoint()?.expect("external backend");
            Box::new(ExternalLearner::connect(&ep, timeout).map_err(PipelineError::Backend)?)
        }
    })
}

/// Node table for one seed: `L` is train (plus val when configured) and `Q`
/// is test.
pub fn build_table(
    dataset: &Dataset,
    blocks: &[EncodingBlock],
    seed: u64,
    include_val: bool,
) -> Result<NodeTable, PipelineError> {
    let split = dataset.split(seed).ok_or_else(|| PipelineError::Split {
        seed,
        reason: "dataset has no split for this seed".into(),
    })?;
    let mut labeled = split.train.clone();
    if include_val {
        labeled.extend_from_slice(&split.val);
    }
    let g = &dataset.graph;
    let labels = labeled
        .iter()
        .map(|&i| {
            g.labels()[i].ok_or_else(|| PipelineError::Split { seed, reason: format!("labeled node {i} has no label") })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(NodeTable::build(blocks, labeled, labels, split.test.clone(), g.num_classes())?)
}

#[derive(Default)]
struct Timings(Vec<(String, f64)>);

impl Timings {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        match self.0.iter_mut().find(|(s, _)| s == stage) {
            Some((_, total)) => *total += secs,
            None => self.0.push((stage.to_string(), secs)),
        }
        out
    }

    fn into_report(self) -> Vec<StageTiming> {
        self.0.into_iter().map(|(stage, seconds)| StageTiming { stage, seconds }).collect()
    }
}

struct SeedOutcome {
    result: SeedResult,
    notices: Vec<Notice>,
    skipped: Vec<SkippedPredictor>,
}

/// Runs every configured seed, writing the report when `output` is set.
pub fn run(cfg: &RunConfig) -> Result<MetricsReport, PipelineError> {
    run_cached(cfg, &mut EncodingCache::default())
}

/// As [`run`], reusing and filling `cache`.
pub fn run_cached(cfg: &RunConfig, cache: &mut EncodingCache) -> Result<MetricsReport, PipelineError> {
    cfg.validate()?;
    let dataset = load_dataset(&cfg.dataset)?;
    let learner = make_learner(&cfg.backend)?;
    let enc_cfg = cfg.effective_encoders();
    let mut timings = Timings::default();
    let (mut results, mut notices, mut skipped) = (Vec::new(), Vec::new(), Vec::new());
    for &seed in &cfg.seeds {
        let blocks = timings.time("encode", || cache.get_or_build(&dataset.graph, &enc_cfg))?;
        let out = run_seed(cfg, &dataset, &blocks, learner.as_ref(), seed, &mut timings)?;
        info!(
            "seed {seed}: test accuracy {:.4} from {} predictors",
            out.result.test_accuracy,
            out.result.predictors.len()
        );
        results.push(out.result);
        notices.extend(out.notices.into_iter().map(|notice| SeedNotice { seed, notice }));
        skipped.extend(out.skipped);
    }
    let report = MetricsReport::new(
        cfg.dataset.display().to_string(),
        cfg.num_tables,
        results,
        notices,
        skipped,
        timings.into_report(),
    );
    if let Some(path) = &cfg.output {
        report.write(path)?;
    }
    Ok(report)
}

fn fold_plans(cfg: &RunConfig, labels: &[usize], seed: u64) -> (FoldPlan, FoldPlan, Vec<Notice>) {
    match cfg.holdout {
        HoldoutMode::Kfold => {
            let (linear, mut notices) = stratified_folds(labels, cfg.linear.folds, seed, stream::LINEAR_FOLDS);
            let (tfm, more) = stratified_folds(labels, cfg.tfm.folds, seed, stream::TFM_FOLDS);
            notices.extend(more);
            (linear, tfm, notices)
        }
        HoldoutMode::Single { fraction } => {
            let plan = single_holdout(labels, fraction, seed, stream::HOLDOUT);
            (plan.clone(), plan, Vec::new())
        }
    }
}

fn run_seed(
    cfg: &RunConfig,
    dataset: &Dataset,
    blocks: &[EncodingBlock],
    learner: &dyn TabularLearner,
    seed: u64,
    timings: &mut Timings,
) -> Result<SeedOutcome, PipelineError> {
    let table = build_table(dataset, blocks, seed, cfg.include_val_in_context)?;
    let (linear_plan, tfm_plan, mut notices) = fold_plans(cfg, &table.labels, seed);
    let holdout_rows = linear_plan.holdout_rows();
    debug_assert_eq!(holdout_rows, tfm_plan.holdout_rows());
    if holdout_rows.is_empty() {
        return Err(PipelineError::Split { seed, reason: "no hold-out rows for ensemble selection".into() });
    }

    let mut pool: Vec<Predictor> = Vec::new();
    if !cfg.ablation.no_linear_gnn {
        pool.extend(timings.time("linear", || make_linear_predictors(blocks, &table, &linear_plan, &cfg.linear))?);
    }
    let mut skipped = Vec::new();
    if !cfg.ablation.no_tfm && cfg.num_tables > 0 {
        let outcome =
            timings.time("tfm", || make_tfm_predictors(&table, cfg.num_tables, learner, &tfm_plan, &cfg.tfm, seed))?;
        notices.extend(outcome.gate);
        for r in outcome.results {
            match r {
                Ok(p) => pool.push(p),
                Err(f) if matches!(cfg.backend, BackendConfig::External { .. }) => {
                    warn!("seed {seed}: skipping {}", f);
                    skipped.push(SkippedPredictor { seed, id: f.id, error: f.source.to_string() });
                }
                Err(f) => return Err(f.into()),
            }
        }
    }
    if pool.is_empty() {
        return Err(PipelineError::AllPredictorsFailed { seed });
    }

    let holdout_labels: Vec<usize> = holdout_rows.iter().map(|&i| table.labels[i]).collect();
    let pool = PredictorPool::new(pool, holdout_labels, table.num_classes)?;
    let weights = timings.time("select", || match cfg.ensemble_mode {
        EnsembleMode::Selected => greedy_select(&pool, cfg.max_iters, derive_seed(seed, &[stream::SELECTION])),
        EnsembleMode::Uniform => Ok(EnsembleWeights::uniform(pool.len())),
    })?;
    let holdout_combined = combine_holdout(&weights, &pool)?;
    let probs = combine(&weights, &pool)?;
    let g = &dataset.graph;
    let test_labels = table
        .query
        .iter()
        .map(|&i| g.labels()[i].ok_or_else(|| PipelineError::Split { seed, reason: format!("test node {i} has no label") }))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(SeedOutcome {
        result: SeedResult {
            seed,
            test_accuracy: accuracy(&probs, &test_labels),
            holdout_accuracy: accuracy(&holdout_combined, pool.holdout_labels()),
            num_labeled: table.labeled.len(),
            num_query: table.query.len(),
            predictors: pool.predictors().iter().map(|p| p.id.clone()).collect(),
            weights: weights.weights,
        },
        notices,
        skipped,
    })
}

/// One run per table count, sharing encodings across runs. Reports are not
/// written to the configured output; callers decide where they go.
pub fn sweep_b(cfg: &RunConfig, b_values: &[usize]) -> Result<Vec<MetricsReport>, PipelineError> {
    if b_values.is_empty() {
        return Err(PipelineError::Config("sweep needs at least one table count".into()));
    }
    let mut cache = EncodingCache::default();
    b_values
        .iter()
        .map(|&b| {
            let run_cfg = RunConfig { num_tables: b, output: None, ..cfg.clone() };
            run_cached(&run_cfg, &mut cache)
        })
        .collect()
}

/// Writes the node table of the first configured seed: `table.bin`
/// (row-major little-endian `f32`, N rows), `columns.json`, and
/// `rows.json` with the labeled ids, their labels and the query ids.
pub fn encode_table(cfg: &RunConfig, out: &Path) -> Result<NodeTable, PipelineError> {
    cfg.validate()?;
    let dataset = load_dataset(&cfg.dataset)?;
    let blocks = build_encodings(&dataset.graph, &cfg.effective_encoders())?;
    let table = build_table(&dataset, &blocks, cfg.seeds[0], cfg.include_val_in_context)?;
    let io = |path: PathBuf| move |source| PipelineError::Io { path, source };
    std::fs::create_dir_all(out).map_err(io(out.to_path_buf()))?;
    crate::graph::write_matrix_bin(&out.join("table.bin"), &table.z)?;
    let columns = serde_json::to_string_pretty(&table.columns).expect("columns serialize");
    std::fs::write(out.join("columns.json"), columns).map_err(io(out.join("columns.json")))?;
    let rows = serde_json::json!({
        "seed": cfg.seeds[0],
        "num_classes": table.num_classes,
        "labeled": table.labeled,
        "labels": table.labels,
        "query": table.query,
    });
    std::fs::write(out.join("rows.json"), rows.to_string()).map_err(io(out.join("rows.json")))?;
    Ok(table)
}

/// Generates a synthetic dataset into `dir`.
pub fn write_synthetic(params: &SynthParams, dir: &Path) -> Result<Dataset, PipelineError> {
    let data = generate_synthetic(params)?;
    save_dataset(dir, &data, FeatureFormat::Binary)?;
    Ok(data)
}
