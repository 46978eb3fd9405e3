use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::encoders::{default_pca_dim, EncoderConfig};
use crate::linear::LinearConfig;
use crate::tabular::{Endpoint, TfmConfig, DEFAULT_TIMEOUT};

/// Environment variable that replaces the configured external endpoint.
pub const ENDPOINT_ENV: &str = "TABGFM_ENDPOINT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBackend", into = "RawBackend")]
pub enum BackendConfig {
    NativeLogreg,
    NativeKnn,
    External { endpoint: Option<String>, timeout_secs: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum BackendKind {
    NativeLogreg,
    NativeKnn,
    External,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBackend {
    kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timeout_secs: Option<f64>,
}

impl TryFrom<RawBackend> for BackendConfig {
    type Error = String;

    fn try_from(raw: RawBackend) -> Result<Self, String> {
        match raw.kind {
            BackendKind::External => Ok(Self::External { endpoint: raw.endpoint, timeout_secs: raw.timeout_secs }),
            _ if raw.endpoint.is_some() || raw.timeout_secs.is_some() => {
                Err("endpoint and timeout_secs apply only to the external backend".into())
            }
            BackendKind::NativeLogreg => Ok(Self::NativeLogreg),
            BackendKind::NativeKnn => Ok(Self::NativeKnn),
        }
    }
}

impl From<BackendConfig> for RawBackend {
    fn from(b: BackendConfig) -> Self {
        match b {
            BackendConfig::NativeLogreg => Self { kind: BackendKind::NativeLogreg, endpoint: None, timeout_secs: None },
            BackendConfig::NativeKnn => Self { kind: BackendKind::NativeKnn, endpoint: None, timeout_secs: None },
            BackendConfig::External { endpoint, timeout_secs } => {
                Self { kind: BackendKind::External, endpoint, timeout_secs }
            }
        }
    }
}

impl BackendConfig {
    /// Endpoint to use, with the environment override applied.
    pub fn resolved_endpoint(&self) -> Result<Option<(Endpoint, Duration)>, PipelineError> {
        let BackendConfig::External { endpoint, timeout_secs } = self else {
            return Ok(None);
        };
        let raw = std::env::var(ENDPOINT_ENV).ok().filter(|s| !s.trim().is_empty()).or_else(|| endpoint.clone());
        let raw = raw.ok_or_else(|| {
            PipelineError::Config(format!("external backend needs an endpoint (config or {ENDPOINT_ENV})"))
        })?;
        let ep = raw.parse::<Endpoint>().map_err(|e| PipelineError::Config(format!("endpoint {raw:?}: {e}")))?;
        let timeout = match timeout_secs {
            None => DEFAULT_TIMEOUT,
            Some(t) if t.is_finite() && *t > 0.0 => Duration::from_secs_f64(*t),
            Some(t) => return Err(PipelineError::Config(format!("timeout_secs must be positive, got {t}"))),
        };
        Ok(Some((ep, timeout)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleMode {
    #[default]
    Selected,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Ablation {
    pub no_linear_gnn: bool,
    pub no_tfm: bool,
}

/// How held-out predictions for ensemble selection are produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HoldoutMode {
    /// Cross-fitting over all of `L`: `linear.folds` folds for linear
    /// predictors, `tfm.folds` for learner predictors.
    #[default]
    Kfold,
    /// One stratified hold-out subset shared by every predictor.
    Single { fraction: f64 },
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}

fn default_tables() -> usize {
    10
}

fn default_backend() -> BackendConfig {
    BackendConfig::NativeLogreg
}

fn default_max_iters() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_tables")]
    pub num_tables: usize,
    #[serde(default = "default_backend")]
    pub backend: BackendConfig,
    #[serde(default)]
    pub encoders: EncoderConfig,
    #[serde(default)]
    pub include_val_in_context: bool,
    #[serde(default)]
    pub ensemble_mode: EnsembleMode,
    #[serde(default)]
    pub ablation: Ablation,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub linear: LinearConfig,
    #[serde(default)]
    pub tfm: TfmConfig,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub holdout: HoldoutMode,
}

impl RunConfig {
    /// Config with every default and the given dataset directory.
    pub fn new(dataset: impl Into<PathBuf>) -> Self {
        serde_json::from_value(serde_json::json!({ "dataset": dataset.into() })).expect("defaults deserialize")
    }

    /// Parses a JSON config. Relative paths inside it are resolved against
    /// the directory holding the file.
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.dataset);
        if let Some(out) = cfg.output.as_mut() {
            resolve(out);
        }
        if let Some(ext) = cfg.encoders.external_embedding_path.as_mut() {
            resolve(ext);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.seeds.is_empty() {
            return bad("seeds must be non-empty".into());
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if self.max_iters == 0 {
            return bad("max_iters must be >= 1".into());
        }
        if self.linear.folds < 2 || self.tfm.folds < 2 {
            return bad("fold counts must be >= 2".into());
        }
        if !(self.linear.epsilon > 0.0) {
            return bad("linear.epsilon must be positive".into());
        }
        if let HoldoutMode::Single { fraction } = self.holdout {
            if !(fraction > 0.0 && fraction < 1.0) {
                return bad(format!("holdout fraction must be in (0, 1), got {fraction}"));
            }
        }
        if self.ablation.no_linear_gnn && (self.ablation.no_tfm || self.num_tables == 0) {
            return bad("ablation leaves no predictors".into());
        }
        self.encoders.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.tfm.budgets.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }

    /// Encoder settings with the per-dataset PCA default filled in.
    pub fn effective_encoders(&self) -> EncoderConfig {
        let mut enc = self.encoders.clone();
        if enc.pca_dim.is_none() {
            let name = self.dataset.file_name().and_then(|n| n.to_str()).unwrap_or("");
            enc.pca_dim = default_pca_dim(name);
        }
        enc
    }
}
