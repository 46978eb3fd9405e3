//! Node-level encoders: feature blocks (raw and smoothed) and structure
//! blocks (random-walk PE, Laplacian PE, external embeddings).

mod laplacian;
mod pca;
mod rwpe;
mod smoothing;

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{normalized_adjacency, read_dense_matrix, sym_normalized_laplacian, Graph, GraphError};

pub use laplacian::{laplacian_pe, laplacian_pe_with, lanczos_smallest, EigenSolver, LanczosOptions, DENSE_EIGEN_LIMIT};
pub use pca::pca_reduce;
pub use rwpe::random_walk_pe;
pub use smoothing::smooth_features;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },
    #[error("invalid encoder configuration: {0}")]
    InvalidConfig(String),
    #[error("eigensolver did not converge after {restarts} restarts (residual {residual:e})")]
    NonConvergence { residual: f64, restarts: usize },
    #[error("PCA target dimension {requested} exceeds min(N, F) = {max}")]
    PcaDimension { requested: usize, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingKind {
    Feature,
    Structure,
}

/// What produced a block, with the parameters used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "encoder", rename_all = "snake_case")]
pub enum BlockSource {
    Raw { pca_dim: Option<usize> },
    Smoothed { order: usize },
    RandomWalk { steps: usize },
    Laplacian { k: usize },
    External { path: PathBuf },
}

impl BlockSource {
    pub fn kind(&self) -> EncodingKind {
        match self {
            Self::Raw { .. } | Self::Smoothed { .. } => EncodingKind::Feature,
            _ => EncodingKind::Structure,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Raw { .. } => "raw".into(),
            Self::Smoothed { order } => format!("smooth_{order}"),
            Self::RandomWalk { .. } => "rwpe".into(),
            Self::Laplacian { .. } => "lappe".into(),
            Self::External { .. } => "external".into(),
        }
    }
}

/// A named `N x D` column group.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingBlock {
    pub name: String,
    pub kind: EncodingKind,
    pub matrix: DMatrix<f64>,
    pub source: BlockSource,
}

impl EncodingBlock {
    pub fn new(source: BlockSource, matrix: DMatrix<f64>) -> Result<Self, EncoderError> {
        if matrix.ncols() == 0 {
            return Err(EncoderError::InvalidConfig(format!("block {} has no columns", source.name())));
        }
        if let Some(p) = matrix.iter().position(|x| !x.is_finite()) {
            let n = matrix.nrows();
            return Err(GraphError::NonFinite { row: p % n, col: p / n }.into());
        }
        Ok(Self { name: source.name(), kind: source.kind(), matrix, source })
    }

    pub fn width(&self) -> usize {
        self.matrix.ncols()
    }
}

fn default_orders() -> Vec<usize> {
    vec![1, 2, 3, 4]
}

fn default_twenty() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    #[serde(default = "default_orders")]
    pub smoothing_orders: Vec<usize>,
    #[serde(default = "default_twenty")]
    pub rwpe_steps: usize,
    #[serde(default = "default_twenty")]
    pub lap_k: usize,
    #[serde(default)]
    pub pca_dim: Option<usize>,
    #[serde(default)]
    pub external_embedding_path: Option<PathBuf>,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            smoothing_orders: default_orders(),
            rwpe_steps: 20,
            lap_k: 20,
            pca_dim: None,
            external_embedding_path: None,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), EncoderError> {
        let bad = |m: &str| Err(EncoderError::InvalidConfig(m.into()));
        if self.smoothing_orders.is_empty() || self.smoothing_orders.contains(&0) {
            return bad("smoothing_orders must be non-empty with every order >= 1");
        }
        if self.rwpe_steps == 0 || self.lap_k == 0 {
            return bad("rwpe_steps and lap_k must be >= 1");
        }
        if self.pca_dim == Some(0) {
            return bad("pca_dim must be >= 1");
        }
        Ok(())
    }
}

/// PCA target dimensions used for the high-dimensional benchmark graphs.
pub fn default_pca_dim(dataset: &str) -> Option<usize> {
    match dataset {
        "full-cora" | "full_cora" => Some(2048),
        "co-cs" | "co_cs" => Some(2048),
        "co-physics" | "co_physics" => Some(1024),
        _ => None,
    }
}

/// Loads precomputed per-node embeddings as a structure block named `external`.
pub fn load_external_embeddings(path: &Path, n: usize) -> Result<EncodingBlock, EncoderError> {
    let m = read_dense_matrix(path, n, None)?;
    EncodingBlock::new(BlockSource::External { path: path.to_path_buf() }, m)
}

/// Builds every configured block, in table column order: raw features,
/// smoothed features by ascending order, random-walk PE, Laplacian PE,
/// external embeddings.
pub fn build_encodings(g: &Graph, cfg: &EncoderConfig) -> Result<Vec<EncodingBlock>, EncoderError> {
    cfg.validate()?;
    let raw = match cfg.pca_dim {
        Some(d) => pca_reduce(g.features(), d)?,
        None => g.features().clone(),
    };
    let a_hat = normalized_adjacency(g);

    let (features, structure) = rayon::join(
        || -> Result<Vec<EncodingBlock>, EncoderError> {
            let mut orders = cfg.smoothing_orders.clone();
            orders.sort_unstable();
            orders.dedup();
            let mut blocks = vec![EncodingBlock::new(BlockSource::Raw { pca_dim: cfg.pca_dim }, raw.clone())?];
            let mut current = raw.clone();
            let mut reached = 0;
            for order in orders {
                current = smooth_features(&a_hat, &current, order - reached)?;
                reached = order;
                blocks.push(EncodingBlock::new(BlockSource::Smoothed { order }, current.clone())?);
            }
            Ok(blocks)
        },
        || -> Result<Vec<EncodingBlock>, EncoderError> {
            let (rw, lap) = rayon::join(
                || random_walk_pe(&a_hat, cfg.rwpe_steps),
                || laplacian_pe(&sym_normalized_laplacian(g), cfg.lap_k),
            );
            let mut blocks = vec![
                EncodingBlock::new(BlockSource::RandomWalk { steps: cfg.rwpe_steps }, rw?)?,
                EncodingBlock::new(BlockSource::Laplacian { k: cfg.lap_k }, lap?)?,
            ];
            if let Some(path) = &cfg.external_embedding_path {
                blocks.push(load_external_embeddings(path, g.num_nodes())?);
            }
            Ok(blocks)
        },
    );
    let mut blocks = features?;
    blocks.extend(structure?);
    Ok(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_graph() -> Graph {
        let n = 12;
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).chain([(0, 6), (3, 9)]).collect();
        let x = DMatrix::from_fn(n, 5, |i, j| ((i * 7 + j * 3) % 11) as f64);
        Graph::new(n, edges, x, (0..n).map(|i| Some(i % 3)).collect(), 3).unwrap()
    }

    fn write_tsv(path: &Path, rows: usize, cols: usize) {
        let text: String = (0..rows)
            .map(|i| (0..cols).map(|j| format!("{}", (i + j) as f64 * 0.5)).collect::<Vec<_>>().join("\t") + "\n")
            .collect();
        std::fs::write(path, text).unwrap();
    }

    #[test]
    fn default_blocks_without_external() {
        let blocks = build_encodings(&small_graph(), &EncoderConfig::default()).unwrap();
        let names: Vec<_> = blocks.iter().map(|b| b.name.as_str()).collect();
        assert_eq!(names, ["raw", "smooth_1", "smooth_2", "smooth_3", "smooth_4", "rwpe", "lappe"]);
        assert_eq!(blocks[5].width(), 20);
        assert_eq!(blocks[6].width(), 20);
    }

    #[test]
    fn external_block_appended() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("gpse.tsv");
        write_tsv(&path, 12, 32);
        let cfg = EncoderConfig { external_embedding_path: Some(path), ..Default::default() };
        let blocks = build_encodings(&small_graph(), &cfg).unwrap();
        assert_eq!(blocks.len(), 8);
        assert_eq!(blocks.iter().filter(|b| b.kind == EncodingKind::Feature).count(), 5);
        assert_eq!(blocks.iter().filter(|b| b.kind == EncodingKind::Structure).count(), 3);
        assert_eq!(blocks[7].matrix.shape(), (12, 32));
    }

    #[test]
    fn external_row_mismatch() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("gpse.tsv");
        write_tsv(&path, 11, 32);
        assert!(load_external_embeddings(&path, 12).is_err());
        let bin = tmp.path().join("gpse.bin");
        std::fs::write(&bin, vec![0u8; 11 * 32 * 4]).unwrap();
        assert!(load_external_embeddings(&bin, 12).is_err());
        std::fs::write(&bin, vec![0u8; 12 * 32 * 4]).unwrap();
        assert_eq!(load_external_embeddings(&bin, 12).unwrap().width(), 32);
    }

    #[test]
    fn external_non_finite() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("gpse.tsv");
        std::fs::write(&path, "1.0\tNaN\n").unwrap();
        assert!(load_external_embeddings(&path, 1).is_err());
    }

    #[test]
    fn pca_before_smoothing() {
        let cfg = EncoderConfig { pca_dim: Some(3), ..Default::default() };
        let blocks = build_encodings(&small_graph(), &cfg).unwrap();
        for b in &blocks[..5] {
            assert_eq!(b.width(), 3);
        }
    }

    #[test]
    fn deterministic() {
        let g = small_graph();
        let a = build_encodings(&g, &EncoderConfig::default()).unwrap();
        let b = build_encodings(&g, &EncoderConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation_and_unknown_keys() {
        assert!(EncoderConfig { smoothing_orders: vec![], ..Default::default() }.validate().is_err());
        assert!(EncoderConfig { pca_dim: Some(0), ..Default::default() }.validate().is_err());
        let cfg: EncoderConfig = serde_json::from_str(r#"{"lap_k": 8}"#).unwrap();
        assert_eq!(cfg.rwpe_steps, 20);
        assert!(serde_json::from_str::<EncoderConfig>(r#"{"lapk": 8}"#).is_err());
    }

    #[test]
    fn benchmark_pca_dims() {
        assert_eq!(default_pca_dim("full-cora"), Some(2048));
        assert_eq!(default_pca_dim("co-cs"), Some(2048));
        assert_eq!(default_pca_dim("co-physics"), Some(1024));
        assert_eq!(default_pca_dim("cora"), None);
    }
}
