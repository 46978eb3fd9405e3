//! Graph representation, sparse operators and the on-disk dataset container.

mod dataset;
mod sparse;

use std::collections::BTreeSet;
use std::path::PathBuf;

use nalgebra::DMatrix;
use thiserror::Error;

pub(crate) use dataset::write_matrix_bin;
pub use dataset::{load_dataset, read_dense_matrix, save_dataset, Dataset, FeatureFormat, Manifest};
pub use sparse::CsrMatrix;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("node index {node} out of range for {num_nodes} nodes")]
    NodeOutOfRange { node: usize, num_nodes: usize },
    #[error("node {node} has class {class}, but the dataset declares {num_classes} classes")]
    UnknownClass { node: usize, class: i64, num_classes: usize },
    #[error("class {0} never appears among labeled nodes")]
    MissingClass(usize),
    #[error("non-finite feature at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },
    #[error("invalid CSR layout: {0}")]
    InvalidCsr(String),
    #[error("split {seed}: {reason}")]
    InvalidSplit { seed: u64, reason: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

/// A simple undirected graph with dense node features and partial labels.
///
/// Edges are stored once each as `(u, v)` with `u < v`, sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    features: DMatrix<f64>,
    labels: Vec<Option<usize>>,
    num_classes: usize,
}

impl Graph {
    /// Validates and canonicalizes. `labels` uses `None` for unlabeled nodes.
    pub fn new(
        num_nodes: usize,
        edges: Vec<(usize, usize)>,
        features: DMatrix<f64>,
        labels: Vec<Option<usize>>,
        num_classes: usize,
    ) -> Result<Self, GraphError> {
        let mut seen = BTreeSet::new();
        for &(u, v) in &edges {
            for node in [u, v] {
                if node >= num_nodes {
                    return Err(GraphError::NodeOutOfRange { node, num_nodes });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return Err(GraphError::DuplicateEdge(key.0, key.1));
            }
        }
        if features.nrows() != num_nodes {
            return Err(GraphError::DimensionMismatch {
                what: "feature rows",
                expected: num_nodes,
                found: features.nrows(),
            });
        }
        // column-major scan; report the first offending entry in row order
        if let Some(p) = features.iter().position(|x| !x.is_finite()) {
            return Err(GraphError::NonFinite { row: p % num_nodes, col: p / num_nodes });
        }
        if labels.len() != num_nodes {
            return Err(GraphError::DimensionMismatch {
                what: "label count",
                expected: num_nodes,
                found: labels.len(),
            });
        }
        let mut present = vec![false; num_classes];
        for (node, label) in labels.iter().enumerate() {
            if let Some(c) = *label {
                if c >= num_classes {
                    return Err(GraphError::UnknownClass { node, class: c as i64, num_classes });
                }
                present[c] = true;
            }
        }
        if let Some(c) = present.iter().position(|p| !p) {
            return Err(GraphError::MissingClass(c));
        }
        Ok(Self {
            num_nodes,
            edges: seen.into_iter().collect(),
            features,
            labels,
            num_classes,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_nodes];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    /// Sorted neighbor lists, both edge directions expanded.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }
}

/// A labeled/query partition for one seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    pub seed: u64,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitSpec {
    pub fn new(
        seed: u64,
        train: Vec<usize>,
        val: Vec<usize>,
        test: Vec<usize>,
        num_nodes: usize,
    ) -> Result<Self, GraphError> {
        let fail = |reason: String| GraphError::InvalidSplit { seed, reason };
        if train.is_empty() {
            return Err(fail("train set is empty".into()));
        }
        let mut owner = vec![None; num_nodes];
        for (name, set) in [("train", &train), ("val", &val), ("test", &test)] {
            for &i in set.iter() {
                if i >= num_nodes {
                    return Err(fail(format!("{name} index {i} out of range")));
                }
                if let Some(prev) = owner[i].replace(name) {
                    return Err(fail(format!("node {i} appears in both {prev} and {name}")));
                }
            }
        }
        Ok(Self { seed, train, val, test })
    }
}

/// Random-walk normalized adjacency `D^-1 A`. Isolated nodes get an all-zero row.
pub fn normalized_adjacency(g: &Graph) -> CsrMatrix {
    let deg = g.degrees();
    let rows = g
        .neighbors()
        .into_iter()
        .enumerate()
        .map(|(i, nbrs)| {
            let w = 1.0 / deg[i] as f64;
            nbrs.into_iter().map(|j| (j, w)).collect()
        })
        .collect();
    CsrMatrix::from_sorted_rows(g.num_nodes(), rows)
}

/// Symmetric normalized Laplacian `I - D^-1/2 A D^-1/2`, with a zero diagonal
/// entry for isolated nodes.
pub fn sym_normalized_laplacian(g: &Graph) -> CsrMatrix {
    let deg = g.degrees();
    let rows = g
        .neighbors()
        .into_iter()
        .enumerate()
        .map(|(i, nbrs)| {
            let mut row: Vec<(usize, f64)> = nbrs
                .into_iter()
                .map(|j| (j, -1.0 / ((deg[i] * deg[j]) as f64).sqrt()))
                .collect();
            if deg[i] > 0 {
                let at = row.partition_point(|&(j, _)| j < i);
                row.insert(at, (i, 1.0));
            }
            row
        })
        .collect();
    CsrMatrix::from_sorted_rows(g.num_nodes(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize)]) -> Result<Graph, GraphError> {
        let labels = (0..n).map(|i| Some(i % 2)).collect();
        Graph::new(n, edges.to_vec(), DMatrix::zeros(n, 1), labels, 2)
    }

    #[test]
    fn canonicalizes_edges() {
        let g = graph(3, &[(2, 1), (0, 1)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(matches!(graph(3, &[(2, 5)]), Err(GraphError::NodeOutOfRange { node: 5, .. })));
        assert!(matches!(graph(3, &[(0, 1), (1, 0)]), Err(GraphError::DuplicateEdge(0, 1))));
        assert!(matches!(graph(3, &[(1, 1)]), Err(GraphError::SelfLoop(1))));
    }

    #[test]
    fn rejects_bad_labels() {
        let f = DMatrix::zeros(2, 1);
        let err = Graph::new(2, vec![], f.clone(), vec![Some(0), Some(3)], 2);
        assert!(matches!(err, Err(GraphError::UnknownClass { class: 3, .. })));
        let err = Graph::new(2, vec![], f, vec![Some(0), None], 2);
        assert!(matches!(err, Err(GraphError::MissingClass(1))));
    }

    #[test]
    fn rejects_non_finite_features() {
        let mut f = DMatrix::zeros(2, 2);
        f[(1, 0)] = f64::NAN;
        let err = Graph::new(2, vec![], f, vec![Some(0), Some(1)], 2);
        assert!(matches!(err, Err(GraphError::NonFinite { row: 1, col: 0 })));
    }

    #[test]
    fn path_adjacency() {
        let a = normalized_adjacency(&graph(3, &[(0, 1), (1, 2)]).unwrap()).to_dense();
        let want = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.5, 0.0, 0.5, 0.0, 1.0, 0.0]);
        assert_eq!(a, want);
    }

    #[test]
    fn triangle_adjacency() {
        let a = normalized_adjacency(&graph(3, &[(0, 1), (1, 2), (0, 2)]).unwrap());
        for i in 0..3 {
            assert_eq!(a.row(i).1, &[0.5, 0.5]);
        }
    }

    #[test]
    fn isolated_node_row_is_zero() {
        let a = normalized_adjacency(&graph(3, &[(0, 1)]).unwrap());
        assert_eq!(a.row(2).0.len(), 0);
        let l = sym_normalized_laplacian(&graph(3, &[(0, 1)]).unwrap()).to_dense();
        assert_eq!(l[(2, 2)], 0.0);
    }

    #[test]
    fn laplacian_single_edge_and_triangle() {
        let l = sym_normalized_laplacian(&graph(2, &[(0, 1)]).unwrap()).to_dense();
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        let l = sym_normalized_laplacian(&graph(3, &[(0, 1), (1, 2), (0, 2)]).unwrap());
        assert!(l.is_symmetric());
        let d = l.to_dense();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { -0.5 };
                assert!((d[(i, j)] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn split_validation() {
        assert!(SplitSpec::new(0, vec![0], vec![1], vec![2], 3).is_ok());
        assert!(SplitSpec::new(0, vec![], vec![1], vec![2], 3).is_err());
        assert!(SplitSpec::new(0, vec![0], vec![0], vec![2], 3).is_err());
        assert!(SplitSpec::new(0, vec![0], vec![], vec![3], 3).is_err());
    }
}
