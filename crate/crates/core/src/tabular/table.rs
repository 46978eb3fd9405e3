use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::TabularError;
use crate::encoders::{EncodingBlock, EncodingKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub block: String,
    pub kind: EncodingKind,
}

/// The node table: one row per node, encoding blocks concatenated as
/// columns. Labels are kept apart from `z` and only ever used as targets.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTable {
    pub z: DMatrix<f64>,
    pub columns: Vec<ColumnMeta>,
    /// Node ids of labeled rows `L`.
    pub labeled: Vec<usize>,
    /// Class of each labeled row, aligned with `labeled`.
    pub labels: Vec<usize>,
    /// Node ids of query rows `Q`.
    pub query: Vec<usize>,
    pub num_classes: usize,
}

impl NodeTable {
    pub fn build(
        blocks: &[EncodingBlock],
        labeled: Vec<usize>,
        labels: Vec<usize>,
        query: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self, TabularError> {
        let n = blocks.first().map_or(0, |b| b.matrix.nrows());
        if let Some(b) = blocks.iter().find(|b| b.matrix.nrows() != n) {
            return Err(TabularError::Shape(format!("block {} has {} rows, expected {n}", b.name, b.matrix.nrows())));
        }
        if labels.len() != labeled.len() {
            return Err(TabularError::Shape("labels and labeled rows differ in length".into()));
        }
        if let Some(&c) = labels.iter().find(|&&c| c >= num_classes) {
            return Err(TabularError::Shape(format!("label {c} out of range for {num_classes} classes")));
        }
        let mut role = vec![0u8; n];
        for (set, mark) in [(&labeled, 1u8), (&query, 2u8)] {
            for &i in set.iter() {
                if i >= n {
                    return Err(TabularError::Shape(format!("row {i} out of range for {n} nodes")));
                }
                if role[i] != 0 {
                    return Err(TabularError::Shape(format!("row {i} is both labeled and query (or repeated)")));
                }
                role[i] = mark;
            }
        }
        let width: usize = blocks.iter().map(|b| b.matrix.ncols()).sum();
        let mut z = DMatrix::zeros(n, width);
        let mut columns = Vec::with_capacity(width);
        let mut at = 0;
        for b in blocks {
            z.columns_mut(at, b.matrix.ncols()).copy_from(&b.matrix);
            at += b.matrix.ncols();
            columns.extend((0..b.matrix.ncols()).map(|_| ColumnMeta { block: b.name.clone(), kind: b.kind }));
        }
        Ok(Self { z, columns, labeled, labels, query, num_classes })
    }

    pub fn width(&self) -> usize {
        self.z.ncols()
    }

    /// Column indices of one kind, ascending.
    pub fn columns_of(&self, kind: EncodingKind) -> Vec<usize> {
        self.columns.iter().enumerate().filter(|(_, m)| m.kind == kind).map(|(i, _)| i).collect()
    }

    /// Submatrix of labeled rows at positions `pos` (into `L`) and `cols`.
    pub fn labeled_rows(&self, pos: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(pos.len(), cols.len(), |r, c| self.z[(self.labeled[pos[r]], cols[c])])
    }

    pub fn query_rows(&self, cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(self.query.len(), cols.len(), |r, c| self.z[(self.query[r], cols[c])])
    }
}
