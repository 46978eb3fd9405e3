use nalgebra::DMatrix;
use rayon::prelude::*;

use super::GraphError;

/// Compressed sparse row matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from raw CSR arrays, checking the layout invariants:
    /// monotone offsets, in-bounds and strictly increasing column indices.
    pub fn from_parts(
        nrows: usize,
        ncols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, GraphError> {
        if indptr.len() != nrows + 1 || indptr[0] != 0 {
            return Err(GraphError::InvalidCsr("row offsets have the wrong length or start".into()));
        }
        if indices.len() != values.len() || *indptr.last().unwrap() != indices.len() {
            return Err(GraphError::InvalidCsr("offset/index/value lengths disagree".into()));
        }
        for r in 0..nrows {
            let (lo, hi) = (indptr[r], indptr[r + 1]);
            if lo > hi {
                return Err(GraphError::InvalidCsr(format!("row {r}: offsets decrease")));
            }
            let cols = &indices[lo..hi];
            if cols.iter().any(|&c| c >= ncols) {
                return Err(GraphError::InvalidCsr(format!("row {r}: column out of bounds")));
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(GraphError::InvalidCsr(format!("row {r}: columns not strictly increasing")));
            }
        }
        Ok(Self { nrows, ncols, indptr, indices, values })
    }

    /// Builds from per-row `(column, value)` lists that are already sorted and
    /// deduplicated.
    pub(crate) fn from_sorted_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let nrows = rows.len();
        let mut indptr = Vec::with_capacity(nrows + 1);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        indptr.push(0);
        for row in rows {
            for (c, v) in row {
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self { nrows, ncols, indptr, indices, values }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    /// Stored value at `(i, j)`, zero when absent.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[(i, j)] = v;
            }
        }
        out
    }

    /// Exact structural and numerical symmetry.
    pub fn is_symmetric(&self) -> bool {
        self.nrows == self.ncols
            && (0..self.nrows).all(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).all(|(&j, &v)| self.get(j, i) == v)
            })
    }

    /// Sparse times dense product `self * x`. Output columns are computed
    /// independently, so the result does not depend on the worker count.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>, GraphError> {
        if x.nrows() != self.ncols {
            return Err(GraphError::DimensionMismatch {
                what: "sparse-dense product",
                expected: self.ncols,
                found: x.nrows(),
            });
        }
        let mut out = DMatrix::zeros(self.nrows, x.ncols());
        if self.nrows == 0 {
            return Ok(out);
        }
        out.as_mut_slice()
            .par_chunks_mut(self.nrows)
            .enumerate()
            .for_each(|(j, col_out)| {
                let col = x.column(j);
                let col = col.as_slice();
                self.mul_vec_into(col, col_out);
            });
        Ok(out)
    }

    /// `out = self * v` for a single dense vector.
    pub fn mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
            let mut acc = 0.0;
            for p in lo..hi {
                acc += self.values[p] * v[self.indices[p]];
            }
            *o = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unsorted_columns() {
        let err = CsrMatrix::from_parts(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]);
        assert!(matches!(err, Err(GraphError::InvalidCsr(_))));
    }

    #[test]
    fn rejects_out_of_bounds_column() {
        let err = CsrMatrix::from_parts(1, 2, vec![0, 1], vec![2], vec![1.0]);
        assert!(err.is_err());
    }

    #[test]
    fn product_matches_dense() {
        let m = CsrMatrix::from_parts(2, 3, vec![0, 2, 3], vec![0, 2, 1], vec![1.0, 2.0, 3.0]).unwrap();
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let got = m.mul_dense(&x).unwrap();
        assert_eq!(got, m.to_dense() * &x);
        assert!(m.mul_dense(&DMatrix::zeros(2, 1)).is_err());
    }
}
