//! Small dense helpers shared by the encoders and the ridge solver.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Flips `v` so that its entry of largest magnitude is positive. Magnitudes
/// within a relative 1e-12 of the maximum count as ties, resolved by the
/// lowest index.
pub fn canonical_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return;
    }
    let pivot = v
        .iter()
        .position(|x| x.abs() >= max * (1.0 - 1e-12))
        .expect("maximum is attained");
    if v[pivot] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted
/// ascending (stable on ties). Columns of the returned matrix are unit
/// eigenvectors in the same order.
pub fn sym_eigen_ascending(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Mean of each column.
pub fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows().max(1) as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_convention() {
        let mut v = vec![0.1, -0.9, 0.3];
        canonical_sign(&mut v);
        assert_eq!(v, vec![-0.1, 0.9, -0.3]);
        let mut tie = vec![-0.5, 0.5, 0.0];
        canonical_sign(&mut tie);
        assert_eq!(tie, vec![0.5, -0.5, 0.0]);
        let mut zero = vec![0.0, 0.0];
        canonical_sign(&mut zero);
        assert_eq!(zero, vec![0.0, 0.0]);
    }

    #[test]
    fn eigen_sorted() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let (vals, vecs) = sym_eigen_ascending(m);
        assert_eq!(vals, vec![1.0, 2.0]);
        assert!((vecs[(1, 0)].abs() - 1.0).abs() < 1e-15);
    }
}
