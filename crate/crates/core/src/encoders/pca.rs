use nalgebra::DMatrix;

use super::EncoderError;
use crate::linalg::{canonical_sign, column_means, sym_eigen_ascending};

/// Centers the columns of `x` and projects onto the top-`d` principal
/// directions. Each direction is sign-normalized like the Laplacian PE
/// columns, so the output is deterministic.
///
/// Works from the `F x F` covariance when `F <= N`, otherwise from the
/// `N x N` Gram matrix.
pub fn pca_reduce(x: &DMatrix<f64>, d: usize) -> Result<DMatrix<f64>, EncoderError> {
    let (n, f) = x.shape();
    if d == 0 || d > n.min(f) {
        return Err(EncoderError::PcaDimension { requested: d, max: n.min(f) });
    }
    let means = column_means(x);
    let mut centered = x.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }

    let directions = if f <= n {
        let (_, vecs) = sym_eigen_ascending(centered.transpose() * &centered);
        DMatrix::from_fn(f, d, |r, c| vecs[(r, f - 1 - c)])
    } else {
        let (vals, vecs) = sym_eigen_ascending(&centered * centered.transpose());
        let top = vals[n - 1].max(0.0);
        let mut dirs = DMatrix::zeros(f, d);
        for c in 0..d {
            let lambda = vals[n - 1 - c];
            // null directions project every row to zero; leave them empty
            if lambda > top * 1e-24 && lambda > 0.0 {
                let u = vecs.column(n - 1 - c);
                dirs.set_column(c, &(centered.transpose() * u / lambda.sqrt()));
            }
        }
        dirs
    };

    let mut directions = directions;
    for mut col in directions.column_iter_mut() {
        canonical_sign(col.as_mut_slice());
    }
    Ok(centered * directions)
}
