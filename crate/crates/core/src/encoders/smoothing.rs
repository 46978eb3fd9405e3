use nalgebra::DMatrix;

use super::EncoderError;
use crate::graph::CsrMatrix;

/// `Â^k X` by `k` successive sparse-dense products.
pub fn smooth_features(a_hat: &CsrMatrix, x: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>, EncoderError> {
    if k == 0 {
        return Err(EncoderError::InvalidConfig("smoothing order must be at least 1".into()));
    }
    let mut out = a_hat.mul_dense(x)?;
    for _ in 1..k {
        out = a_hat.mul_dense(&out)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalized_adjacency, Graph};

    fn path3() -> CsrMatrix {
        let g = Graph::new(3, vec![(0, 1), (1, 2)], DMatrix::zeros(3, 1), vec![Some(0), Some(1), Some(0)], 2).unwrap();
        normalized_adjacency(&g)
    }

    #[test]
    fn path_graph_orders() {
        let a = path3();
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 1.0]);
        assert_eq!(smooth_features(&a, &x, 1).unwrap().as_slice(), &[0.0, 1.0, 0.0]);
        assert_eq!(smooth_features(&a, &x, 2).unwrap().as_slice(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn isolated_rows_vanish() {
        let g = Graph::new(3, vec![(0, 1)], DMatrix::zeros(3, 1), vec![Some(0), Some(1), None], 2).unwrap();
        let a = normalized_adjacency(&g);
        let x = DMatrix::from_element(3, 2, 3.0);
        for k in 1..5 {
            let s = smooth_features(&a, &x, k).unwrap();
            assert_eq!(s.row(2).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = path3();
        assert!(smooth_features(&a, &DMatrix::zeros(2, 1), 1).is_err());
        assert!(smooth_features(&a, &DMatrix::zeros(3, 1), 0).is_err());
    }
}
