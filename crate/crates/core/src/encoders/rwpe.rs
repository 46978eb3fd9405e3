use nalgebra::DMatrix;
use rayon::prelude::*;

use super::EncoderError;
use crate::graph::CsrMatrix;

/// Number of basis vectors propagated together.
const PROBE_BLOCK: usize = 256;

/// Random-walk return probabilities: entry `(v, k-1)` is `(Â^k)_{vv}` for
/// `k = 1..=steps`.
///
/// Diagonals are read off by pushing blocks of basis vectors through the
/// sparse operator, so `Â^k` is never formed. Blocks are independent.
pub fn random_walk_pe(a_hat: &CsrMatrix, steps: usize) -> Result<DMatrix<f64>, EncoderError> {
    if steps == 0 {
        return Err(EncoderError::InvalidConfig("random-walk steps must be at least 1".into()));
    }
    let n = a_hat.nrows();
    if a_hat.ncols() != n {
        return Err(EncoderError::DimensionMismatch { what: "square operator", expected: n, found: a_hat.ncols() });
    }
    let starts: Vec<usize> = (0..n).step_by(PROBE_BLOCK).collect();
    let blocks: Vec<(usize, DMatrix<f64>)> = starts
        .into_par_iter()
        .map(|start| {
            let width = PROBE_BLOCK.min(n - start);
            let mut probe = DMatrix::zeros(n, width);
            for j in 0..width {
                probe[(start + j, j)] = 1.0;
            }
            let mut diag = DMatrix::zeros(width, steps);
            for k in 0..steps {
                probe = a_hat.mul_dense(&probe).expect("square operator");
                for j in 0..width {
                    diag[(j, k)] = probe[(start + j, j)];
                }
            }
            (start, diag)
        })
        .collect();
    let mut out = DMatrix::zeros(n, steps);
    for (start, diag) in blocks {
        out.rows_mut(start, diag.nrows()).copy_from(&diag);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalized_adjacency, Graph};

    fn a_hat(n: usize, edges: &[(usize, usize)]) -> CsrMatrix {
        let labels = (0..n).map(|i| Some(i % 2)).collect();
        normalized_adjacency(&Graph::new(n, edges.to_vec(), DMatrix::zeros(n, 1), labels, 2).unwrap())
    }

    #[test]
    fn single_edge_parity() {
        let pe = random_walk_pe(&a_hat(2, &[(0, 1)]), 4).unwrap();
        for v in 0..2 {
            assert_eq!(pe.row(v).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn spans_several_probe_blocks() {
        // cycle of 600 nodes: return probability after 2 steps is 1/2 everywhere
        let n = 600;
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        let pe = random_walk_pe(&a_hat(n, &edges), 3).unwrap();
        for v in 0..n {
            assert_eq!(pe[(v, 0)], 0.0);
            assert_eq!(pe[(v, 1)], 0.5);
            assert_eq!(pe[(v, 2)], 0.0);
        }
    }

    #[test]
    fn zero_steps_rejected() {
        assert!(random_walk_pe(&a_hat(2, &[(0, 1)]), 0).is_err());
    }
}
