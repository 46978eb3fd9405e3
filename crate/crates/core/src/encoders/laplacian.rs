//! Laplacian eigenvector positional encodings.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::EncoderError;
use crate::graph::CsrMatrix;
use crate::linalg::{canonical_sign, sym_eigen_ascending};
use crate::seeding::{rng_for, stream};

/// Largest graph handled by the dense symmetric solver under
/// [`EigenSolver::Auto`].
pub const DENSE_EIGEN_LIMIT: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct LanczosOptions {
    /// Residual bound `‖Lx - θx‖₂` for every wanted Ritz pair.
    pub tol: f64,
    /// Basis size per restart cycle, as a multiple of the number of wanted pairs.
    pub basis_factor: usize,
    /// Start-block width.
    pub block: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { tol: 1e-9, basis_factor: 10, block: 4, max_restarts: 200, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum EigenSolver {
    /// Dense up to [`DENSE_EIGEN_LIMIT`] nodes, Lanczos above.
    #[default]
    Auto,
    Dense,
    Lanczos(LanczosOptions),
}

/// Eigenvectors of the `k` smallest eigenvalues of `l_sym` after dropping
/// the very smallest, as unit-norm columns with the largest-magnitude entry
/// positive. Graphs with `N - 1 < k` get zero-padded trailing columns.
pub fn laplacian_pe(l_sym: &CsrMatrix, k: usize) -> Result<DMatrix<f64>, EncoderError> {
    laplacian_pe_with(l_sym, k, &EigenSolver::Auto).map(|(_, pe)| pe)
}

/// Like [`laplacian_pe`], also returning the retained eigenvalues.
pub fn laplacian_pe_with(
    l_sym: &CsrMatrix,
    k: usize,
    solver: &EigenSolver,
) -> Result<(Vec<f64>, DMatrix<f64>), EncoderError> {
    if k == 0 {
        return Err(EncoderError::InvalidConfig("Laplacian PE width must be at least 1".into()));
    }
    let n = l_sym.nrows();
    if l_sym.ncols() != n {
        return Err(EncoderError::DimensionMismatch { what: "square operator", expected: n, found: l_sym.ncols() });
    }
    let wanted = (k + 1).min(n);
    let (values, vectors) = match solver {
        EigenSolver::Dense => dense_smallest(l_sym, wanted),
        EigenSolver::Auto if n <= DENSE_EIGEN_LIMIT => dense_smallest(l_sym, wanted),
        EigenSolver::Auto => lanczos_smallest(l_sym, wanted, &LanczosOptions::default())?,
        EigenSolver::Lanczos(opts) => lanczos_smallest(l_sym, wanted, opts)?,
    };
    let kept = wanted.saturating_sub(1);
    let mut pe = DMatrix::zeros(n, k);
    for c in 0..kept {
        let mut col: Vec<f64> = vectors.column(c + 1).iter().copied().collect();
        canonical_sign(&mut col);
        pe.column_mut(c).copy_from_slice(&col);
    }
    Ok((values.into_iter().skip(1).take(kept).collect(), pe))
}

fn dense_smallest(l: &CsrMatrix, wanted: usize) -> (Vec<f64>, DMatrix<f64>) {
    let (values, vectors) = sym_eigen_ascending(l.to_dense());
    (values[..wanted].to_vec(), vectors.columns(0, wanted).into_owned())
}

/// Orthogonalizes `v` against `basis` (two classical Gram-Schmidt passes)
/// and returns its remaining norm.
fn orthogonalize(v: &mut DVector<f64>, basis: &[DVector<f64>]) -> f64 {
    for _ in 0..2 {
        for b in basis {
            let h = b.dot(v);
            v.axpy(-h, b, 1.0);
        }
    }
    v.norm()
}

fn apply(op: &CsrMatrix, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(op.nrows());
    op.mul_vec_into(v.as_slice(), out.as_mut_slice());
    out
}

/// Block Krylov eigensolver for the `wanted` smallest eigenpairs of a
/// symmetric operator, with full reorthogonalization and thick restarts.
///
/// Each cycle grows an orthonormal basis to the configured size, performs
/// Rayleigh-Ritz on it, and restarts from the wanted Ritz vectors plus a
/// block of spares. Expansion continues from the images of unconverged Ritz
/// vectors, which after orthogonalization are their residual directions.
pub fn lanczos_smallest(
    op: &CsrMatrix,
    wanted: usize,
    opts: &LanczosOptions,
) -> Result<(Vec<f64>, DMatrix<f64>), EncoderError> {
    let n = op.nrows();
    let wanted = wanted.min(n);
    if wanted == 0 {
        return Ok((Vec::new(), DMatrix::zeros(n, 0)));
    }
    let block = opts.block.max(1);
    let max_basis = (opts.basis_factor.max(2) * wanted).max(wanted + 2 * block).min(n);
    let keep = (wanted + block).min(max_basis.saturating_sub(block).max(wanted));
    let mut rng = rng_for(opts.seed, &[stream::LANCZOS, n as u64]);
    let mut random_unit = |basis: &[DVector<f64>]| -> Option<DVector<f64>> {
        for _ in 0..8 {
            let mut v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let norm = orthogonalize(&mut v, basis);
            if norm > 1e-8 {
                return Some(v / norm);
            }
        }
        None
    };

    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(max_basis);
    let mut images: Vec<DVector<f64>> = Vec::with_capacity(max_basis);
    let mut frontier: std::collections::VecDeque<usize> = Default::default();
    for _ in 0..block.min(max_basis) {
        let v = random_unit(&basis).expect("space has room for the start block");
        images.push(apply(op, &v));
        basis.push(v);
        frontier.push_back(basis.len() - 1);
    }

    let mut worst = f64::INFINITY;
    for cycle in 0..=opts.max_restarts {
        while basis.len() < max_basis {
            let candidate = frontier.pop_front().and_then(|i| {
                let mut w = images[i].clone();
                let scale = w.norm();
                let norm = orthogonalize(&mut w, &basis);
                (norm > 1e-10 * scale.max(1e-300)).then(|| w / norm)
            });
            let Some(v) = candidate.or_else(|| random_unit(&basis)) else { break };
            images.push(apply(op, &v));
            basis.push(v);
            frontier.push_back(basis.len() - 1);
        }

        let m = basis.len();
        let v_mat = DMatrix::from_columns(&basis);
        let w_mat = DMatrix::from_columns(&images);
        let h = v_mat.transpose() * &w_mat;
        let h = (&h + h.transpose()) * 0.5;
        let (theta, y) = sym_eigen_ascending(h);

        let ritz = &v_mat * &y;
        let ritz_images = &w_mat * &y;
        let residuals: Vec<f64> = (0..wanted)
            .map(|i| (ritz_images.column(i) - ritz.column(i) * theta[i]).norm())
            .collect();
        worst = residuals.iter().fold(0.0, |a: f64, &r| a.max(r));
        if worst <= opts.tol || m == n {
            return Ok((theta[..wanted].to_vec(), ritz.columns(0, wanted).into_owned()));
        }
        if cycle == opts.max_restarts {
            break;
        }

        let keep = keep.min(m);
        basis = (0..keep).map(|i| ritz.column(i).normalize()).collect();
        images = (0..keep).map(|i| ritz_images.column(i) / ritz.column(i).norm()).collect();
        frontier = (0..wanted).filter(|&i| residuals[i] > opts.tol).collect();
    }
    Err(EncoderError::NonConvergence { residual: worst, restarts: opts.max_restarts })
}
