//! Brute-force reference computations used by the self-test and the
//! acceptance suite. Each one is deliberately naive and shares no code
//! path with the production routine it checks.

use nalgebra::DMatrix;

use crate::predictor::argmax_row;

/// Adjacency lists from an undirected edge list.
pub fn adjacency_lists(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    adj
}

/// `k` rounds of replacing every node's vector by the mean of its
/// neighbors' vectors (zero for isolated nodes).
pub fn neighbor_average(n: usize, edges: &[(usize, usize)], x: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let adj = adjacency_lists(n, edges);
    let mut cur = x.clone();
    for _ in 0..k {
        let mut next = DMatrix::zeros(n, x.ncols());
        for i in 0..n {
            if adj[i].is_empty() {
                continue;
            }
            for j in 0..x.ncols() {
                let s: f64 = adj[i].iter().map(|&u| cur[(u, j)]).sum();
                next[(i, j)] = s / adj[i].len() as f64;
            }
        }
        cur = next;
    }
    cur
}

/// Dense random-walk matrix `P[i][j] = 1/deg(i)` for each neighbor `j`.
pub fn dense_random_walk(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let adj = adjacency_lists(n, edges);
    let mut p = vec![vec![0.0; n]; n];
    for i in 0..n {
        for &j in &adj[i] {
            p[i][j] += 1.0 / adj[i].len() as f64;
        }
    }
    p
}

fn dense_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b[0].len();
    let mut c = vec![vec![0.0; m]; n];
    for i in 0..n {
        for (k, bk) in b.iter().enumerate() {
            let aik = a[i][k];
            if aik != 0.0 {
                for j in 0..m {
                    c[i][j] += aik * bk[j];
                }
            }
        }
    }
    c
}

/// Return probabilities `[P^1_ii, ..., P^steps_ii]` from explicit dense powers.
pub fn rwpe_dense_powers(n: usize, edges: &[(usize, usize)], steps: usize) -> DMatrix<f64> {
    let p = dense_random_walk(n, edges);
    let mut out = DMatrix::zeros(n, steps);
    let mut power = p.clone();
    for s in 0..steps {
        for i in 0..n {
            out[(i, s)] = power[i][i];
        }
        power = dense_mul(&power, &p);
    }
    out
}

/// Return probabilities by enumerating every walk of length `≤ steps`
/// from each node. Exponential; only for tiny graphs.
pub fn rwpe_closed_walks(n: usize, edges: &[(usize, usize)], steps: usize) -> DMatrix<f64> {
    fn walk(adj: &[Vec<usize>], start: usize, at: usize, len: usize, prob: f64, acc: &mut [f64]) {
        if len > 0 && at == start {
            acc[len - 1] += prob;
        }
        if len == acc.len() || adj[at].is_empty() {
            return;
        }
        let step = prob / adj[at].len() as f64;
        for &next in &adj[at] {
            walk(adj, start, next, len + 1, step, acc);
        }
    }
    let adj = adjacency_lists(n, edges);
    let mut out = DMatrix::zeros(n, steps);
    for i in 0..n {
        let mut acc = vec![0.0; steps];
        walk(&adj, i, i, 0, 1.0, &mut acc);
        for (s, v) in acc.into_iter().enumerate() {
            out[(i, s)] = v;
        }
    }
    out
}

/// Dense `I - D^-1/2 A D^-1/2`, with a zero diagonal for isolated nodes.
pub fn dense_sym_laplacian(n: usize, edges: &[(usize, usize)]) -> DMatrix<f64> {
    let adj = adjacency_lists(n, edges);
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        if !adj[i].is_empty() {
            l[(i, i)] = 1.0;
        }
        for &j in &adj[i] {
            l[(i, j)] -= 1.0 / ((adj[i].len() * adj[j].len()) as f64).sqrt();
        }
    }
    l
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Returns
/// ascending eigenvalues and the matching eigenvectors as columns.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::identity(n, n);
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[(i, j)].powi(2)).sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Gaussian elimination with partial pivoting for `A X = B`.
pub fn gauss_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let m = b.ncols();
    let mut aug = DMatrix::zeros(n, n + m);
    aug.columns_mut(0, n).copy_from(a);
    aug.columns_mut(n, m).copy_from(b);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| aug[(i, col)].abs().total_cmp(&aug[(j, col)].abs()))?;
        if aug[(pivot, col)] == 0.0 {
            return None;
        }
        aug.swap_rows(col, pivot);
        for r in col + 1..n {
            let f = aug[(r, col)] / aug[(col, col)];
            if f != 0.0 {
                for c in col..n + m {
                    aug[(r, c)] -= f * aug[(col, c)];
                }
            }
        }
    }
    let mut x = DMatrix::zeros(n, m);
    for c in 0..m {
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|k| aug[(r, k)] * x[(k, c)]).sum();
            x[(r, c)] = (aug[(r, n + c)] - s) / aug[(r, r)];
        }
    }
    Some(x)
}

/// `Z` with a trailing ones column.
pub fn with_ones(z: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(z.nrows(), z.ncols() + 1, |i, j| if j < z.ncols() { z[(i, j)] } else { 1.0 })
}

/// `(‖(Z̃ᵀZ̃ + λI)W - Z̃ᵀY‖∞, ‖Z̃ᵀY‖∞)` with `Z̃ = [Z, 1]`, as plain loops.
pub fn ridge_normal_residual(z: &DMatrix<f64>, y: &DMatrix<f64>, w: &DMatrix<f64>, lambda: f64) -> (f64, f64) {
    let zt = with_ones(z);
    let (n, d) = zt.shape();
    let c = y.ncols();
    let mut worst: f64 = 0.0;
    let mut rhs_max: f64 = 0.0;
    for a in 0..d {
        for k in 0..c {
            let mut rhs = 0.0;
            for i in 0..n {
                rhs += zt[(i, a)] * y[(i, k)];
            }
            let mut lhs = lambda * w[(a, k)];
            for b in 0..d {
                let mut g = 0.0;
                for i in 0..n {
                    g += zt[(i, a)] * zt[(i, b)];
                }
                lhs += g * w[(b, k)];
            }
            worst = worst.max((lhs - rhs).abs());
            rhs_max = rhs_max.max(rhs.abs());
        }
    }
    (worst, rhs_max)
}

/// All-pairs k-nearest-neighbor vote on columns z-scored by context
/// statistics (constant columns dropped), weights `1/distance`, exact
/// matches taking all the weight.
pub fn knn_brute(context: &DMatrix<f64>, labels: &[usize], queries: &DMatrix<f64>, k: usize, num_classes: usize) -> DMatrix<f64> {
    let n = context.nrows();
    let mut cols = Vec::new();
    for j in 0..context.ncols() {
        let mut sum = 0.0;
        for i in 0..n {
            sum += context[(i, j)];
        }
        let mean = sum / n as f64;
        let mut ss = 0.0;
        for i in 0..n {
            ss += (context[(i, j)] - mean) * (context[(i, j)] - mean);
        }
        let std = (ss / n as f64).sqrt();
        if std > 1e-12 * mean.abs().max(1.0) {
            cols.push((j, mean, std));
        }
    }
    let scaled = |m: &DMatrix<f64>, i: usize| -> Vec<f64> { cols.iter().map(|&(j, mu, s)| (m[(i, j)] - mu) / s).collect() };
    let ctx: Vec<Vec<f64>> = (0..n).map(|i| scaled(context, i)).collect();
    let k = k.clamp(1, n);
    let mut out = DMatrix::zeros(queries.nrows(), num_classes);
    for q in 0..queries.nrows() {
        let x = scaled(queries, q);
        let mut all: Vec<(f64, usize)> = ctx
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let mut d = 0.0;
                for (a, b) in x.iter().zip(c) {
                    d += (a - b) * (a - b);
                }
                (d, i)
            })
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let nearest = &all[..k];
        let any_exact = nearest.iter().any(|&(d, _)| d == 0.0);
        let mut total = 0.0;
        for &(d, i) in nearest {
            let w = if any_exact { if d == 0.0 { 1.0 } else { 0.0 } } else { 1.0 / d.sqrt() };
            out[(q, labels[i])] += w;
            total += w;
        }
        for c in 0..num_classes {
            out[(q, c)] /= total;
        }
    }
    out
}

/// Central finite-difference gradient of `f` at `w`.
pub fn central_difference(f: impl Fn(&DMatrix<f64>) -> f64, w: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(w.nrows(), w.ncols());
    let mut probe = w.clone();
    for i in 0..w.nrows() {
        for j in 0..w.ncols() {
            let orig = probe[(i, j)];
            probe[(i, j)] = orig + h;
            let up = f(&probe);
            probe[(i, j)] = orig - h;
            let down = f(&probe);
            probe[(i, j)] = orig;
            g[(i, j)] = (up - down) / (2.0 * h);
        }
    }
    g
}

/// Accuracy of the running mean after each step of a selection trace.
pub fn prefix_scores(holdout: &[&DMatrix<f64>], trace: &[usize], labels: &[usize]) -> Vec<f64> {
    let (r, c) = holdout[0].shape();
    let mut sum = vec![vec![0.0; c]; r];
    let mut scores = Vec::with_capacity(trace.len());
    for (t, &b) in trace.iter().enumerate() {
        for i in 0..r {
            for j in 0..c {
                sum[i][j] += holdout[b][(i, j)];
            }
        }
        let hits = (0..r)
            .filter(|&i| argmax_row(sum[i].iter().map(|v| v / (t + 1) as f64)) == labels[i])
            .count();
        scores.push(hits as f64 / r as f64);
    }
    scores
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_on_known_spectrum() {
        let c4 = [(0, 1), (1, 2), (2, 3), (0, 3)];
        let (vals, vecs) = jacobi_eigen(&dense_sym_laplacian(4, &c4));
        for (v, e) in vals.iter().zip([0.0, 1.0, 1.0, 2.0]) {
            assert!((v - e).abs() < 1e-12);
        }
        assert!((vecs.transpose() * &vecs - DMatrix::identity(4, 4)).amax() < 1e-12);
    }

    #[test]
    fn walk_enumeration_on_triangle() {
        let k3 = [(0, 1), (1, 2), (0, 2)];
        let w = rwpe_closed_walks(3, &k3, 3);
        for i in 0..3 {
            assert_eq!(w.row(i).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.5, 0.25]);
        }
        assert!((rwpe_dense_powers(3, &k3, 3) - w).amax() < 1e-15);
    }

    #[test]
    fn gauss_solves() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0]);
        let x = DMatrix::from_row_slice(3, 1, &[1.0, -2.0, 0.5]);
        let b = &a * &x;
        assert!((gauss_solve(&a, &b).unwrap() - x).amax() < 1e-12);
    }

    #[test]
    fn finite_difference_of_quadratic() {
        let w = DMatrix::from_row_slice(2, 1, &[1.0, -3.0]);
        let g = central_difference(|w| w[(0, 0)].powi(2) + 3.0 * w[(1, 0)], &w, 1e-5);
        assert!((g[(0, 0)] - 2.0).abs() < 1e-8 && (g[(1, 0)] - 3.0).abs() < 1e-8);
    }
}
