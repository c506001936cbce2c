//! Small dense kernels shared by the solvers.

use nalgebra::{DMatrix, DVector};

/// Dot product with four independent accumulators so the loop vectorizes.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let tail_a = chunks_a.remainder();
    let tail_b = chunks_b.remainder();
    for (x, y) in chunks_a.zip(chunks_b) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in tail_a.iter().zip(tail_b) {
        s += x * y;
    }
    s
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    for v in x {
        *v *= alpha;
    }
}

/// Result of a dense least-squares solve.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub solution: Vec<f64>,
    pub rank: usize,
    /// True when the system matrix had numerically dependent columns and the
    /// minimum-norm solution was returned.
    pub rank_deficient: bool,
}

/// Relative threshold on singular values / pivots treated as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Least-squares solution of `a x = b`.
///
/// Uses column-pivoted QR when `a` has full column rank and falls back to the
/// SVD minimum-norm solution otherwise (including under-determined systems).
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> LeastSquares {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return LeastSquares {
            solution: Vec::new(),
            rank: 0,
            rank_deficient: false,
        };
    }
    if cols <= rows {
        let qr = a.clone().col_piv_qr();
        let r = qr.r();
        let r00 = r[(0, 0)].abs();
        let full_rank = r00 > 0.0 && (0..cols).all(|i| r[(i, i)].abs() > RANK_TOL * r00);
        if full_rank {
            let q = qr.q();
            let qtb = q.transpose() * b;
            // back substitution on the pivoted triangular factor
            let mut z = vec![0.0; cols];
            for i in (0..cols).rev() {
                let mut s = qtb[i];
                for j in (i + 1)..cols {
                    s -= r[(i, j)] * z[j];
                }
                z[i] = s / r[(i, i)];
            }
            let mut zv = DVector::from_vec(z);
            qr.p().inv_permute_rows(&mut zv);
            return LeastSquares {
                solution: zv.as_slice().to_vec(),
                rank: cols,
                rank_deficient: false,
            };
        }
    }
    min_norm_svd(a, b)
}

fn min_norm_svd(a: &DMatrix<f64>, b: &DVector<f64>) -> LeastSquares {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = (RANK_TOL * smax).max(f64::MIN_POSITIVE);
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let x = svd
        .solve(b, eps)
        .map(|x| x.as_slice().to_vec())
        .unwrap_or_else(|_| vec![0.0; a.ncols()]);
    LeastSquares {
        solution: x,
        rank,
        rank_deficient: rank < a.ncols(),
    }
}

/// Solves `G x = b` for symmetric positive definite `G`, stored row-major in
/// `g` (`k * k` entries, overwritten by its Cholesky factor). Returns `None`
/// when a pivot is not positive.
pub fn cholesky_solve(g: &mut [f64], b: &[f64]) -> Option<Vec<f64>> {
    let k = b.len();
    assert_eq!(g.len(), k * k);
    for i in 0..k {
        let (done, rest) = g.split_at_mut(i * k);
        let row_i = &mut rest[..k];
        for j in 0..i {
            let row_j = &done[j * k..j * k + j];
            let v = (row_i[j] - dot(&row_i[..j], row_j)) / done[j * k + j];
            row_i[j] = v;
        }
        let d = row_i[i] - dot(&row_i[..i], &row_i[..i]);
        if !(d > 0.0) {
            return None;
        }
        row_i[i] = d.sqrt();
    }
    let mut x = b.to_vec();
    for i in 0..k {
        let row = &g[i * k..i * k + i];
        x[i] = (x[i] - dot(row, &x[..i])) / g[i * k + i];
    }
    for i in (0..k).rev() {
        let mut v = x[i];
        for j in i + 1..k {
            v -= g[j * k + i] * x[j];
        }
        x[i] = v / g[i * k + i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    #[test]
    fn cholesky_matches_dense_solve() {
        let a = nalgebra::DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let b = [1.0, -2.0, 0.5];
        let mut g: Vec<f64> = (0..9).map(|i| a[(i / 3, i % 3)]).collect();
        let x = super::cholesky_solve(&mut g, &b).unwrap();
        let ax = &a * nalgebra::DVector::from_column_slice(&x);
        for i in 0..3 {
            assert!((ax[i] - b[i]).abs() < 1e-12);
        }
        let mut singular = vec![1.0, 1.0, 1.0, 1.0];
        assert!(super::cholesky_solve(&mut singular, &[1.0, 1.0]).is_none());
    }

    use super::*;

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..13).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..13).map(|i| 1.0 - i as f64).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    #[test]
    fn least_squares_consistent_system() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, 3.0, 5.0]);
        let ls = least_squares(&a, &b);
        assert!(!ls.rank_deficient);
        assert!((ls.solution[0] - 2.0).abs() < 1e-12);
        assert!((ls.solution[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn least_squares_duplicate_columns_min_norm() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        let b = DVector::from_vec(vec![2.0, 0.0]);
        let ls = least_squares(&a, &b);
        assert!(ls.rank_deficient);
        assert_eq!(ls.rank, 1);
        assert!((ls.solution[0] - 1.0).abs() < 1e-12);
        assert!((ls.solution[1] - 1.0).abs() < 1e-12);
    }
}
