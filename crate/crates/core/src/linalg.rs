//! Small dense linear algebra: cyclic Jacobi for symmetric matrices, rank
//! estimation and Cholesky factorisation. Matrices here are at most a few
//! rows wide, so clarity wins over blocking.

use nalgebra::{DMatrix, DVector};

/// Off-diagonal Frobenius norm below which a Jacobi sweep stops.
pub const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn max(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn top_vector(&self) -> DVector<f64> {
        self.vectors.column(self.values.len() - 1).into_owned()
    }
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi rotations until the off-diagonal norm drops below
/// [`JACOBI_TOL`] (relative to the matrix scale when that exceeds one).
pub fn sym_eigen(matrix: &DMatrix<f64>) -> SymEigen {
    let n = matrix.nrows();
    assert_eq!(n, matrix.ncols(), "sym_eigen expects a square matrix");
    let mut a = matrix.clone();
    // symmetrise: callers may pass matrices with round-off asymmetry
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.norm().max(1.0);

    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) <= JACOBI_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    SymEigen { values, vectors }
}

pub fn lambda_max(a: &DMatrix<f64>) -> f64 {
    sym_eigen(a).max()
}

pub fn lambda_min(a: &DMatrix<f64>) -> f64 {
    sym_eigen(a).min()
}

/// Numerical rank of a set of vectors by Gaussian elimination with full
/// pivoting; entries below `rel_tol * max|entry|` count as zero.
pub fn rank(vectors: &[DVector<f64>], rel_tol: f64) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let n = vectors[0].len();
    let mut rows: Vec<Vec<f64>> = vectors.iter().map(|v| v.iter().copied().collect()).collect();
    let scale = rows.iter().flat_map(|r| r.iter()).fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0;
    }
    let tol = rel_tol * scale;
    let mut rank = 0;
    let mut used_cols = vec![false; n];
    let mut remaining: Vec<usize> = (0..rows.len()).collect();
    while !remaining.is_empty() && rank < n {
        // full pivot among remaining rows / unused columns
        let mut best = (0.0, 0, 0);
        for (ri, &r) in remaining.iter().enumerate() {
            for c in 0..n {
                if !used_cols[c] && rows[r][c].abs() > best.0 {
                    best = (rows[r][c].abs(), ri, c);
                }
            }
        }
        if best.0 <= tol {
            break;
        }
        let (_, ri, c) = best;
        let pivot_row = remaining.swap_remove(ri);
        used_cols[c] = true;
        rank += 1;
        let pivot = rows[pivot_row].clone();
        for &r in &remaining {
            let f = rows[r][c] / pivot[c];
            if f != 0.0 {
                for k in 0..n {
                    rows[r][k] -= f * pivot[k];
                }
            }
        }
    }
    rank
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// Solves `L y = b` in place for lower-triangular `L`.
pub fn forward_substitute(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = l.nrows();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn jacobi_diagonalises_known_matrix() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let e = sym_eigen(&a);
        assert_relative_eq!(e.values[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(e.values[1], 3.0, epsilon = 1e-12);
        let v = e.top_vector();
        assert_relative_eq!(v[0].abs(), 0.5_f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn jacobi_reconstructs_random_matrix() {
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, -0.3, 2.0, 0.5, -0.3, 0.7, 0.1, -1.2, 2.0, 0.1, -1.5, 0.0, 0.5, -1.2, 0.0, 3.0,
            ],
        );
        let e = sym_eigen(&a);
        let d = DMatrix::from_diagonal(&DVector::from_vec(e.values.clone()));
        let rec = &e.vectors * d * e.vectors.transpose();
        assert!((rec - &a).norm() < 1e-10);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rank_detects_dependence() {
        let v = vec![
            DVector::from_vec(vec![1.0, 0.0, 0.0]),
            DVector::from_vec(vec![2.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0, 1.0]),
        ];
        assert_eq!(rank(&v, 1e-10), 2);
        assert_eq!(rank(&[], 1e-10), 0);
    }

    #[test]
    fn cholesky_solves() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 3.0]);
        let l = cholesky(&a).unwrap();
        assert!((&l * l.transpose() - &a).norm() < 1e-14);
        let mut b = [2.0, 1.0];
        forward_substitute(&l, &mut b);
        assert_relative_eq!(b[0], 1.0);
        assert!(cholesky(&DMatrix::from_row_slice(1, 1, &[-1.0])).is_none());
    }
}
