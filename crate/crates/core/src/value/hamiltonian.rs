//! Hamiltonians of the control problems, maximised by brute force over
//! extremal controls `nu^2 = I - a a^T`, with eigenvalue closed forms.

use crate::error::{Error, Result};
use crate::frames::{EpsilonFrame, Frame};
use crate::linalg;
use nalgebra::{DMatrix, DVector};

/// Smallest compass step of the local refinement.
const REFINE_MIN_STEP: f64 = 1e-9;
const REFINE_MAX_ITERS: usize = 10_000;

/// Maximum of a brute-force search and the maximising direction.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianValue {
    pub value: f64,
    pub direction: DVector<f64>,
}

/// Brute-force settings: the direction set and whether the best grid
/// direction is polished by a compass search on the sphere.
#[derive(Clone, Copy, Debug)]
pub struct Search<'a> {
    pub directions: &'a [DVector<f64>],
    pub refine: bool,
}

/// `I - a a^T`.
fn nu_sq(a: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::identity(a.len(), a.len()) - a * a.transpose()
}

fn tangent_basis(a: &DVector<f64>) -> Vec<DVector<f64>> {
    let d = a.len();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(d - 1);
    for k in 0..d {
        let mut v = DVector::zeros(d);
        v[k] = 1.0;
        v -= a * a[k];
        for b in &basis {
            let c = b.dot(&v);
            v -= b * c;
        }
        let n = v.norm();
        if n > 1e-6 {
            basis.push(v / n);
        }
        if basis.len() + 1 == d {
            break;
        }
    }
    basis
}

/// Maximises `objective` over the unit sphere.
pub fn maximise(objective: impl Fn(&DVector<f64>) -> f64, search: Search<'_>) -> HamiltonianValue {
    let mut best = HamiltonianValue {
        value: f64::NEG_INFINITY,
        direction: search.directions[0].clone(),
    };
    for a in search.directions {
        let v = objective(a);
        if v > best.value {
            best = HamiltonianValue {
                value: v,
                direction: a.clone(),
            };
        }
    }
    if search.refine && best.direction.len() > 1 {
        let d = best.direction.len() as f64;
        let mut step = (4.0 * std::f64::consts::PI / search.directions.len() as f64).powf(1.0 / (d - 1.0));
        let mut iters = 0;
        while step > REFINE_MIN_STEP && iters < REFINE_MAX_ITERS {
            iters += 1;
            let mut improved = false;
            for t in tangent_basis(&best.direction) {
                for sign in [1.0, -1.0] {
                    let cand = &best.direction * step.cos() + &t * (sign * step.sin());
                    let cand = &cand / cand.norm();
                    let v = objective(&cand);
                    if v > best.value {
                        best = HamiltonianValue {
                            value: v,
                            direction: cand,
                        };
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
    }
    best
}

fn check_square(n: usize, s: &DMatrix<f64>) -> Result<()> {
    if s.nrows() != n || s.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: s.nrows(),
        });
    }
    Ok(())
}

fn control_objective(m: DMatrix<f64>, conn: DMatrix<f64>) -> impl Fn(&DVector<f64>) -> f64 {
    move |a| {
        let nu2 = nu_sq(a);
        -(&m * &nu2).trace() + nu2.component_mul(&conn).sum()
    }
}

/// `sup_a [ -Tr(sigma_eps S sigma_eps^T nu^2) + sum_ij (nu^2)_ij <nabla_{X_i^eps} X_j^eps, p> ]`.
pub fn hamiltonian_h_eps(
    eframe: &EpsilonFrame,
    x: &[f64],
    p: &[f64],
    s: &DMatrix<f64>,
    search: Search<'_>,
) -> Result<HamiltonianValue> {
    let n = eframe.dim();
    check_square(n, s)?;
    if search.directions.iter().any(|a| a.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: search.directions[0].len(),
        });
    }
    let sig = eframe.sigma_eps(x);
    let m = &sig * s * sig.transpose();
    Ok(maximise(control_objective(m, eframe.connection_matrix(x, p)), search))
}

/// Horizontal Hamiltonian with `sigma` and `nu` acting on R^m.
pub fn hamiltonian_h(
    frame: &Frame,
    x: &[f64],
    p: &[f64],
    s: &DMatrix<f64>,
    search: Search<'_>,
) -> Result<HamiltonianValue> {
    check_square(frame.dim(), s)?;
    if search.directions.iter().any(|a| a.len() != frame.rank()) {
        return Err(Error::DimensionMismatch {
            expected: frame.rank(),
            got: search.directions[0].len(),
        });
    }
    let sig = frame.sigma(x);
    let m = &sig * s * sig.transpose();
    Ok(maximise(control_objective(m, frame.connection_matrix(x, p)), search))
}

/// `-Tr(M) + Tr(A) + lambda_max(M - A)` with `M = sigma_eps S sigma_eps^T`
/// and `A` the symmetrised connection term.
pub fn closed_form_h_eps(eframe: &EpsilonFrame, x: &[f64], p: &[f64], s: &DMatrix<f64>) -> f64 {
    let sig = eframe.sigma_eps(x);
    let m = &sig * s * sig.transpose();
    let a = eframe.covariant_matrix_eps(x, p);
    -m.trace() + a.trace() + linalg::lambda_max(&(&m - &a))
}

fn check_hp(z: f64, p_exponent: f64) -> Result<()> {
    if !(z > 0.0) {
        return Err(Error::InvalidArgument(format!("z must be positive, got {z}")));
    }
    if !(p_exponent > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "exponent must exceed 1, got {p_exponent}"
        )));
    }
    Ok(())
}

/// `sup_a [ -(p - 1) / z Tr(nu^2 q q^T) + Tr(nu^2 M) ]`.
pub fn hamiltonian_hp(
    z: f64,
    q: &[f64],
    m: &DMatrix<f64>,
    p_exponent: f64,
    search: Search<'_>,
) -> Result<HamiltonianValue> {
    check_hp(z, p_exponent)?;
    check_square(q.len(), m)?;
    let c = (p_exponent - 1.0) / z;
    let qv = DVector::from_column_slice(q);
    let qq = &qv * qv.transpose();
    let m = m.clone();
    Ok(maximise(
        move |a| {
            let nu2 = nu_sq(a);
            -c * (&nu2 * &qq).trace() + (&nu2 * &m).trace()
        },
        search,
    ))
}

/// `q_eps` and `M_eps`: entries past the first `m` of `q` scaled by `eps`,
/// the mixed blocks of `M` by `eps` and its lower block by `eps^2`.
pub fn eps_scalings(q: &[f64], mat: &DMatrix<f64>, m: usize, eps: f64) -> (Vec<f64>, DMatrix<f64>) {
    let n = q.len();
    let scale = |i: usize| if i < m { 1.0 } else { eps };
    let q_eps = (0..n).map(|i| q[i] * scale(i)).collect();
    let m_eps = DMatrix::from_fn(n, n, |i, j| mat[(i, j)] * scale(i) * scale(j));
    (q_eps, m_eps)
}

#[allow(clippy::too_many_arguments)]
pub fn hamiltonian_hp_eps(
    z: f64,
    q: &[f64],
    mat: &DMatrix<f64>,
    p_exponent: f64,
    m: usize,
    eps: f64,
    search: Search<'_>,
) -> Result<HamiltonianValue> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidEpsilon(eps));
    }
    let (q_eps, m_eps) = eps_scalings(q, mat, m, eps);
    hamiltonian_hp(z, &q_eps, &m_eps, p_exponent, search)
}

/// `-(p-1)/z |q|^2 + Tr(M) + lambda_max((p-1)/z q q^T - M)`.
pub fn closed_form_hp(z: f64, q: &[f64], mat: &DMatrix<f64>, p_exponent: f64) -> f64 {
    let c = (p_exponent - 1.0) / z;
    let qv = DVector::from_column_slice(q);
    -c * qv.norm_squared() + mat.trace() + linalg::lambda_max(&(&qv * qv.transpose() * c - mat))
}

/// Central difference of `lambda_max` along `H` at step `delta`.
pub const DERIVATIVE_STEP: f64 = 1e-5;
/// Minimum gap between the two largest eigenvalues.
pub const MIN_GAP: f64 = 1e-6;

/// `((lambda_max(S + dH) - lambda_max(S - dH)) / 2d, <H a, a>)` with `a` the
/// unit top eigenvector of `S`.
pub fn lambda_max_derivative_check(s: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<(f64, f64)> {
    let n = s.nrows();
    check_square(n, s)?;
    check_square(n, h)?;
    let eig = linalg::sym_eigen(s);
    if n > 1 {
        let gap = eig.values[n - 1] - eig.values[n - 2];
        if gap <= MIN_GAP {
            return Err(Error::EigenGap { gap });
        }
    }
    let a = eig.top_vector();
    let fd = (linalg::lambda_max(&(s + h * DERIVATIVE_STEP)) - linalg::lambda_max(&(s - h * DERIVATIVE_STEP)))
        / (2.0 * DERIVATIVE_STEP);
    Ok((fd, (h * &a).dot(&a)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::directions;
    use approx::assert_relative_eq;

    #[test]
    fn h_eps_heisenberg_diag() {
        let ef = Frame::heisenberg1().with_epsilon(1.0).unwrap();
        // sigma_eps = I at the origin, so S itself is the reduced matrix
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 0.0]));
        let dirs = directions::fibonacci_sphere(720);
        let r = hamiltonian_h_eps(
            &ef,
            &[0.0; 3],
            &[0.3, 0.1, -0.2],
            &s,
            Search {
                directions: &dirs,
                refine: true,
            },
        )
        .unwrap();
        assert_relative_eq!(r.value, -1.0, epsilon = 1e-10);
        assert!(r.direction[0].abs() > 1.0 - 1e-6);
        assert_relative_eq!(closed_form_h_eps(&ef, &[0.0; 3], &[0.0; 3], &s), -1.0, epsilon = 1e-12);
        let zero = hamiltonian_h_eps(
            &ef,
            &[0.0; 3],
            &[0.0; 3],
            &DMatrix::zeros(3, 3),
            Search {
                directions: &dirs,
                refine: false,
            },
        )
        .unwrap();
        assert_eq!(zero.value, 0.0);
    }

    #[test]
    fn h_matches_closed_form_with_connection() {
        // X1 = (1, 0), X2 = (x1, 1): nonzero symmetric connection for p = (1, 0)
        let f = Frame::from_tables(
            2,
            &[
                vec![vec![(1.0, vec![0, 0])], vec![]],
                vec![vec![(1.0, vec![1, 0])], vec![(1.0, vec![0, 0])]],
            ],
        )
        .unwrap();
        let ef = f.with_epsilon(1.0).unwrap();
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, -0.5]);
        let dirs = directions::circle(256);
        let x = [0.7, 0.2];
        let p = [1.0, 0.4];
        let r = hamiltonian_h_eps(
            &ef,
            &x,
            &p,
            &s,
            Search {
                directions: &dirs,
                refine: true,
            },
        )
        .unwrap();
        assert_relative_eq!(r.value, closed_form_h_eps(&ef, &x, &p, &s), epsilon = 1e-10);
    }

    #[test]
    fn hp_examples() {
        let dirs = directions::circle(256);
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0]));
        let r = hamiltonian_hp(
            1.0,
            &[1.0, 0.0],
            &m,
            2.0,
            Search {
                directions: &dirs,
                refine: false,
            },
        )
        .unwrap();
        assert_relative_eq!(r.value, 1.0, epsilon = 1e-14);
        assert!(r.direction[0].abs() > 1.0 - 1e-12);
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, -1.0]);
        let r = hamiltonian_hp(
            0.7,
            &[0.0, 0.0],
            &m,
            3.0,
            Search {
                directions: &dirs,
                refine: true,
            },
        )
        .unwrap();
        assert_relative_eq!(r.value, m.trace() - linalg::lambda_min(&m), epsilon = 1e-10);
        assert!(hamiltonian_hp(
            0.0,
            &[0.0, 0.0],
            &m,
            3.0,
            Search {
                directions: &dirs,
                refine: false
            }
        )
        .is_err());
        assert!(hamiltonian_hp(
            1.0,
            &[0.0, 0.0],
            &m,
            1.0,
            Search {
                directions: &dirs,
                refine: false
            }
        )
        .is_err());
    }

    #[test]
    fn hp_eps_identity_at_one() {
        let dirs = directions::fibonacci_sphere(200);
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, -0.4, 0.2, 0.5, 0.3, -0.4, 0.3, -1.0]);
        let q = [0.3, -0.2, 0.9];
        let a = hamiltonian_hp(
            1.5,
            &q,
            &m,
            4.0,
            Search {
                directions: &dirs,
                refine: false,
            },
        )
        .unwrap();
        let b = hamiltonian_hp_eps(
            1.5,
            &q,
            &m,
            4.0,
            2,
            1.0,
            Search {
                directions: &dirs,
                refine: false,
            },
        )
        .unwrap();
        assert_eq!(a, b);
        let (qe, me) = eps_scalings(&q, &m, 2, 0.5);
        assert_eq!(qe, vec![0.3, -0.2, 0.45]);
        assert_eq!(me[(0, 2)], -0.2);
        assert_eq!(me[(2, 2)], -0.25);
        assert_eq!(me[(0, 1)], 0.2);
    }

    #[test]
    fn lambda_max_derivative_examples() {
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
        let (fd, ip) = lambda_max_derivative_check(&s, &h).unwrap();
        assert_relative_eq!(fd, 1.0, epsilon = 1e-9);
        assert_relative_eq!(ip, 1.0, epsilon = 1e-14);
        let (fd, ip) = lambda_max_derivative_check(&s, &DMatrix::zeros(2, 2)).unwrap();
        assert_eq!((fd, ip), (0.0, 0.0));
        let tied = DMatrix::identity(2, 2);
        assert!(matches!(
            lambda_max_derivative_check(&tied, &h),
            Err(Error::EigenGap { .. })
        ));
    }
}
