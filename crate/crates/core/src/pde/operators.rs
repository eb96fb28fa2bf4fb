//! Pointwise level-set operators and their semicontinuous envelopes.
//!
//! Both operators have the form `-Tr(Sbar) + <Sbar n, n>` with
//! `Sbar = sigma S sigma^T + A(x, p)` and `n = sigma p / |sigma p|`; the
//! forward equation is `u_t = -F`.

use crate::error::{Error, Result};
use crate::frames::{EpsilonFrame, Frame};
use crate::levelset::tol_char;
use crate::linalg;
use nalgebra::{DMatrix, DVector};

/// Upper end of the linear blend between the regular and envelope branches,
/// as a multiple of the characteristic tolerance.
pub const BLEND_FACTOR: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    Regular,
    UpperEnvelope,
    LowerEnvelope,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorEval {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub s: DMatrix<f64>,
    pub branch: Branch,
    pub value: f64,
}

fn check_inputs(dim: usize, x: &[f64], p: &[f64], s: &DMatrix<f64>) -> Result<()> {
    for len in [x.len(), p.len(), s.nrows(), s.ncols()] {
        if len != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: len,
            });
        }
    }
    Ok(())
}

/// `sigma S sigma^T + A(x, p)` for the horizontal frame (m x m).
pub fn reduced_hessian(frame: &Frame, x: &[f64], p: &[f64], s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_inputs(frame.dim(), x, p, s)?;
    let sig = frame.sigma(x);
    Ok(&sig * s * sig.transpose() + frame.covariant_matrix(x, p))
}

/// `sigma_eps S sigma_eps^T + A_eps(x, p)` (N x N).
pub fn reduced_hessian_eps(eframe: &EpsilonFrame, x: &[f64], p: &[f64], s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_inputs(eframe.dim(), x, p, s)?;
    let sig = eframe.sigma_eps(x);
    Ok(&sig * s * sig.transpose() + eframe.covariant_matrix_eps(x, p))
}

fn regular(sbar: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    let vv = v.norm_squared();
    -sbar.trace() + (sbar * v).dot(v) / vv
}

fn envelopes(sbar: &DMatrix<f64>) -> (f64, f64) {
    let eig = linalg::sym_eigen(sbar);
    let tr = sbar.trace();
    (-tr + eig.max(), -tr + eig.min())
}

/// Horizontal mean curvature operator; undefined where `|sigma p|` vanishes.
pub fn f_hmcf(frame: &Frame, x: &[f64], p: &[f64], s: &DMatrix<f64>) -> Result<f64> {
    let sbar = reduced_hessian(frame, x, p, s)?;
    let v = frame.sigma(x) * DVector::from_column_slice(p);
    let tol = tol_char(DVector::from_column_slice(p).norm());
    if v.norm() <= tol {
        return Err(Error::Characteristic { norm: v.norm(), tol });
    }
    Ok(regular(&sbar, &v))
}

/// `(upper, lower)`: both equal [`f_hmcf`] off the characteristic set, and
/// `-Tr + lambda_max` / `-Tr + lambda_min` of `Sbar` on it.
pub fn f_hmcf_envelopes(frame: &Frame, x: &[f64], p: &[f64], s: &DMatrix<f64>) -> Result<(f64, f64)> {
    let sbar = reduced_hessian(frame, x, p, s)?;
    let v = frame.sigma(x) * DVector::from_column_slice(p);
    if v.norm() <= tol_char(DVector::from_column_slice(p).norm()) {
        Ok(envelopes(&sbar))
    } else {
        let f = regular(&sbar, &v);
        Ok((f, f))
    }
}

/// Approximated operator; requires a nonzero Euclidean gradient.
pub fn f_eps(eframe: &EpsilonFrame, x: &[f64], p: &[f64], s: &DMatrix<f64>) -> Result<f64> {
    let sbar = reduced_hessian_eps(eframe, x, p, s)?;
    let pv = DVector::from_column_slice(p);
    let norm = pv.norm();
    if norm <= tol_char(norm) {
        return Err(Error::ZeroGradient { norm });
    }
    Ok(regular(&sbar, &(eframe.sigma_eps(x) * pv)))
}

/// `(upper, lower)` of the approximated operator; the branch switches on the
/// Euclidean gradient `|p|`.
pub fn f_eps_envelopes(eframe: &EpsilonFrame, x: &[f64], p: &[f64], s: &DMatrix<f64>) -> Result<(f64, f64)> {
    let sbar = reduced_hessian_eps(eframe, x, p, s)?;
    let pv = DVector::from_column_slice(p);
    let norm = pv.norm();
    if norm <= tol_char(norm) {
        Ok(envelopes(&sbar))
    } else {
        let f = regular(&sbar, &(eframe.sigma_eps(x) * pv));
        Ok((f, f))
    }
}

/// Evaluates the approximated operator with its branch tag; `upper` selects
/// which envelope is used at a vanishing gradient.
pub fn evaluate_eps(
    eframe: &EpsilonFrame,
    x: &[f64],
    p: &[f64],
    s: &DMatrix<f64>,
    upper: bool,
) -> Result<OperatorEval> {
    let (hi, lo) = f_eps_envelopes(eframe, x, p, s)?;
    let norm = DVector::from_column_slice(p).norm();
    let (branch, value) = if norm > tol_char(norm) {
        (Branch::Regular, hi)
    } else if upper {
        (Branch::UpperEnvelope, hi)
    } else {
        (Branch::LowerEnvelope, lo)
    };
    Ok(OperatorEval {
        x: x.to_vec(),
        p: p.to_vec(),
        s: s.clone(),
        branch,
        value,
    })
}

/// Classification of a node in the explicit scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum NodeBranch {
    Regular,
    Envelope,
    Blend,
}

/// Forward rate `-F` for a row-major symmetric `sbar` (n x n), with
/// `v = sigma_eps p`. Uses the upper envelope of `F` when `|p|` is below the
/// characteristic tolerance and blends linearly up to `BLEND_FACTOR` times it.
#[inline]
pub(crate) fn forward_rate(n: usize, sbar: &[f64], v: &[f64], pnorm: f64) -> (f64, NodeBranch) {
    let tol = tol_char(pnorm);
    let mut tr = 0.0;
    for i in 0..n {
        tr += sbar[i * n + i];
    }
    let upper_rate = || {
        let m = DMatrix::from_row_slice(n, n, &sbar[..n * n]);
        tr - linalg::lambda_max(&m)
    };
    if pnorm <= tol {
        return (upper_rate(), NodeBranch::Envelope);
    }
    let mut vv = 0.0;
    let mut q = 0.0;
    for i in 0..n {
        vv += v[i] * v[i];
        let mut row = 0.0;
        for j in 0..n {
            row += sbar[i * n + j] * v[j];
        }
        q += v[i] * row;
    }
    let reg = tr - q / vv;
    let top = BLEND_FACTOR * tol;
    if pnorm < top {
        let w = (pnorm - tol) / (top - tol);
        return (w * reg + (1.0 - w) * upper_rate(), NodeBranch::Blend);
    }
    (reg, NodeBranch::Regular)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(v))
    }

    #[test]
    fn f_hmcf_examples() {
        let e = Frame::euclidean(2).unwrap();
        assert_relative_eq!(f_hmcf(&e, &[1.0, 0.0], &[2.0, 0.0], &diag(&[2.0, 2.0])).unwrap(), -2.0);
        let h = Frame::heisenberg1();
        // sigma p = 0 for p = (x2/2, -x1/2, 1) at x = (x1, x2, .)
        let x = [0.4, -0.6, 1.0];
        let p = [-0.3, -0.2, 1.0];
        assert!(matches!(
            f_hmcf(&h, &x, &p, &diag(&[1.0, 1.0, 1.0])),
            Err(Error::Characteristic { .. })
        ));
        let r = 0.7;
        let f = f_hmcf(&h, &[r, 0.0, 0.0], &[2.0 * r, 0.0, 0.0], &diag(&[2.0, 2.0, 0.0])).unwrap();
        assert_relative_eq!(f, -2.0, epsilon = 1e-14);
    }

    #[test]
    fn f_hmcf_envelope_examples() {
        let e = Frame::euclidean(2).unwrap();
        let (u, l) = f_hmcf_envelopes(&e, &[0.0, 0.0], &[0.0, 0.0], &diag(&[1.0, -1.0])).unwrap();
        assert_relative_eq!(u, 1.0, epsilon = 1e-14);
        assert_relative_eq!(l, -1.0, epsilon = 1e-14);
        let (u, l) = f_hmcf_envelopes(&e, &[0.0, 0.0], &[1.0, 2.0], &diag(&[1.0, -1.0])).unwrap();
        assert_eq!(u, l);
        let (u, l) = f_hmcf_envelopes(&e, &[0.0, 0.0], &[0.0, 0.0], &diag(&[0.0, 0.0])).unwrap();
        assert_eq!((u, l), (0.0, 0.0));
    }

    #[test]
    fn f_eps_examples() {
        for eps in [1.0, 0.5, 0.1] {
            let ef = Frame::heisenberg1().with_epsilon(eps).unwrap();
            let r = 1.3;
            let f = f_eps(&ef, &[r, 0.0, 0.0], &[2.0 * r, 0.0, 0.0], &diag(&[2.0, 2.0, 0.0])).unwrap();
            assert_relative_eq!(f, -2.0, epsilon = 1e-14);
            let f = f_eps(&ef, &[0.3, -1.0, 2.0], &[0.0, 0.0, 1.0], &DMatrix::zeros(3, 3)).unwrap();
            assert_eq!(f, 0.0);
            let (u, l) = f_eps_envelopes(&ef, &[0.0; 3], &[0.0; 3], &DMatrix::zeros(3, 3)).unwrap();
            assert_eq!((u, l), (0.0, 0.0));
        }
        let ef = Frame::heisenberg1().with_epsilon(0.5).unwrap();
        assert!(matches!(
            f_eps(&ef, &[0.0; 3], &[0.0; 3], &DMatrix::zeros(3, 3)),
            Err(Error::ZeroGradient { .. })
        ));
    }

    #[test]
    fn f_eps_ignores_horizontal_degeneracy() {
        // p is characteristic for sigma but sigma_eps p does not vanish
        let ef = Frame::heisenberg1().with_epsilon(0.5).unwrap();
        let x = [0.4, -0.6, 1.0];
        let p = [-0.3, -0.2, 1.0];
        let eval = evaluate_eps(&ef, &x, &p, &diag(&[1.0, 2.0, 3.0]), true).unwrap();
        assert_eq!(eval.branch, Branch::Regular);
        assert!(eval.value.is_finite());
    }

    #[test]
    fn evaluate_tags_branches() {
        let ef = Frame::euclidean(2).unwrap().with_epsilon(1.0).unwrap();
        let s = diag(&[1.0, -1.0]);
        let up = evaluate_eps(&ef, &[0.0; 2], &[0.0; 2], &s, true).unwrap();
        let lo = evaluate_eps(&ef, &[0.0; 2], &[0.0; 2], &s, false).unwrap();
        assert_eq!(up.branch, Branch::UpperEnvelope);
        assert_eq!(lo.branch, Branch::LowerEnvelope);
        assert!(up.value >= lo.value);
    }

    #[test]
    fn forward_rate_blends_continuously() {
        let s = [3.0, 0.5, 0.5, 1.0];
        let v = [1.0, 0.0];
        let (r0, b0) = forward_rate(2, &s, &v, 0.0);
        assert_eq!(b0, NodeBranch::Envelope);
        let (rt, bt) = forward_rate(2, &s, &v, BLEND_FACTOR * tol_char(0.0) * 1.0001);
        assert_eq!(bt, NodeBranch::Regular);
        let tol = tol_char(1e-9);
        let (rb, bb) = forward_rate(2, &s, &v, 1e-9);
        assert_eq!(bb, NodeBranch::Blend);
        let w = (1e-9 - tol) / (BLEND_FACTOR * tol - tol);
        assert_relative_eq!(rb, w * rt + (1.0 - w) * r0, epsilon = 1e-12);
    }
}
