//! Horizontal and approximated differential quantities of a level-set
//! function: gradients, symmetrised horizontal Hessians, normals, curvatures
//! and characteristic-point detection.

use crate::error::{Error, Result};
use crate::frames::{EpsilonFrame, Frame};
use crate::poly::Polynomial;
use nalgebra::{DMatrix, DVector};
use std::fmt;
use std::sync::Arc;

/// Relative factor in the characteristic-point tolerance.
pub const CHAR_TOL_FACTOR: f64 = 1e-10;

/// `tol_char = 1e-10 * (1 + |Du|)`.
#[inline]
pub fn tol_char(grad_norm: f64) -> f64 {
    CHAR_TOL_FACTOR * (1.0 + grad_norm)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldSource {
    Analytic,
    GridSampled,
}

/// A scalar function of `(t, x)` with first and second spatial derivatives.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, t: f64, x: &[f64]) -> f64;
    fn gradient(&self, t: f64, x: &[f64]) -> DVector<f64>;
    /// Exactly symmetric.
    fn hessian(&self, t: f64, x: &[f64]) -> DMatrix<f64>;
    fn source(&self) -> FieldSource;
    /// Finite-difference step for grid-sampled fields.
    fn spacing(&self) -> Option<&[f64]> {
        None
    }
}

type ValueFn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(f64, &[f64]) -> DVector<f64> + Send + Sync;
type HessFn = dyn Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync;

/// A field with closed-form derivatives.
#[derive(Clone)]
pub struct AnalyticField {
    dim: usize,
    value: Arc<ValueFn>,
    gradient: Arc<GradFn>,
    hessian: Arc<HessFn>,
}

impl fmt::Debug for AnalyticField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticField")
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl AnalyticField {
    pub fn new(
        dim: usize,
        value: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(f64, &[f64]) -> DVector<f64> + Send + Sync + 'static,
        hessian: impl Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: Arc::new(hessian),
        }
    }

    /// Time-independent polynomial with symbolic derivatives.
    pub fn polynomial(u: Polynomial) -> Self {
        let n = u.nvars();
        let grad: Vec<Polynomial> = (0..n).map(|k| u.derivative(k)).collect();
        let hess: Vec<Polynomial> = (0..n)
            .flat_map(|r| {
                let g = grad[r].clone();
                (0..n).map(move |c| g.derivative(c))
            })
            .collect();
        let grad2 = grad.clone();
        Self::new(
            n,
            move |_, x| u.eval(x),
            move |_, x| DVector::from_iterator(n, grad2.iter().map(|p| p.eval(x))),
            move |_, x| {
                let mut h = DMatrix::from_fn(n, n, |r, c| hess[r * n + c].eval(x));
                symmetrize(&mut h);
                h
            },
        )
    }

    /// `u(x) = x_k` on R^dim.
    pub fn coordinate(dim: usize, k: usize) -> Self {
        Self::polynomial(Polynomial::var(dim, k))
    }

    /// `u(x) = sum_{k in axes} x_k^2 - r0^2`.
    pub fn quadric(dim: usize, axes: &[usize], r0: f64) -> Self {
        let u = axes.iter().fold(Polynomial::constant(dim, -r0 * r0), |acc, &k| {
            let v = Polynomial::var(dim, k);
            acc.add(&v.mul(&v))
        });
        Self::polynomial(u)
    }
}

impl ScalarField for AnalyticField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, t: f64, x: &[f64]) -> f64 {
        (self.value)(t, x)
    }
    fn gradient(&self, t: f64, x: &[f64]) -> DVector<f64> {
        (self.gradient)(t, x)
    }
    fn hessian(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        (self.hessian)(t, x)
    }
    fn source(&self) -> FieldSource {
        FieldSource::Analytic
    }
}

pub(crate) fn symmetrize(h: &mut DMatrix<f64>) {
    let n = h.nrows();
    for r in 0..n {
        for c in r + 1..n {
            let s = 0.5 * (h[(r, c)] + h[(c, r)]);
            h[(r, c)] = s;
            h[(c, r)] = s;
        }
    }
}

/// Horizontal gradient, symmetrised horizontal Hessian and characteristic flag.
#[derive(Clone, Debug, PartialEq)]
pub struct HorizontalJet {
    pub hgrad: DVector<f64>,
    pub hhess: DMatrix<f64>,
    pub characteristic: bool,
}

fn check_dim(expected: usize, field: &dyn ScalarField, x: &[f64]) -> Result<()> {
    if field.dim() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: field.dim(),
        });
    }
    if x.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: x.len() });
    }
    Ok(())
}

/// `(X_1 u, .., X_m u)` at `(t, x)`.
pub fn horizontal_gradient(frame: &Frame, field: &dyn ScalarField, t: f64, x: &[f64]) -> Result<DVector<f64>> {
    check_dim(frame.dim(), field, x)?;
    Ok(frame.sigma(x) * field.gradient(t, x))
}

/// `sigma_eps(x) Du(t, x)`.
pub fn approx_gradient(eframe: &EpsilonFrame, field: &dyn ScalarField, t: f64, x: &[f64]) -> Result<DVector<f64>> {
    check_dim(eframe.dim(), field, x)?;
    Ok(eframe.sigma_eps(x) * field.gradient(t, x))
}

/// `sigma D^2u sigma^T + A(x, Du)`, m x m.
pub fn horizontal_sym_hessian(frame: &Frame, field: &dyn ScalarField, t: f64, x: &[f64]) -> Result<DMatrix<f64>> {
    check_dim(frame.dim(), field, x)?;
    let s = frame.sigma(x);
    let p = field.gradient(t, x);
    let mut h = &s * field.hessian(t, x) * s.transpose() + frame.covariant_matrix(x, p.as_slice());
    symmetrize(&mut h);
    Ok(h)
}

/// Entry `(i, j)` is `(X_i^eps X_j^eps u + X_j^eps X_i^eps u) / 2`, computed as
/// `sigma_eps D^2u sigma_eps^T + A_eps(x, Du)`.
pub fn sym_horizontal_hessian(
    eframe: &EpsilonFrame,
    field: &dyn ScalarField,
    t: f64,
    x: &[f64],
) -> Result<DMatrix<f64>> {
    check_dim(eframe.dim(), field, x)?;
    let s = eframe.sigma_eps(x);
    let p = field.gradient(t, x);
    let mut h = &s * field.hessian(t, x) * s.transpose() + eframe.covariant_matrix_eps(x, p.as_slice());
    symmetrize(&mut h);
    Ok(h)
}

/// True when `|X u| < tol_char(|Du|)`.
pub fn is_characteristic(frame: &Frame, field: &dyn ScalarField, t: f64, x: &[f64]) -> Result<bool> {
    check_dim(frame.dim(), field, x)?;
    let p = field.gradient(t, x);
    Ok((frame.sigma(x) * &p).norm() < tol_char(p.norm()))
}

pub fn horizontal_jet(frame: &Frame, field: &dyn ScalarField, t: f64, x: &[f64]) -> Result<HorizontalJet> {
    let hgrad = horizontal_gradient(frame, field, t, x)?;
    let hhess = horizontal_sym_hessian(frame, field, t, x)?;
    let characteristic = hgrad.norm() < tol_char(field.gradient(t, x).norm());
    Ok(HorizontalJet {
        hgrad,
        hhess,
        characteristic,
    })
}

pub fn approx_jet(eframe: &EpsilonFrame, field: &dyn ScalarField, t: f64, x: &[f64]) -> Result<HorizontalJet> {
    let hgrad = approx_gradient(eframe, field, t, x)?;
    let hhess = sym_horizontal_hessian(eframe, field, t, x)?;
    let characteristic = hgrad.norm() < tol_char(field.gradient(t, x).norm());
    Ok(HorizontalJet {
        hgrad,
        hhess,
        characteristic,
    })
}

/// Unit horizontal normal `X u / |X u|`.
pub fn horizontal_normal(frame: &Frame, field: &dyn ScalarField, t: f64, x: &[f64]) -> Result<DVector<f64>> {
    let g = horizontal_gradient(frame, field, t, x)?;
    let norm = g.norm();
    let tol = tol_char(field.gradient(t, x).norm());
    if norm < tol {
        return Err(Error::Characteristic { norm, tol });
    }
    Ok(g / norm)
}

fn nonzero_gradient(field: &dyn ScalarField, t: f64, x: &[f64]) -> Result<DVector<f64>> {
    let p = field.gradient(t, x);
    let norm = p.norm();
    if !(norm > 0.0) {
        return Err(Error::ZeroGradient { norm });
    }
    Ok(p)
}

/// Unit approximated normal `sigma_eps Du / |sigma_eps Du|`.
pub fn approx_normal(eframe: &EpsilonFrame, field: &dyn ScalarField, t: f64, x: &[f64]) -> Result<DVector<f64>> {
    check_dim(eframe.dim(), field, x)?;
    let p = nonzero_gradient(field, t, x)?;
    let v = eframe.sigma_eps(x) * p;
    let norm = v.norm();
    Ok(v / norm)
}

/// `(Tr H - <H n, n>) / |g|` for a symmetric `H`, gradient `g` and `n = g / |g|`.
fn divergence_of_normal(h: &DMatrix<f64>, g: &DVector<f64>) -> f64 {
    let norm = g.norm();
    let n = g / norm;
    (h.trace() - (h * &n).dot(&n)) / norm
}

/// Divergence of the approximated normal along the epsilon-frame,
/// `sum_i X_i^eps (n_eps)_i`; the completion terms carry the factor `eps`
/// both from the field and from the normal component.
///
/// Analytic fields use exact second derivatives; grid fields use nested
/// central differences of the approximated normal.
pub fn approx_curvature(eframe: &EpsilonFrame, field: &dyn ScalarField, t: f64, x: &[f64]) -> Result<f64> {
    check_dim(eframe.dim(), field, x)?;
    let p = nonzero_gradient(field, t, x)?;
    match (field.source(), field.spacing()) {
        (FieldSource::GridSampled, Some(h)) => nested_fd_curvature(eframe, field, t, x, h),
        _ => {
            let hess = sym_horizontal_hessian(eframe, field, t, x)?;
            let g = eframe.sigma_eps(x) * p;
            Ok(divergence_of_normal(&hess, &g))
        }
    }
}

fn nested_fd_curvature(eframe: &EpsilonFrame, field: &dyn ScalarField, t: f64, x: &[f64], h: &[f64]) -> Result<f64> {
    let n = eframe.dim();
    let normal_at = |y: &[f64]| -> Result<DVector<f64>> {
        let v = eframe.sigma_eps(y) * nonzero_gradient(field, t, y)?;
        let norm = v.norm();
        Ok(v / norm)
    };
    // dn[k] = d n_eps / d x_k
    let mut dn = Vec::with_capacity(n);
    let mut y = x.to_vec();
    for k in 0..n {
        y[k] = x[k] + h[k];
        let plus = normal_at(&y)?;
        y[k] = x[k] - h[k];
        let minus = normal_at(&y)?;
        y[k] = x[k];
        dn.push((plus - minus) / (2.0 * h[k]));
    }
    let s = eframe.sigma_eps(x);
    let mut k_eps = 0.0;
    for i in 0..n {
        for (k, d) in dn.iter().enumerate() {
            k_eps += s[(i, k)] * d[i];
        }
    }
    Ok(k_eps)
}

/// Horizontal mean curvature `(Tr H* - <H* n, n>) / |X u|` with the m x m
/// symmetrised horizontal Hessian.
pub fn horizontal_curvature(frame: &Frame, field: &dyn ScalarField, t: f64, x: &[f64]) -> Result<f64> {
    let g = horizontal_gradient(frame, field, t, x)?;
    let tol = tol_char(field.gradient(t, x).norm());
    if g.norm() < tol {
        return Err(Error::Characteristic { norm: g.norm(), tol });
    }
    let hess = horizontal_sym_hessian(frame, field, t, x)?;
    Ok(divergence_of_normal(&hess, &g))
}
