//! One-step generator consistency: `(E[phi(xi_dt)] - phi(x)) / dt` against
//! the exact generator `sum_ij (nu^2)_ij X_i X_j phi (x)`.

use super::{path_rng, Dynamics, Integrator, Mode};
use crate::error::{Error, Result};
use crate::levelset::ScalarField;
use crate::linalg;
use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

const SAMPLES_PER_TASK: usize = 4096;

/// Symmetrised `X_i X_j phi (x)` over the fields of `dynamics`.
pub fn second_order_matrix(dynamics: &Dynamics, field: &dyn ScalarField, x: &[f64]) -> DMatrix<f64> {
    let fields = &dynamics.fields;
    let d = fields.len();
    let p = field.gradient(0.0, x);
    let h = field.hessian(0.0, x);
    let vals: Vec<_> = fields.iter().map(|f| f.eval(x)).collect();
    let jacs: Vec<_> = fields.iter().map(|f| f.jacobian(x)).collect();
    let mut q = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            // X_i (X_j phi) = X_i^T D^2 phi X_j + <J_{X_j} X_i, D phi>
            q[(i, j)] = (&h * &vals[j]).dot(&vals[i]) + (&jacs[j] * &vals[i]).dot(&p);
        }
    }
    let qt = q.transpose();
    (q + qt) * 0.5
}

/// Exact generator of the dynamics at `x` with frozen direction `a`.
pub fn generator(dynamics: &Dynamics, field: &dyn ScalarField, x: &[f64], a: Option<&[f64]>) -> Result<f64> {
    let q = second_order_matrix(dynamics, field, x);
    match (dynamics.mode(), a) {
        (Mode::HorizontalBm, _) => Ok(0.5 * q.trace()),
        (_, None) => Err(Error::InvalidArgument("controlled generator needs a direction".into())),
        (_, Some(a)) => {
            let nu = super::extremal_control(a)?;
            Ok((&nu * &nu * q).trace())
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeakOrderRow {
    pub dt: f64,
    pub estimate: f64,
    pub exact: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeakOrderReport {
    pub rows: Vec<WeakOrderRow>,
    /// `log2(error(dt_k) / error(dt_{k+1}))` for consecutive halvings.
    pub orders: Vec<f64>,
}

impl WeakOrderReport {
    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Least-squares slope of `log error` against `log dt`.
    pub fn fitted_order(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self.rows.iter().map(|r| (r.dt.ln(), r.error.ln())).collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    }
}

/// Standard normal vectors for `paths` samples: antithetic pairs whose
/// sample second moment is whitened to the identity, so the first- and
/// second-order terms of the one-step expansion are reproduced exactly.
pub fn matched_normals(dim: usize, paths: usize, seed: u64) -> Result<Vec<f64>> {
    if paths < 2 || !paths.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "need an even number of samples, got {paths}"
        )));
    }
    let half = paths / 2;
    let mut rng = path_rng(seed, 0);
    let mut z = Vec::with_capacity(paths * dim);
    for _ in 0..half * dim {
        let v: f64 = StandardNormal.sample(&mut rng);
        z.push(v);
    }
    let mut c = DMatrix::<f64>::zeros(dim, dim);
    for row in z.chunks(dim) {
        for i in 0..dim {
            for j in 0..dim {
                c[(i, j)] += row[i] * row[j];
            }
        }
    }
    c /= half as f64;
    let l = linalg::cholesky(&c).ok_or_else(|| Error::InvalidArgument("degenerate sample covariance".into()))?;
    for row in z.chunks_mut(dim) {
        linalg::forward_substitute(&l, row);
    }
    let neg: Vec<f64> = z.iter().map(|v| -v).collect();
    z.extend(neg);
    Ok(z)
}

/// One-step estimates of the generator at each `dt`, sharing the same
/// normals across step sizes.
#[allow(clippy::too_many_arguments)]
pub fn weak_order_check(
    dynamics: &Dynamics,
    field: &dyn ScalarField,
    x: &[f64],
    a: Option<&[f64]>,
    dts: &[f64],
    paths: usize,
    seed: u64,
    integrator: Integrator,
) -> Result<WeakOrderReport> {
    if dts.is_empty() || dts.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InvalidArgument("step sizes must be positive".into()));
    }
    let d = dynamics.noise_dim();
    let n = dynamics.dim();
    let exact = generator(dynamics, field, x, a)?;
    let z = matched_normals(d, paths, seed)?;
    let phi0 = field.value(0.0, x);
    let mut rows = Vec::with_capacity(dts.len());
    for &dt in dts {
        let sq = dt.sqrt();
        let partial: Vec<f64> = z
            .par_chunks(d * SAMPLES_PER_TASK)
            .map(|block| {
                let mut acc = 0.0;
                let mut y = vec![0.0; n];
                let mut db = vec![0.0; d];
                for row in block.chunks(d) {
                    y.copy_from_slice(x);
                    for i in 0..d {
                        db[i] = sq * row[i];
                    }
                    dynamics.step(&mut y, &db, a, integrator);
                    acc += field.value(0.0, &y) - phi0;
                }
                acc
            })
            .collect();
        let estimate = partial.iter().sum::<f64>() / paths as f64 / dt;
        rows.push(WeakOrderRow {
            dt,
            estimate,
            exact,
            error: (estimate - exact).abs(),
        });
    }
    let orders = rows
        .windows(2)
        .map(|w| (w[0].error / w[1].error).ln() / (w[0].dt / w[1].dt).ln())
        .collect();
    Ok(WeakOrderReport { rows, orders })
}
