use crate::error::{Error, Result};
use crate::levelset::{FieldSource, ScalarField};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// Uniform Cartesian grid, row-major with the last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    lo: Vec<f64>,
    hi: Vec<f64>,
    nodes: Vec<usize>,
    h: Vec<f64>,
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, nodes: Vec<usize>) -> Result<Self> {
        let dim = lo.len();
        if dim == 0 || hi.len() != dim || nodes.len() != dim {
            return Err(Error::InvalidArgument(format!(
                "grid needs matching bounds and node counts, got {} / {} / {}",
                lo.len(),
                hi.len(),
                nodes.len()
            )));
        }
        for k in 0..dim {
            if !(lo[k].is_finite() && hi[k].is_finite() && lo[k] < hi[k]) {
                return Err(Error::InvalidArgument(format!(
                    "axis {} bounds must be finite with lo < hi, got [{}, {}]",
                    k + 1,
                    lo[k],
                    hi[k]
                )));
            }
            if nodes[k] < 3 {
                return Err(Error::InvalidArgument(format!(
                    "axis {} needs at least 3 nodes, got {}",
                    k + 1,
                    nodes[k]
                )));
            }
        }
        let h = (0..dim).map(|k| (hi[k] - lo[k]) / (nodes[k] - 1) as f64).collect();
        let mut strides = vec![1; dim];
        for k in (0..dim - 1).rev() {
            strides[k] = strides[k + 1] * nodes[k + 1];
        }
        Ok(Self {
            lo,
            hi,
            nodes,
            h,
            strides,
        })
    }

    /// Same bounds and node count on every axis.
    pub fn cube(dim: usize, lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim], vec![nodes; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn spacing(&self) -> &[f64] {
        &self.h
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn h_min(&self) -> f64 {
        self.h.iter().copied().fold(f64::INFINITY, f64::min)
    }

    #[inline]
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        if i + 1 == self.nodes[axis] {
            self.hi[axis]
        } else {
            self.lo[axis] + i as f64 * self.h[axis]
        }
    }

    pub fn multi_index(&self, mut idx: usize, out: &mut [usize]) {
        for k in 0..self.dim() {
            out[k] = idx / self.strides[k];
            idx %= self.strides[k];
        }
    }

    pub fn point(&self, idx: usize, out: &mut [f64]) {
        let mut rem = idx;
        for k in 0..self.dim() {
            let i = rem / self.strides[k];
            rem %= self.strides[k];
            out[k] = self.coord(k, i);
        }
    }

    /// True when `idx` has no neighbour missing along any axis.
    pub fn is_interior(&self, idx: usize) -> bool {
        let mut rem = idx;
        for k in 0..self.dim() {
            let i = rem / self.strides[k];
            rem %= self.strides[k];
            if i == 0 || i + 1 == self.nodes[k] {
                return false;
            }
        }
        true
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().enumerate().all(|(k, &v)| v >= self.lo[k] && v <= self.hi[k])
    }
}

/// Values of the level-set function on a grid at a time stamp.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSetField {
    grid: Arc<Grid>,
    values: Vec<f64>,
    time: f64,
}

impl LevelSetField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { node, time });
        }
        Ok(Self { grid, values, time })
    }

    pub fn from_fn(grid: Arc<Grid>, time: f64, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut x = vec![0.0; grid.dim()];
        let values = (0..grid.len())
            .map(|idx| {
                grid.point(idx, &mut x);
                f(&x)
            })
            .collect();
        Self::new(grid, values, time)
    }

    pub fn sample(grid: Arc<Grid>, field: &dyn ScalarField, time: f64) -> Result<Self> {
        if field.dim() != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: grid.dim(),
                got: field.dim(),
            });
        }
        Self::from_fn(grid, time, |x| field.value(time, x))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub(crate) fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Largest absolute nodewise difference, optionally restricted to
    /// interior nodes.
    pub fn max_abs_diff(&self, other: &LevelSetField, interior_only: bool) -> f64 {
        assert_eq!(self.values.len(), other.values.len(), "fields on different grids");
        self.values
            .iter()
            .zip(&other.values)
            .enumerate()
            .filter(|(idx, _)| !interior_only || self.grid.is_interior(*idx))
            .map(|(_, (a, b))| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Multilinear interpolation; coordinates outside the box are clamped,
    /// which matches constant extrapolation of the boundary values.
    pub fn interpolate_clamped(&self, x: &[f64]) -> f64 {
        let g = &*self.grid;
        let n = g.dim();
        let mut base = 0usize;
        let mut frac = [0.0f64; crate::frames::MAX_DIM];
        let mut step = [0usize; crate::frames::MAX_DIM];
        for k in 0..n {
            let s = ((x[k] - g.lo[k]) / g.h[k]).clamp(0.0, (g.nodes[k] - 1) as f64);
            let mut i = s.floor() as usize;
            if i + 1 >= g.nodes[k] {
                i = g.nodes[k] - 2;
            }
            frac[k] = s - i as f64;
            step[k] = g.strides[k];
            base += i * g.strides[k];
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut idx = base;
            for k in 0..n {
                if corner >> k & 1 == 1 {
                    w *= frac[k];
                    idx += step[k];
                } else {
                    w *= 1.0 - frac[k];
                }
            }
            if w != 0.0 {
                acc += w * self.values[idx];
            }
        }
        acc
    }

    /// Multilinear interpolation; errors for points outside the grid box.
    pub fn interpolate(&self, x: &[f64]) -> Result<f64> {
        if !self.grid.contains(x) {
            return Err(Error::OutsideGrid(x.to_vec()));
        }
        Ok(self.interpolate_clamped(x))
    }
}

/// Central differences on the interpolant with the grid spacing; at nodes
/// these are exactly the stencils of the explicit scheme.
impl ScalarField for LevelSetField {
    fn dim(&self) -> usize {
        self.grid.dim()
    }

    fn value(&self, _t: f64, x: &[f64]) -> f64 {
        self.interpolate_clamped(x)
    }

    fn gradient(&self, _t: f64, x: &[f64]) -> DVector<f64> {
        let n = self.dim();
        let mut y = x.to_vec();
        DVector::from_iterator(
            n,
            (0..n).map(|k| {
                let h = self.grid.h[k];
                y[k] = x[k] + h;
                let up = self.interpolate_clamped(&y);
                y[k] = x[k] - h;
                let um = self.interpolate_clamped(&y);
                y[k] = x[k];
                (up - um) / (2.0 * h)
            }),
        )
    }

    fn hessian(&self, _t: f64, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let h = &self.grid.h;
        let u0 = self.interpolate_clamped(x);
        let mut y = x.to_vec();
        let mut out = DMatrix::zeros(n, n);
        for k in 0..n {
            y[k] = x[k] + h[k];
            let up = self.interpolate_clamped(&y);
            y[k] = x[k] - h[k];
            let um = self.interpolate_clamped(&y);
            y[k] = x[k];
            out[(k, k)] = (up - 2.0 * u0 + um) / (h[k] * h[k]);
            for l in k + 1..n {
                let mut corner = |sk: f64, sl: f64| {
                    y[k] = x[k] + sk * h[k];
                    y[l] = x[l] + sl * h[l];
                    let v = self.interpolate_clamped(&y);
                    y[k] = x[k];
                    y[l] = x[l];
                    v
                };
                let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                    / (4.0 * h[k] * h[l]);
                out[(k, l)] = v;
                out[(l, k)] = v;
            }
        }
        out
    }

    fn source(&self) -> FieldSource {
        FieldSource::GridSampled
    }

    fn spacing(&self) -> Option<&[f64]> {
        Some(&self.grid.h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(vec![0.0], vec![1.0], vec![2]).is_err());
        assert!(Grid::new(vec![1.0], vec![0.0], vec![5]).is_err());
        assert!(Grid::new(vec![0.0, 0.0], vec![1.0], vec![5, 5]).is_err());
    }

    #[test]
    fn indexing_round_trip() {
        let g = Grid::new(vec![0.0, -1.0, 2.0], vec![1.0, 1.0, 3.0], vec![3, 5, 4]).unwrap();
        assert_eq!(g.strides(), &[20, 4, 1]);
        let mut mi = [0; 3];
        g.multi_index(27, &mut mi);
        assert_eq!(mi, [1, 1, 3]);
        let mut x = [0.0; 3];
        g.point(27, &mut x);
        assert_eq!(x, [0.5, -0.5, 3.0]);
        assert!(g.is_interior(20 + 4 + 1));
        assert!(!g.is_interior(27));
    }

    #[test]
    fn interpolation_is_exact_for_multilinear() {
        let g = Arc::new(Grid::cube(2, -1.0, 1.0, 5).unwrap());
        let f = LevelSetField::from_fn(g, 0.0, |x| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1]).unwrap();
        let x = [0.13, -0.71];
        assert_relative_eq!(
            f.interpolate(&x).unwrap(),
            1.0 + 0.26 + 0.71 - 0.5 * 0.13 * 0.71,
            epsilon = 1e-14
        );
        assert!(f.interpolate(&[1.5, 0.0]).is_err());
    }

    #[test]
    fn grid_derivatives_match_quadratic() {
        let g = Arc::new(Grid::cube(2, -1.0, 1.0, 21).unwrap());
        let f = LevelSetField::from_fn(g, 0.0, |x| x[0] * x[0] + 3.0 * x[0] * x[1]).unwrap();
        let x = [0.2, -0.3];
        let grad = f.gradient(0.0, &x);
        assert_relative_eq!(grad[0], 0.4 - 0.9, epsilon = 1e-12);
        assert_relative_eq!(grad[1], 0.6, epsilon = 1e-12);
        let h = f.hessian(0.0, &x);
        assert_relative_eq!(h[(0, 0)], 2.0, epsilon = 1e-9);
        assert_relative_eq!(h[(0, 1)], 3.0, epsilon = 1e-9);
        assert_relative_eq!(h[(1, 1)], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn non_finite_values_rejected() {
        let g = Arc::new(Grid::cube(1, 0.0, 1.0, 3).unwrap());
        assert!(matches!(
            LevelSetField::new(g, vec![0.0, f64::NAN, 1.0], 0.0),
            Err(Error::NonFinite { node: 1, .. })
        ));
    }
}
