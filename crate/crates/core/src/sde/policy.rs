//! Extremal controls `nu = I - a a^T` and the policy families selecting `a`.

use crate::error::{Error, Result};
use crate::frames::{EpsilonFrame, Frame};
use crate::levelset::ScalarField;
use nalgebra::{DMatrix, DVector};
use std::fmt;
use std::sync::Arc;

/// Tolerance on `| |a| - 1 |` for control directions.
pub const UNIT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PolicyFamily {
    Constant,
    GridTable,
    GradientOrthogonal,
}

impl PolicyFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyFamily::Constant => "constant",
            PolicyFamily::GridTable => "grid-table",
            PolicyFamily::GradientOrthogonal => "gradient-orthogonal",
        }
    }
}

/// A rule `(s, y) -> a` with `|a| = 1`.
pub trait ControlPolicy: Send + Sync {
    fn id(&self) -> &str;
    fn family(&self) -> PolicyFamily;
    /// Length of `a`.
    fn dim(&self) -> usize;
    fn direction(&self, s: f64, y: &[f64], out: &mut [f64]);
}

fn check_unit(a: &[f64]) -> Result<()> {
    let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !((norm - 1.0).abs() <= 1e3 * UNIT_TOL) {
        return Err(Error::NonUnitDirection(norm));
    }
    Ok(())
}

/// `nu = I - a a^T`, the orthogonal projection killing `a`.
pub fn extremal_control(a: &[f64]) -> Result<DMatrix<f64>> {
    check_unit(a)?;
    let v = DVector::from_column_slice(a);
    Ok(DMatrix::identity(a.len(), a.len()) - &v * v.transpose())
}

/// Same `a` at every `(s, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantPolicy {
    id: String,
    a: Vec<f64>,
}

impl ConstantPolicy {
    pub fn new(id: impl Into<String>, a: Vec<f64>) -> Result<Self> {
        check_unit(&a)?;
        Ok(Self { id: id.into(), a })
    }

    pub fn direction_vector(&self) -> &[f64] {
        &self.a
    }
}

impl ControlPolicy for ConstantPolicy {
    fn id(&self) -> &str {
        &self.id
    }
    fn family(&self) -> PolicyFamily {
        PolicyFamily::Constant
    }
    fn dim(&self) -> usize {
        self.a.len()
    }
    fn direction(&self, _s: f64, _y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.a);
    }
}

/// Piecewise-constant lookup on a space-time box: `time_bins` equal slabs of
/// `[t0, t1]` times equal cells of `[lo, hi]` along `axes`. Points outside
/// the box use the nearest cell.
#[derive(Clone, Debug, PartialEq)]
pub struct GridTablePolicy {
    id: String,
    dim: usize,
    t0: f64,
    t1: f64,
    time_bins: usize,
    axes: Vec<usize>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    bins: Vec<usize>,
    table: Vec<Vec<f64>>,
}

impl GridTablePolicy {
    /// Table initialised with `fill` in every cell.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: impl Into<String>,
        (t0, t1): (f64, f64),
        time_bins: usize,
        axes: Vec<usize>,
        lo: Vec<f64>,
        hi: Vec<f64>,
        bins: Vec<usize>,
        fill: Vec<f64>,
    ) -> Result<Self> {
        check_unit(&fill)?;
        if !(t1 > t0) || time_bins == 0 {
            return Err(Error::InvalidArgument("grid-table needs t1 > t0 and time bins".into()));
        }
        if axes.len() != lo.len() || axes.len() != hi.len() || axes.len() != bins.len() {
            return Err(Error::InvalidArgument(
                "grid-table axes, bounds and bins differ in length".into(),
            ));
        }
        if bins.contains(&0) || lo.iter().zip(&hi).any(|(l, h)| !(h > l)) {
            return Err(Error::InvalidArgument("grid-table cells must be non-empty".into()));
        }
        let cells = time_bins * bins.iter().product::<usize>();
        Ok(Self {
            id: id.into(),
            dim: fill.len(),
            t0,
            t1,
            time_bins,
            axes,
            lo,
            hi,
            bins,
            table: vec![fill; cells],
        })
    }

    pub fn cells(&self) -> usize {
        self.table.len()
    }

    pub fn cell_direction(&self, cell: usize) -> &[f64] {
        &self.table[cell]
    }

    pub fn set_cell(&mut self, cell: usize, a: Vec<f64>) -> Result<()> {
        check_unit(&a)?;
        if a.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: a.len(),
            });
        }
        self.table[cell] = a;
        Ok(())
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    fn bin(v: f64, lo: f64, hi: f64, n: usize) -> usize {
        let f = ((v - lo) / (hi - lo) * n as f64).floor();
        if f <= 0.0 {
            0
        } else {
            (f as usize).min(n - 1)
        }
    }

    pub fn cell_of(&self, s: f64, y: &[f64]) -> usize {
        let mut cell = Self::bin(s, self.t0, self.t1, self.time_bins);
        for (k, &ax) in self.axes.iter().enumerate() {
            cell = cell * self.bins[k] + Self::bin(y[ax], self.lo[k], self.hi[k], self.bins[k]);
        }
        cell
    }
}

impl ControlPolicy for GridTablePolicy {
    fn id(&self) -> &str {
        &self.id
    }
    fn family(&self) -> PolicyFamily {
        PolicyFamily::GridTable
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn direction(&self, s: f64, y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.table[self.cell_of(s, y)]);
    }
}

#[derive(Clone)]
enum GuideFrame {
    Sub(Frame),
    Eps(EpsilonFrame),
}

/// Feedback rule `a(s, y) = X phi / |X phi|` for a guide function `phi`, so
/// that `nu` removes the noise normal to the level sets of `phi`. Falls back
/// to a fixed direction where the horizontal gradient vanishes.
#[derive(Clone)]
pub struct GradientOrthogonalPolicy {
    id: String,
    frame: GuideFrame,
    guide: Arc<dyn ScalarField>,
    fallback: Vec<f64>,
}

impl fmt::Debug for GradientOrthogonalPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GradientOrthogonalPolicy")
            .field("id", &self.id)
            .field("fallback", &self.fallback)
            .finish_non_exhaustive()
    }
}

impl GradientOrthogonalPolicy {
    /// Directions in the N-dimensional frame of the Riemannian approximation.
    pub fn eps(
        id: impl Into<String>,
        eframe: &EpsilonFrame,
        guide: Arc<dyn ScalarField>,
        fallback: Vec<f64>,
    ) -> Result<Self> {
        check_unit(&fallback)?;
        if fallback.len() != eframe.dim() || guide.dim() != eframe.dim() {
            return Err(Error::DimensionMismatch {
                expected: eframe.dim(),
                got: fallback.len().min(guide.dim()),
            });
        }
        Ok(Self {
            id: id.into(),
            frame: GuideFrame::Eps(eframe.clone()),
            guide,
            fallback,
        })
    }

    /// Directions in the m-dimensional horizontal frame.
    pub fn sub(id: impl Into<String>, frame: &Frame, guide: Arc<dyn ScalarField>, fallback: Vec<f64>) -> Result<Self> {
        check_unit(&fallback)?;
        if fallback.len() != frame.rank() || guide.dim() != frame.dim() {
            return Err(Error::DimensionMismatch {
                expected: frame.rank(),
                got: fallback.len(),
            });
        }
        Ok(Self {
            id: id.into(),
            frame: GuideFrame::Sub(frame.clone()),
            guide,
            fallback,
        })
    }
}

impl ControlPolicy for GradientOrthogonalPolicy {
    fn id(&self) -> &str {
        &self.id
    }
    fn family(&self) -> PolicyFamily {
        PolicyFamily::GradientOrthogonal
    }
    fn dim(&self) -> usize {
        self.fallback.len()
    }
    fn direction(&self, s: f64, y: &[f64], out: &mut [f64]) {
        let p = self.guide.gradient(s, y);
        let v = match &self.frame {
            GuideFrame::Sub(f) => f.sigma(y) * &p,
            GuideFrame::Eps(f) => f.sigma_eps(y) * &p,
        };
        let norm = v.norm();
        if norm > crate::levelset::tol_char(p.norm()) {
            for (o, vi) in out.iter_mut().zip(v.iter()) {
                *o = vi / norm;
            }
        } else {
            out.copy_from_slice(&self.fallback);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelset::AnalyticField;
    use approx::assert_relative_eq;

    #[test]
    fn extremal_control_examples() {
        let nu = extremal_control(&[1.0, 0.0]).unwrap();
        assert_eq!(nu, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]));
        let c = 1.0 / 3f64.sqrt();
        let nu = extremal_control(&[c, c, c]).unwrap();
        let want = DMatrix::identity(3, 3) - DMatrix::from_element(3, 3, 1.0 / 3.0);
        assert!((&nu - &want).amax() < 1e-15);
        let nu2 = &nu * &nu;
        assert_relative_eq!((DMatrix::identity(3, 3) - nu2).trace(), 1.0, epsilon = 1e-14);
        assert!(matches!(extremal_control(&[1.0, 1.0]), Err(Error::NonUnitDirection(_))));
    }

    #[test]
    fn grid_table_lookup() {
        let mut p = GridTablePolicy::new(
            "t",
            (0.0, 1.0),
            2,
            vec![0],
            vec![-1.0],
            vec![1.0],
            vec![4],
            vec![1.0, 0.0],
        )
        .unwrap();
        assert_eq!(p.cells(), 8);
        let cell = p.cell_of(0.75, &[0.1, 5.0]);
        assert_eq!(cell, 4 + 2);
        p.set_cell(cell, vec![0.0, 1.0]).unwrap();
        let mut a = [0.0; 2];
        p.direction(0.9, &[0.4, 0.0], &mut a);
        assert_eq!(a, [0.0, 1.0]);
        p.direction(0.1, &[0.4, 0.0], &mut a);
        assert_eq!(a, [1.0, 0.0]);
        // outside the box clamps to the edge cells
        assert_eq!(p.cell_of(-3.0, &[-9.0]), 0);
        assert_eq!(p.cell_of(3.0, &[9.0]), 7);
    }

    #[test]
    fn gradient_orthogonal_follows_normal() {
        let ef = Frame::heisenberg1().with_epsilon(0.5).unwrap();
        let guide: Arc<dyn ScalarField> = Arc::new(AnalyticField::quadric(3, &[0, 1], 1.0));
        let p = GradientOrthogonalPolicy::eps("fb", &ef, guide, vec![0.0, 0.0, 1.0]).unwrap();
        let mut a = [0.0; 3];
        p.direction(0.0, &[0.6, 0.8, 0.0], &mut a);
        assert_relative_eq!(a[0], 0.6, epsilon = 1e-15);
        assert_relative_eq!(a[1], 0.8, epsilon = 1e-15);
        p.direction(0.0, &[0.0, 0.0, 2.0], &mut a);
        assert_eq!(a, [0.0, 0.0, 1.0]);
    }
}
