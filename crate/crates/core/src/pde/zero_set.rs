//! Zero-level-set extraction by linear interpolation along grid edges.

use super::grid::LevelSetField;

/// Azimuthal bins used when averaging crossing distances.
pub const ANGULAR_BINS: usize = 64;

/// Summary of the crossings of `u = 0` relative to a centre.
#[derive(Clone, Debug, PartialEq)]
pub struct ZeroSetSummary {
    /// Mean over angular bins of the mean crossing distance in each bin.
    pub radius: f64,
    pub min_distance: f64,
    pub max_distance: f64,
    pub crossings: usize,
    /// Per-axis `(min, max)` of crossing coordinates.
    pub extent: Vec<(f64, f64)>,
}

/// Points where `u` changes sign along an axis-aligned grid edge, with the
/// crossing placed by linear interpolation. Nodes with `u <= 0` are inside.
pub fn crossings(field: &LevelSetField) -> Vec<Vec<f64>> {
    let g = field.grid();
    let n = g.dim();
    let u = field.values();
    let mut mi = vec![0usize; n];
    let mut x = vec![0.0; n];
    let mut out = Vec::new();
    for idx in 0..g.len() {
        g.multi_index(idx, &mut mi);
        let ua = u[idx];
        for k in 0..n {
            if mi[k] + 1 >= g.nodes()[k] {
                continue;
            }
            let ub = u[idx + g.strides()[k]];
            if (ua <= 0.0) == (ub <= 0.0) {
                continue;
            }
            let s = ua / (ua - ub);
            g.point(idx, &mut x);
            let mut pt = x.clone();
            pt[k] += s * g.spacing()[k];
            out.push(pt);
        }
    }
    out
}

/// Radius of the zero set about `center`, measuring distance only in the
/// coordinates listed in `axes`. Returns `None` when the zero set is empty.
pub fn zero_set_radius(field: &LevelSetField, center: &[f64], axes: &[usize]) -> Option<ZeroSetSummary> {
    let pts = crossings(field);
    if pts.is_empty() {
        return None;
    }
    let n = field.grid().dim();
    let mut bins = vec![(0.0f64, 0usize); ANGULAR_BINS];
    let mut extent = vec![(f64::INFINITY, f64::NEG_INFINITY); n];
    let (mut dmin, mut dmax) = (f64::INFINITY, 0.0f64);
    for pt in &pts {
        for k in 0..n {
            extent[k].0 = extent[k].0.min(pt[k]);
            extent[k].1 = extent[k].1.max(pt[k]);
        }
        let d = axes.iter().map(|&k| (pt[k] - center[k]).powi(2)).sum::<f64>().sqrt();
        dmin = dmin.min(d);
        dmax = dmax.max(d);
        let bin = if axes.len() >= 2 {
            let th = (pt[axes[1]] - center[axes[1]]).atan2(pt[axes[0]] - center[axes[0]]);
            let frac = (th + std::f64::consts::PI) / std::f64::consts::TAU;
            ((frac * ANGULAR_BINS as f64) as usize).min(ANGULAR_BINS - 1)
        } else {
            0
        };
        bins[bin].0 += d;
        bins[bin].1 += 1;
    }
    let filled: Vec<f64> = bins.iter().filter(|b| b.1 > 0).map(|b| b.0 / b.1 as f64).collect();
    let radius = filled.iter().sum::<f64>() / filled.len() as f64;
    Some(ZeroSetSummary {
        radius,
        min_distance: dmin,
        max_distance: dmax,
        crossings: pts.len(),
        extent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::grid::Grid;
    use std::sync::Arc;

    #[test]
    fn circle_radius_recovered() {
        let g = Arc::new(Grid::cube(2, -1.5, 1.5, 121).unwrap());
        let f = LevelSetField::from_fn(g, 0.0, |x| x[0] * x[0] + x[1] * x[1] - 0.64).unwrap();
        let z = zero_set_radius(&f, &[0.0, 0.0], &[0, 1]).unwrap();
        assert!((z.radius - 0.8).abs() < 1e-3, "{}", z.radius);
        assert!((z.extent[0].0 + 0.8).abs() < 1e-3);
    }

    #[test]
    fn empty_zero_set() {
        let g = Arc::new(Grid::cube(2, -1.0, 1.0, 10).unwrap());
        let f = LevelSetField::from_fn(g, 0.0, |x| x[0] * x[0] + x[1] * x[1] + 0.1).unwrap();
        assert!(zero_set_radius(&f, &[0.0, 0.0], &[0, 1]).is_none());
    }

    #[test]
    fn cylinder_uses_selected_axes() {
        let g = Arc::new(Grid::cube(3, -1.5, 1.5, 41).unwrap());
        let f = LevelSetField::from_fn(g, 0.0, |x| x[0] * x[0] + x[1] * x[1] - 1.0).unwrap();
        let z = zero_set_radius(&f, &[0.0; 3], &[0, 1]).unwrap();
        assert!((z.radius - 1.0).abs() < 5e-3, "{}", z.radius);
    }
}
