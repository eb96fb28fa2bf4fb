//! One module per subcommand, plus the PDE and value drivers they share.

pub mod check;
pub mod compare;
pub mod pde;
pub mod simulate;
pub mod sweep;
pub mod value;

use crate::config::ExperimentConfig;
use crate::output::{header, Cell, OutDir};
use anyhow::{Context, Result};
use hmcf_core::pde::zero_set::{zero_set_radius, ZeroSetSummary};
use hmcf_core::pde::{evolve_with, EvolveSummary, Stepper};
use hmcf_core::{EpsilonFrame, Grid, LevelSetField};
use std::sync::Arc;

/// One sampled state of a PDE run.
#[derive(Clone, Debug)]
pub struct Sample {
    pub step: usize,
    pub t: f64,
    pub zero_set: Option<ZeroSetSummary>,
    /// Largest interior change from the initial data.
    pub change: f64,
    pub min: f64,
    pub max: f64,
}

pub struct PdeRun {
    pub samples: Vec<Sample>,
    pub last: LevelSetField,
    pub summary: EvolveSummary,
}

/// Sampling cadence: every `ceil(total / samples)` steps plus the last.
fn sample_every(total: usize, samples: usize) -> usize {
    total.div_ceil(samples.max(1)).max(1)
}

/// Evolves the configured initial data over `horizon`, sampling zero-set
/// statistics and handing sampled states to `snapshot`.
pub fn solve(
    cfg: &ExperimentConfig,
    ef: &EpsilonFrame,
    grid: Arc<Grid>,
    horizon: f64,
    dt: Option<f64>,
    mut snapshot: impl FnMut(usize, bool, &LevelSetField) -> Result<()>,
) -> Result<PdeRun> {
    let init = cfg.initial_field()?;
    let u0 = LevelSetField::from_fn(grid, 0.0, |x| init(x))?;
    let pde = cfg.pde.as_ref();
    let samples = pde.map_or(70, |p| p.samples);
    let radius = pde.and_then(|p| p.radius.as_ref());
    let axes: Vec<usize> = radius
        .map(|r| r.axes.iter().map(|a| a - 1).collect())
        .unwrap_or_default();
    let mut out = Vec::new();
    let mut failure: Option<anyhow::Error> = None;
    let mut last = u0.clone();
    let summary = evolve_with(ef, &u0, horizon, dt, |k, total, f| {
        let every = sample_every(total, samples);
        if k == total || k % every == 0 {
            let (min, max) = f.min_max();
            out.push(Sample {
                step: k,
                t: f.time(),
                zero_set: radius.and_then(|r| zero_set_radius(f, &r.center, &axes)),
                change: f.max_abs_diff(&u0, true),
                min,
                max,
            });
            if failure.is_none() {
                if let Err(e) = snapshot(k, k == total, f) {
                    failure = Some(e);
                }
            }
        }
        if k == total {
            last = f.clone();
        }
        Ok(())
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(PdeRun {
        samples: out,
        last,
        summary,
    })
}

/// CFL limit of the configured grid under `ef`.
pub fn cfl(ef: &EpsilonFrame, grid: &Arc<Grid>) -> Result<f64> {
    Ok(Stepper::new(ef, grid.clone())?.cfl_limit())
}

/// `sqrt(r0^2 - 2 (k - 1) t)` for a round cylinder over `k` axes.
pub fn exact_radius(r0: f64, axes: usize, t: f64) -> Option<f64> {
    let r2 = r0 * r0 - 2.0 * (axes as f64 - 1.0) * t;
    (r2 > 0.0).then(|| r2.sqrt())
}

/// Worst relative radius error over samples inside the configured window;
/// infinite when a sample in the window has no zero set.
pub fn radius_error(cfg: &ExperimentConfig, samples: &[Sample]) -> Option<f64> {
    let r = cfg.pde.as_ref()?.radius.as_ref()?;
    let r0 = r.r0?;
    let [lo, hi] = r.window.unwrap_or([f64::NEG_INFINITY, f64::INFINITY]);
    let mut worst = 0.0f64;
    for s in samples.iter().filter(|s| s.t >= lo - 1e-12 && s.t <= hi + 1e-12) {
        let err = match (exact_radius(r0, r.axes.len(), s.t), &s.zero_set) {
            (Some(exact), Some(z)) => (z.radius - exact).abs() / exact,
            _ => f64::INFINITY,
        };
        worst = worst.max(err);
    }
    Some(worst)
}

/// Writes every node of `field` as `x1..xN,u`.
pub fn write_snapshot(out: &mut OutDir, name: &str, field: &LevelSetField) -> Result<()> {
    let g = field.grid();
    let n = g.dim();
    let mut t = out.table(name, &header(&[], n, &["u"]))?;
    let mut x = vec![0.0; n];
    let mut cells = Vec::with_capacity(n + 1);
    for (idx, &u) in field.values().iter().enumerate() {
        g.point(idx, &mut x);
        cells.clear();
        cells.extend(x.iter().map(|v| Cell::F(*v)));
        cells.push(Cell::F(u));
        t.row(&cells)?;
    }
    t.finish()
}

/// Bit-reversal order of `0..n`: every prefix is spread over the index range.
pub fn spread_order(n: usize) -> Vec<usize> {
    if n <= 1 {
        return (0..n).collect();
    }
    let bits = usize::BITS - (n - 1).leading_zeros();
    (0..1usize << bits)
        .map(|i| i.reverse_bits() >> (usize::BITS - bits))
        .filter(|&i| i < n)
        .collect()
}

/// Constant directions in spread order, then the feedback policy.
pub fn policy_family(cfg: &ExperimentConfig) -> Result<Vec<Arc<dyn hmcf_core::ControlPolicy>>> {
    let v = cfg.value.as_ref().context("missing [value] table")?;
    let dynm = cfg.dynamics(&v.mode)?;
    let d = dynm.noise_dim();
    let res = v
        .directions
        .unwrap_or_else(|| hmcf_core::directions::default_resolution(d));
    let family = hmcf_core::value::constant_family(d, res)?;
    let mut pols: Vec<_> = spread_order(family.len())
        .into_iter()
        .map(|i| family[i].clone())
        .collect();
    if v.feedback {
        pols.push(Arc::new(cfg.feedback_policy(&v.mode, v.fallback.as_deref(), None)?));
    }
    Ok(pols)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_order_is_a_permutation() {
        for n in [1, 2, 5, 720, 1024] {
            let mut o = spread_order(n);
            assert_eq!(o.len(), n);
            o.sort();
            assert_eq!(o, (0..n).collect::<Vec<_>>());
        }
        assert_eq!(spread_order(8), vec![0, 4, 2, 6, 1, 5, 3, 7]);
    }

    #[test]
    fn exact_radius_matches_circle_and_cylinder() {
        assert_eq!(exact_radius(1.0, 2, 0.0), Some(1.0));
        assert!((exact_radius(1.0, 2, 0.3).unwrap() - 0.4f64.sqrt()).abs() < 1e-15);
        assert_eq!(exact_radius(1.0, 1, 5.0), Some(1.0));
        assert_eq!(exact_radius(1.0, 2, 0.6), None);
    }
}
