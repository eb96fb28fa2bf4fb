//! `pde`: evolve the configured initial data and tabulate the zero set.

use super::{cfl, radius_error, solve, write_snapshot, Sample};
use crate::config::ExperimentConfig;
use crate::output::{header, Cell, OutDir};
use crate::Outcome;
use anyhow::Result;
use hmcf_core::levelset::CHAR_TOL_FACTOR;
use std::sync::Arc;

pub fn run(cfg: &ExperimentConfig, out: &mut OutDir, outcome: &mut Outcome) -> Result<()> {
    let ef = cfg.eframe()?;
    let grid = Arc::new(cfg.grid()?);
    let cfl_dt = cfl(&ef, &grid)?;
    let (horizon, dt) = cfg.time_plan(cfl_dt)?;
    out.derive("cfl_dt", cfl_dt);
    out.derive("tol_char", format!("{CHAR_TOL_FACTOR:e} * (1 + |Du|)"));
    out.derive("h_min", grid.h_min());
    let mode = cfg.pde.as_ref().map_or("final", |p| p.snapshots.as_str()).to_string();
    let run = out.timed("pde", |out| {
        solve(cfg, &ef, grid.clone(), horizon, dt, |k, last, f| {
            match (mode.as_str(), last) {
                ("all", _) => write_snapshot(out, &format!("snapshot_{k:06}.csv"), f),
                ("final", true) => write_snapshot(out, "snapshot_final.csv", f),
                _ => Ok(()),
            }
        })
    })?;
    out.derive("steps", run.summary.steps);
    out.derive("dt", run.summary.dt);
    out.derive("envelope_nodes", run.summary.envelope_nodes);
    out.derive("blend_nodes", run.summary.blend_nodes);
    write_levelset(cfg, out, &run.samples)?;
    assert_pde(cfg, &run.samples, outcome);
    Ok(())
}

/// Zero-set and extremum series as `t,x1..xN,quantity,value`, with the
/// radius centre (or the origin) in the coordinate block.
pub fn write_levelset(cfg: &ExperimentConfig, out: &mut OutDir, samples: &[Sample]) -> Result<()> {
    let n = cfg.frame()?.dim();
    let radius = cfg.pde.as_ref().and_then(|p| p.radius.as_ref());
    let center = radius.map_or_else(|| vec![0.0; n], |r| r.center.clone());
    let mut t = out.table("levelset.csv", &header(&["t"], n, &["quantity", "value"]))?;
    for s in samples {
        let mut emit = |q: &str, v: f64| -> Result<()> {
            let mut cells = vec![Cell::F(s.t)];
            cells.extend(center.iter().map(|c| Cell::F(*c)));
            cells.push(Cell::S(q));
            cells.push(Cell::F(v));
            t.row(&cells)
        };
        emit("step", s.step as f64)?;
        emit("min_u", s.min)?;
        emit("max_u", s.max)?;
        emit("max_interior_change", s.change)?;
        if let Some(z) = &s.zero_set {
            emit("radius", z.radius)?;
            emit("min_distance", z.min_distance)?;
            emit("max_distance", z.max_distance)?;
            emit("crossings", z.crossings as f64)?;
            for (k, (lo, hi)) in z.extent.iter().enumerate() {
                emit(&format!("extent_lo_x{}", k + 1), *lo)?;
                emit(&format!("extent_hi_x{}", k + 1), *hi)?;
            }
        }
    }
    t.finish()
}

pub fn assert_pde(cfg: &ExperimentConfig, samples: &[Sample], outcome: &mut Outcome) {
    let Some(p) = cfg.pde.as_ref() else { return };
    if let (Some(err), Some(r)) = (radius_error(cfg, samples), p.radius.as_ref()) {
        outcome.at_most("radius_rel_err", err, r.rel_tol);
    }
    if let Some(tol) = p.stationary_tol {
        let change = samples.iter().map(|s| s.change).fold(0.0, f64::max);
        outcome.at_most("max_interior_change", change, tol);
    }
}
