//! `sweep`: one parameter varied over a list, one table per axis.

use super::check::hamiltonian_cases;
use super::value::{assert_monotone, estimate};
use super::{cfl, exact_radius, radius_error, solve, Sample};
use crate::config::{integrator, ExperimentConfig, PerAxis, SweepConfig};
use crate::output::{header, Cell, OutDir};
use crate::Outcome;
use anyhow::{bail, Context, Result};
use hmcf_core::sde::weak_order::weak_order_check;
use hmcf_core::value::Exponent;
use hmcf_core::AnalyticField;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

pub fn run(cfg: &ExperimentConfig, out: &mut OutDir, outcome: &mut Outcome) -> Result<()> {
    let s = cfg.sweep.as_ref().context("missing [sweep] table")?;
    let name = format!("sweep_{}.csv", s.axis);
    match s.axis.as_str() {
        "epsilon" => out.timed("sweep", |out| epsilon(cfg, s, out, &name, outcome)),
        "h" => out.timed("sweep", |out| grid_size(cfg, s, out, &name, outcome)),
        "dt" => out.timed("sweep", |out| weak_order(cfg, s, out, &name, outcome)),
        "p" => out.timed("sweep", |out| exponent(cfg, s, out, &name, outcome)),
        "K" => out.timed("sweep", |out| paths(cfg, s, out, &name, outcome)),
        "directions" => out.timed("sweep", |out| directions(cfg, s, out, &name)),
        other => bail!("unknown sweep axis \"{other}\""),
    }
}

fn radius_cells<'a>(cfg: &ExperimentConfig, s: &Sample, mut cells: Vec<Cell<'a>>) -> Vec<Cell<'a>> {
    let r = cfg.pde.as_ref().and_then(|p| p.radius.as_ref());
    let exact = r
        .and_then(|r| exact_radius(r.r0?, r.axes.len(), s.t))
        .unwrap_or(f64::NAN);
    let radius = s.zero_set.as_ref().map_or(f64::NAN, |z| z.radius);
    cells.extend([
        Cell::F(s.t),
        Cell::F(radius),
        Cell::F(exact),
        Cell::F((radius - exact).abs() / exact),
    ]);
    cells
}

fn radius_tol(cfg: &ExperimentConfig) -> Result<f64> {
    cfg.pde
        .as_ref()
        .and_then(|p| p.radius.as_ref())
        .map(|r| r.rel_tol)
        .context("radius sweeps need a [pde.radius] table with r0")
}

/// PDE radius series for each epsilon on a shared time grid.
fn epsilon(cfg: &ExperimentConfig, s: &SweepConfig, out: &mut OutDir, name: &str, outcome: &mut Outcome) -> Result<()> {
    let tol = radius_tol(cfg)?;
    let frame = cfg.frame()?;
    let grid = Arc::new(cfg.grid()?);
    let frames = s
        .values
        .iter()
        .map(|&e| Ok(frame.with_epsilon(e)?))
        .collect::<Result<Vec<_>>>()?;
    let mut cfl_min = f64::INFINITY;
    for ef in &frames {
        cfl_min = cfl_min.min(cfl(ef, &grid)?);
    }
    let (horizon, dt) = cfg.time_plan(cfl_min)?;
    let dt = dt.unwrap_or(cfl_min);
    out.derive("cfl_dt", cfl_min);
    out.derive("dt", dt);
    let mut t = out.table(name, &["value", "t", "radius", "exact", "rel_err"].map(String::from))?;
    let mut series: Vec<Vec<Sample>> = Vec::new();
    for (e, ef) in s.values.iter().zip(&frames) {
        let run = solve(cfg, ef, grid.clone(), horizon, Some(dt), |_, _, _| Ok(()))?;
        for smp in &run.samples {
            t.row(&radius_cells(cfg, smp, vec![Cell::F(*e)]))?;
        }
        let err = radius_error(cfg, &run.samples).unwrap_or(f64::INFINITY);
        outcome.at_most(format!("radius_rel_err_eps={e}"), err, tol);
        series.push(run.samples);
    }
    t.finish()?;
    // spread across epsilon against the largest deviation from the exact radius
    let r = cfg.pde.as_ref().and_then(|p| p.radius.as_ref()).unwrap();
    let [lo, hi] = r.window.unwrap_or([f64::NEG_INFINITY, f64::INFINITY]);
    let (mut spread, mut band) = (0.0f64, 0.0f64);
    for (k, smp) in series[0].iter().enumerate() {
        if smp.t < lo - 1e-12 || smp.t > hi + 1e-12 {
            continue;
        }
        let exact =
            r.r0.and_then(|r0| exact_radius(r0, r.axes.len(), smp.t))
                .unwrap_or(f64::NAN);
        let radii: Vec<f64> = series
            .iter()
            .map(|sr| sr[k].zero_set.as_ref().map_or(f64::NAN, |z| z.radius))
            .collect();
        let (mn, mx) = radii
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        spread = spread.max(mx - mn);
        band = radii.iter().fold(band, |b, v| b.max((v - exact).abs()));
    }
    out.derive("epsilon_spread", spread);
    out.derive("discretization_band", band);
    outcome.record("epsilon_spread_below_band", spread, band, spread < band);
    Ok(())
}

fn grid_size(
    cfg: &ExperimentConfig,
    s: &SweepConfig,
    out: &mut OutDir,
    name: &str,
    outcome: &mut Outcome,
) -> Result<()> {
    let tol = radius_tol(cfg)?;
    let ef = cfg.eframe()?;
    let mut t = out.table(
        name,
        &["value", "h", "t", "radius", "exact", "rel_err"].map(String::from),
    )?;
    for &v in &s.values {
        let mut c = cfg.clone();
        let g = c.grid.as_mut().context("missing [grid] table")?;
        g.nodes = PerAxis::All(v as usize);
        let grid = Arc::new(c.grid()?);
        let (horizon, dt) = c.time_plan(cfl(&ef, &grid)?)?;
        let run = solve(&c, &ef, grid.clone(), horizon, dt, |_, _, _| Ok(()))?;
        for smp in &run.samples {
            t.row(&radius_cells(&c, smp, vec![Cell::F(v), Cell::F(grid.h_min())]))?;
        }
        let err = radius_error(&c, &run.samples).unwrap_or(f64::INFINITY);
        outcome.at_most(format!("radius_rel_err_nodes={v}"), err, tol);
    }
    t.finish()
}

/// `sum_k sin(x_k + 0.3 (k + 1)) + 0.5 exp(0.2 sum_k x_k)`.
pub fn weak_order_field(n: usize) -> AnalyticField {
    let e = |x: &[f64]| (0.2 * x.iter().sum::<f64>()).exp();
    AnalyticField::new(
        n,
        move |_, x| {
            x.iter()
                .enumerate()
                .map(|(k, v)| (v + 0.3 * (k + 1) as f64).sin())
                .sum::<f64>()
                + 0.5 * e(x)
        },
        move |_, x| {
            let ex = e(x);
            DVector::from_iterator(
                n,
                x.iter()
                    .enumerate()
                    .map(|(k, v)| (v + 0.3 * (k + 1) as f64).cos() + 0.1 * ex),
            )
        },
        move |_, x| {
            let ex = 0.02 * e(x);
            let mut h = DMatrix::from_element(n, n, ex);
            for (k, v) in x.iter().enumerate() {
                h[(k, k)] -= (v + 0.3 * (k + 1) as f64).sin();
            }
            h
        },
    )
}

fn weak_order(
    cfg: &ExperimentConfig,
    s: &SweepConfig,
    out: &mut OutDir,
    name: &str,
    outcome: &mut Outcome,
) -> Result<()> {
    let mode = s.mode.as_deref().unwrap_or("controlled-eps");
    let dynm = cfg.dynamics(mode)?;
    let a = match (mode, &s.direction) {
        ("horizontal-bm", _) | (_, None) => None,
        (_, Some(d)) => {
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            Some(d.iter().map(|v| v / norm).collect::<Vec<f64>>())
        }
    };
    let x = s.point.as_ref().context("sweep.point is required")?;
    let paths = s.paths.context("sweep.paths is required")?;
    let field = weak_order_field(dynm.dim());
    let integ = integrator(&s.integrator)?;
    let report = weak_order_check(&dynm, &field, x, a.as_deref(), &s.values, paths, cfg.seed, integ)?;
    let mut t = out.table(name, &["dt", "estimate", "exact", "error", "order"].map(String::from))?;
    for (k, r) in report.rows.iter().enumerate() {
        let order = if k == 0 { f64::NAN } else { report.orders[k - 1] };
        t.row(&[
            Cell::F(r.dt),
            Cell::F(r.estimate),
            Cell::F(r.exact),
            Cell::F(r.error),
            Cell::F(order),
        ])?;
    }
    t.finish()?;
    out.derive("fitted_order", report.fitted_order());
    if report.rows.len() > 1 {
        let min = report.min_order();
        outcome.record("weak_order_min", min, s.min_order, min >= s.min_order);
    }
    Ok(())
}

fn exponent(
    cfg: &ExperimentConfig,
    s: &SweepConfig,
    out: &mut OutDir,
    name: &str,
    outcome: &mut Outcome,
) -> Result<()> {
    let exps: Vec<Exponent> = s
        .values
        .iter()
        .map(|&p| {
            if p.is_infinite() {
                Exponent::Infinity
            } else {
                Exponent::Finite(p)
            }
        })
        .collect();
    anyhow::ensure!(
        exps.iter().all(|e| !matches!(e, Exponent::Finite(p) if *p <= 1.0)),
        "sweep.values must exceed 1 on the p axis"
    );
    let run = estimate(cfg, exps, None)?;
    let n = cfg.frame()?.dim();
    let mut t = out.table(name, &header(&["value", "t"], n, &["estimate", "stderr", "policy_id"]))?;
    for r in &run.results {
        for e in &r.estimates {
            let p = e.exponent.to_string();
            let mut cells = vec![Cell::S(&p), Cell::F(e.t)];
            cells.extend(e.x.iter().map(|v| Cell::F(*v)));
            cells.extend([Cell::F(e.estimate), Cell::F(e.stderr), Cell::S(&e.policy_id)]);
            t.row(&cells)?;
        }
    }
    t.finish()?;
    assert_monotone(&run, outcome);
    Ok(())
}

fn paths(cfg: &ExperimentConfig, s: &SweepConfig, out: &mut OutDir, name: &str, _: &mut Outcome) -> Result<()> {
    let n = cfg.frame()?.dim();
    let mut t = out.table(
        name,
        &header(&["value", "t"], n, &["p", "estimate", "stderr", "policy_id"]),
    )?;
    for &k in &s.values {
        let run = estimate(cfg, cfg.exponents()?, Some(k as usize))?;
        for r in &run.results {
            for e in &r.estimates {
                let p = e.exponent.to_string();
                let mut cells = vec![Cell::U(k as usize), Cell::F(e.t)];
                cells.extend(e.x.iter().map(|v| Cell::F(*v)));
                cells.extend([
                    Cell::S(&p),
                    Cell::F(e.estimate),
                    Cell::F(e.stderr),
                    Cell::S(&e.policy_id),
                ]);
                t.row(&cells)?;
            }
        }
    }
    t.finish()
}

/// Grid-only brute force of the Hamiltonians at each direction count.
fn directions(cfg: &ExperimentConfig, s: &SweepConfig, out: &mut OutDir, name: &str) -> Result<()> {
    let ef = cfg.eframe()?;
    let mut t = out.table(
        name,
        &["value", "cases", "max_abs_err", "mean_abs_err"].map(String::from),
    )?;
    for &v in &s.values {
        let cases = hamiltonian_cases(&ef, s.cases, v as usize, false, cfg.seed)?;
        let errs: Vec<f64> = cases.iter().map(|c| (c.brute - c.closed).abs()).collect();
        let max = errs.iter().copied().fold(0.0, f64::max);
        let mean = errs.iter().sum::<f64>() / errs.len().max(1) as f64;
        t.row(&[Cell::U(v as usize), Cell::U(errs.len()), Cell::F(max), Cell::F(mean)])?;
    }
    t.finish()
}
