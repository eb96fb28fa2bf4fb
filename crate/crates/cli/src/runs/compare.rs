//! `compare`: the PDE solution under time reversal against the value
//! estimates at the configured points.

use super::value::{estimate, write_budgets, write_values};
use super::{cfl, solve};
use crate::config::ExperimentConfig;
use crate::output::{header, Cell, OutDir};
use crate::Outcome;
use anyhow::{bail, Context, Result};
use hmcf_core::value::Exponent;
use std::sync::Arc;

/// `u(T - t, x)` at every point; the PDE stage uses no stochastic code.
pub fn pde_column(cfg: &ExperimentConfig, out: &mut OutDir) -> Result<Vec<f64>> {
    let v = cfg.value.as_ref().context("missing [value] table")?;
    let ef = cfg.eframe()?;
    let grid = Arc::new(cfg.grid()?);
    for x in &v.points {
        if !grid.contains(x) {
            bail!("evaluation point {x:?} lies outside the grid");
        }
    }
    let horizon = cfg.value_horizon()? - v.t;
    if horizon == 0.0 {
        let g = cfg.initial_field()?;
        return Ok(v.points.iter().map(|x| g(x)).collect());
    }
    let cfl_dt = cfl(&ef, &grid)?;
    out.derive("cfl_dt", cfl_dt);
    let dt = cfg.time.as_ref().and_then(|t| t.dt);
    let run = out.timed("pde", |_| solve(cfg, &ef, grid, horizon, dt, |_, _, _| Ok(())))?;
    out.derive("pde_steps", run.summary.steps);
    out.derive("pde_dt", run.summary.dt);
    super::pde::write_levelset(cfg, out, &run.samples)?;
    v.points.iter().map(|x| Ok(run.last.interpolate(x)?)).collect()
}

pub fn run(cfg: &ExperimentConfig, out: &mut OutDir, outcome: &mut Outcome) -> Result<()> {
    let v = cfg.value.as_ref().context("missing [value] table")?;
    let c = cfg.compare.as_ref().context("missing [compare] table")?;
    let n = cfg.frame()?.dim();
    let cost = cfg.cost()?;
    let tol = c.tol_fraction * cost.range();
    out.derive("shift_bound", cost.shift());
    out.derive("cost_range", cost.range());
    out.derive("tol_compare", tol);
    let pde = pde_column(cfg, out)?;

    let mut exps = cfg.exponents()?;
    if !exps.contains(&Exponent::Infinity) {
        exps.push(Exponent::Infinity);
    }
    let inf = exps.iter().position(|e| *e == Exponent::Infinity).unwrap();
    let pmax = exps
        .iter()
        .enumerate()
        .filter_map(|(i, e)| match e {
            Exponent::Finite(p) => Some((i, *p)),
            Exponent::Infinity => None,
        })
        .max_by(|a, b| a.1.total_cmp(&b.1));
    let run = out.timed("value", |_| estimate(cfg, exps, None))?;
    write_values(cfg, out, "value.csv", &run)?;
    write_budgets(cfg, out, "value_budget.csv", &run)?;

    let head = header(&["t"], n, &["pde", "vinf", "vp", "p", "gap", "tol", "status"]);
    let mut t = out.table("compare.csv", &head)?;
    let (mut worst, mut order_violations) = (0.0f64, 0usize);
    for ((x, r), u) in v.points.iter().zip(&run.results).zip(&pde) {
        let vinf = r.estimates[inf].estimate;
        let (vp, p) = match pmax {
            Some((i, p)) => (r.estimates[i].estimate, p.to_string()),
            None => (f64::NAN, "none".to_string()),
        };
        if vp > vinf {
            order_violations += 1;
        }
        let gap = (u - vinf).abs();
        worst = worst.max(gap);
        let mut cells = vec![Cell::F(v.t)];
        cells.extend(x.iter().map(|c| Cell::F(*c)));
        cells.extend([
            Cell::F(*u),
            Cell::F(vinf),
            Cell::F(vp),
            Cell::S(&p),
            Cell::F(gap),
            Cell::F(tol),
            Cell::S(if gap <= tol { "pass" } else { "fail" }),
        ]);
        t.row(&cells)?;
    }
    t.finish()?;

    let head = header(&["t"], n, &["budget", "vinf", "gap"]);
    let mut t = out.table("compare_budget.csv", &head)?;
    let mut budget_violations = 0usize;
    for ((x, r), u) in v.points.iter().zip(&run.results).zip(&pde) {
        let gaps: Vec<f64> = r.trace.iter().map(|row| (u - row.estimates[inf]).abs()).collect();
        budget_violations += gaps.windows(2).filter(|w| w[1] > w[0]).count();
        for (row, gap) in r.trace.iter().zip(&gaps) {
            let mut cells = vec![Cell::F(v.t)];
            cells.extend(x.iter().map(|c| Cell::F(*c)));
            cells.extend([Cell::U(row.budget), Cell::F(row.estimates[inf]), Cell::F(*gap)]);
            t.row(&cells)?;
        }
    }
    t.finish()?;

    outcome.at_most("max_gap", worst, tol);
    outcome.at_most("vp_above_vinf", order_violations as f64, 0.0);
    outcome.at_most("budget_gap_increases", budget_violations as f64, 0.0);
    Ok(())
}
