//! `value`: policy-search estimates of the value functions at a point list.

use super::policy_family;
use crate::config::{integrator, ExperimentConfig};
use crate::output::{header, Cell, OutDir};
use crate::Outcome;
use anyhow::{Context, Result};
use hmcf_core::value::{search, Exponent, SearchResult, SearchSpec};

/// Search results at every configured point, in point order.
pub struct ValueRun {
    pub exponents: Vec<Exponent>,
    pub results: Vec<SearchResult>,
}

/// Runs the policy search at each point; `paths` overrides `value.paths`.
pub fn estimate(cfg: &ExperimentConfig, exponents: Vec<Exponent>, paths: Option<usize>) -> Result<ValueRun> {
    let v = cfg.value.as_ref().context("missing [value] table")?;
    let dynm = cfg.dynamics(&v.mode)?;
    let cost = cfg.cost()?;
    let pols = policy_family(cfg)?;
    let spec = SearchSpec {
        t: v.t,
        horizon: cfg.value_horizon()?,
        dt: v.dt,
        paths: paths.unwrap_or(v.paths),
        seed: cfg.seed,
        exponents: exponents.clone(),
        budgets: v.budgets.clone(),
        integrator: integrator(&v.integrator)?,
    };
    let results = v
        .points
        .iter()
        .map(|x| Ok(search(&dynm, &cost, &pols, x, &spec)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(ValueRun { exponents, results })
}

pub fn run(cfg: &ExperimentConfig, out: &mut OutDir, outcome: &mut Outcome) -> Result<()> {
    let exps = cfg.exponents()?;
    let cost = cfg.cost()?;
    out.derive("shift_bound", cost.shift());
    out.derive("cost_range", cost.range());
    out.derive("policies", policy_family(cfg)?.len());
    let run = out.timed("value", |_| estimate(cfg, exps, None))?;
    write_values(cfg, out, "value.csv", &run)?;
    write_budgets(cfg, out, "value_budget.csv", &run)?;
    let pruned: usize = run.results.iter().map(|r| r.pruned).sum();
    out.derive("pruned_policies", pruned);
    assert_monotone(&run, outcome);
    Ok(())
}

/// `t,x1..xN,p,estimate,stderr,policy_id,K,seed`.
pub fn write_values(cfg: &ExperimentConfig, out: &mut OutDir, name: &str, run: &ValueRun) -> Result<()> {
    let n = cfg.frame()?.dim();
    let head = header(&["t"], n, &["p", "estimate", "stderr", "policy_id", "K", "seed"]);
    let mut t = out.table(name, &head)?;
    for r in &run.results {
        for e in &r.estimates {
            let p = e.exponent.to_string();
            let mut cells = vec![Cell::F(e.t)];
            cells.extend(e.x.iter().map(|v| Cell::F(*v)));
            cells.extend([
                Cell::S(&p),
                Cell::F(e.estimate),
                Cell::F(e.stderr),
                Cell::S(&e.policy_id),
                Cell::U(e.paths),
                Cell::I(e.seed),
            ]);
            t.row(&cells)?;
        }
    }
    t.finish()
}

/// Best-so-far estimates at each budget: `t,x1..xN,budget,p,estimate,policy_id`.
pub fn write_budgets(cfg: &ExperimentConfig, out: &mut OutDir, name: &str, run: &ValueRun) -> Result<()> {
    let n = cfg.frame()?.dim();
    let v = cfg.value.as_ref().context("missing [value] table")?;
    let head = header(&["t"], n, &["budget", "p", "estimate", "policy_id"]);
    let mut t = out.table(name, &head)?;
    for (r, x) in run.results.iter().zip(&v.points) {
        for row in &r.trace {
            for ((e, id), p) in row.estimates.iter().zip(&row.policy_ids).zip(&run.exponents) {
                let p = p.to_string();
                let mut cells = vec![Cell::F(v.t)];
                cells.extend(x.iter().map(|c| Cell::F(*c)));
                cells.extend([Cell::U(row.budget), Cell::S(&p), Cell::F(*e), Cell::S(id)]);
                t.row(&cells)?;
            }
        }
    }
    t.finish()
}

fn rank(e: &Exponent) -> f64 {
    match e {
        Exponent::Finite(p) => *p,
        Exponent::Infinity => f64::INFINITY,
    }
}

/// Counts decreases along increasing exponents at each point.
pub fn assert_monotone(run: &ValueRun, outcome: &mut Outcome) {
    let mut order: Vec<usize> = (0..run.exponents.len()).collect();
    order.sort_by(|&a, &b| rank(&run.exponents[a]).total_cmp(&rank(&run.exponents[b])));
    let violations = run
        .results
        .iter()
        .map(|r| {
            order
                .windows(2)
                .filter(|w| r.estimates[w[0]].estimate > r.estimates[w[1]].estimate)
                .count()
        })
        .sum::<usize>();
    outcome.at_most("p_monotone_violations", violations as f64, 0.0);
}
