//! `simulate`: path ensembles, terminal states and moment checks.

use crate::config::{integrator, ExperimentConfig};
use crate::output::{header, Cell, OutDir};
use crate::Outcome;
use anyhow::{Context, Result};
use hmcf_core::sde::{mean_stderr, simulate, simulate_terminal, ControlPolicy, SimSpec, CONTROLLED_NOISE_SCALE};
use std::sync::Arc;

pub fn run(cfg: &ExperimentConfig, out: &mut OutDir, outcome: &mut Outcome) -> Result<()> {
    let s = cfg.simulate.as_ref().context("missing [simulate] table")?;
    let dynm = cfg.dynamics(&s.mode)?;
    let policy: Option<Arc<dyn ControlPolicy>> = match (&s.policy, s.mode.as_str()) {
        (_, "horizontal-bm") | (None, _) => None,
        (Some(p), mode) => Some(cfg.policy(mode, p)?),
    };
    let spec = SimSpec {
        t: s.t,
        horizon: s.horizon,
        dt: s.dt,
        paths: s.paths,
        seed: cfg.seed,
        record_every: 0,
        integrator: integrator(&s.integrator)?,
    };
    let (steps, dt) = spec.steps();
    out.derive("steps", steps);
    out.derive("dt", dt);
    out.derive(
        "noise_scale",
        if s.mode == "horizontal-bm" {
            1.0
        } else {
            CONTROLLED_NOISE_SCALE
        },
    );
    let n = dynm.dim();
    let pol = policy.as_deref();
    let terminal = out.timed("simulate", |_| {
        Ok(simulate_terminal(&dynm, pol, &s.x0, &spec, 0..s.paths)?)
    })?;
    let mut t = out.table("terminal.csv", &header(&["path"], n, &[]))?;
    for (k, y) in terminal.chunks(n).enumerate() {
        let mut cells = vec![Cell::U(k)];
        cells.extend(y.iter().map(|v| Cell::F(*v)));
        t.row(&cells)?;
    }
    t.finish()?;
    if s.dump_paths > 0 {
        let dump = SimSpec {
            paths: s.dump_paths,
            record_every: s.dump_every,
            ..spec.clone()
        };
        let e = out.timed("path_dump", |_| Ok(simulate(&dynm, pol, &s.x0, &dump)?))?;
        let mut t = out.table("paths.csv", &header(&["path", "step", "s"], n, &[]))?;
        for k in 0..e.paths() {
            for (r, &j) in e.recorded.iter().enumerate() {
                let mut cells = vec![Cell::U(k), Cell::U(j), Cell::F(e.time_of(r))];
                cells.extend(e.state(k, r).iter().map(|v| Cell::F(*v)));
                t.row(&cells)?;
            }
        }
        t.finish()?;
    }
    write_moments(cfg, out, outcome, &terminal, n)
}

/// First and second moments of every coordinate, with the configured checks.
fn write_moments(
    cfg: &ExperimentConfig,
    out: &mut OutDir,
    outcome: &mut Outcome,
    terminal: &[f64],
    n: usize,
) -> Result<()> {
    let s = cfg.simulate.as_ref().context("missing [simulate] table")?;
    let head: Vec<String> = ["coord", "mean", "mean_stderr", "second_moment", "second_moment_stderr"]
        .map(String::from)
        .to_vec();
    let mut t = out.table("moments.csv", &head)?;
    let mut stats = Vec::with_capacity(n);
    for i in 0..n {
        let disp: Vec<f64> = terminal.chunks(n).map(|y| y[i] - s.x0[i]).collect();
        let sq: Vec<f64> = disp.iter().map(|d| d * d).collect();
        let (m, mse) = mean_stderr(&disp);
        let (m2, m2se) = mean_stderr(&sq);
        t.row(&[Cell::U(i + 1), Cell::F(m), Cell::F(mse), Cell::F(m2), Cell::F(m2se)])?;
        stats.push((m, mse, m2, m2se));
    }
    t.finish()?;
    if let Some(e) = &s.expect {
        for &c in &e.zero_mean {
            let (m, se, _, _) = stats[c - 1];
            outcome.at_most(format!("mean_x{c}_in_stderr"), m.abs() / se, e.mean_sigmas);
        }
        for m in &e.second_moment {
            let (_, _, m2, se) = stats[m.coord - 1];
            if let Some(rel) = m.rel_tol {
                outcome.at_most(
                    format!("second_moment_x{}_rel_err", m.coord),
                    (m2 - m.value).abs() / m.value.abs(),
                    rel,
                );
            }
            if let Some(sig) = m.sigmas {
                outcome.at_most(
                    format!("second_moment_x{}_in_stderr", m.coord),
                    (m2 - m.value).abs() / se,
                    sig,
                );
            }
        }
    }
    Ok(())
}
