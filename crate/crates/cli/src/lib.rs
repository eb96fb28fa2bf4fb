//! Experiment harness: reads a TOML configuration, drives the solvers and
//! writes CSV tables plus a manifest into an output directory.

pub mod config;
pub mod expr;
pub mod output;
pub mod runs;

use anyhow::{Context, Result};
use config::ExperimentConfig;
use output::{Cell, OutDir};
use std::path::Path;

pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Pde,
    Simulate,
    Value,
    Compare,
    Sweep,
    Check,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Pde => "pde",
            Command::Simulate => "simulate",
            Command::Value => "value",
            Command::Compare => "compare",
            Command::Sweep => "sweep",
            Command::Check => "check",
        }
    }
}

/// A named assertion evaluated by a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

/// Assertions collected over a run; written to `checks.csv`.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
}

impl Outcome {
    /// Records `value <= limit`.
    pub fn at_most(&mut self, name: impl Into<String>, value: f64, limit: f64) {
        self.record(name, value, limit, value <= limit);
    }

    pub fn record(&mut self, name: impl Into<String>, value: f64, limit: f64, pass: bool) {
        self.checks.push(Check {
            name: name.into(),
            value,
            limit,
            pass,
        });
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn write(&self, out: &mut OutDir) -> Result<()> {
        let head: Vec<String> = ["check", "value", "limit", "status"].map(String::from).to_vec();
        let mut t = out.table("checks.csv", &head)?;
        for c in &self.checks {
            let status = if c.pass { "pass" } else { "fail" };
            t.row(&[Cell::S(&c.name), Cell::F(c.value), Cell::F(c.limit), Cell::S(status)])?;
        }
        t.finish()
    }
}

/// Loads `config`, runs `command` on a pool of `threads` workers and writes
/// every artifact plus the manifest into `out`.
pub fn execute(
    command: Command,
    config: &Path,
    out: &Path,
    seed_override: Option<u64>,
    threads: Option<usize>,
) -> Result<Outcome> {
    let (mut cfg, text) = ExperimentConfig::load(config)?;
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    for w in cfg.frame()?.structure_warnings() {
        eprintln!("warning: {w}");
    }
    let threads = threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    anyhow::ensure!(threads > 0, "--threads must be positive");
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building the worker pool")?;
    let mut dir = OutDir::acquire(out)?;
    let outcome = pool.install(|| run(command, &cfg, &mut dir))?;
    outcome.write(&mut dir)?;
    dir.write_manifest(command.as_str(), &text, cfg.seed, threads)?;
    Ok(outcome)
}

fn run(command: Command, cfg: &ExperimentConfig, out: &mut OutDir) -> Result<Outcome> {
    let mut outcome = Outcome::default();
    match command {
        Command::Pde => runs::pde::run(cfg, out, &mut outcome)?,
        Command::Simulate => runs::simulate::run(cfg, out, &mut outcome)?,
        Command::Value => runs::value::run(cfg, out, &mut outcome)?,
        Command::Compare => runs::compare::run(cfg, out, &mut outcome)?,
        Command::Sweep => runs::sweep::run(cfg, out, &mut outcome)?,
        Command::Check => runs::check::run(cfg, out, &mut outcome)?,
    }
    Ok(outcome)
}
