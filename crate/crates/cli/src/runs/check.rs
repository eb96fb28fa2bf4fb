//! `check`: Hamiltonian and eigenvalue oracles plus the value-function
//! lemma suite.

use super::spread_order;
use crate::config::{CheckConfig, ExperimentConfig};
use crate::output::{header, Cell, OutDir};
use crate::Outcome;
use anyhow::{Context, Result};
use hmcf_core::directions::direction_grid;
use hmcf_core::sde::{ControlPolicy, Integrator};
use hmcf_core::value::{
    closed_form_h_eps, closed_form_hp, constant_family, hamiltonian_h_eps, hamiltonian_hp, lambda_max_derivative_check,
    search, Exponent, Search, SearchSpec,
};
use hmcf_core::{Dynamics, EpsilonFrame, TerminalCost};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Symmetric matrix with independent entries uniform on `[-2, 2]`.
pub fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rng.random_range(-2.0..2.0);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-r..r)).collect()
}

/// One brute-force against closed-form comparison.
pub struct HamiltonianCase {
    pub id: String,
    pub brute: f64,
    pub closed: f64,
}

/// `cases` random `(x, p, S)` for the approximated Hamiltonian and as many
/// `(z, q, M, p)` for the L^p Hamiltonian.
pub fn hamiltonian_cases(
    ef: &EpsilonFrame,
    cases: usize,
    resolution: usize,
    refine: bool,
    seed: u64,
) -> Result<Vec<HamiltonianCase>> {
    let n = ef.dim();
    let dirs = direction_grid(n, resolution);
    let search = Search {
        directions: &dirs,
        refine,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(2 * cases);
    for k in 0..cases {
        let s = random_sym(&mut rng, n);
        let x = random_vec(&mut rng, n, 1.0);
        let p = random_vec(&mut rng, n, 1.0);
        out.push(HamiltonianCase {
            id: format!("h-{k:03}"),
            brute: hamiltonian_h_eps(ef, &x, &p, &s, search)?.value,
            closed: closed_form_h_eps(ef, &x, &p, &s),
        });
    }
    for k in 0..cases {
        let m = random_sym(&mut rng, n);
        let q = random_vec(&mut rng, n, 2.0);
        let z = rng.random_range(0.2..3.0);
        let pe = rng.random_range(1.5..10.0);
        out.push(HamiltonianCase {
            id: format!("hp-{k:03}"),
            brute: hamiltonian_hp(z, &q, &m, pe, search)?.value,
            closed: closed_form_hp(z, &q, &m, pe),
        });
    }
    Ok(out)
}

pub fn run(cfg: &ExperimentConfig, out: &mut OutDir, outcome: &mut Outcome) -> Result<()> {
    let c = cfg.check.as_ref().context("missing [check] table")?;
    let ef = cfg.eframe()?;
    let cases = out.timed("hamiltonian", |_| {
        hamiltonian_cases(&ef, c.hamiltonian_cases, c.resolution, true, cfg.seed)
    })?;
    let head: Vec<String> = ["case_id", "bruteforce", "closedform", "abs_err"]
        .map(String::from)
        .to_vec();
    let mut t = out.table("hamiltonian_checks.csv", &head)?;
    let mut worst = 0.0f64;
    for h in &cases {
        let err = (h.brute - h.closed).abs();
        worst = worst.max(err);
        t.row(&[Cell::S(&h.id), Cell::F(h.brute), Cell::F(h.closed), Cell::F(err)])?;
    }
    t.finish()?;
    outcome.at_most("hamiltonian_max_abs_err", worst, c.hamiltonian_tol);

    out.timed("lambda_max", |out| lambda_checks(c, cfg.seed, out, outcome))?;
    if !c.points.is_empty() {
        out.timed("lemmas", |out| lemmas(cfg, c, out, outcome))?;
    }
    Ok(())
}

fn lambda_checks(c: &CheckConfig, seed: u64, out: &mut OutDir, outcome: &mut Outcome) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1a3b_da7a);
    let head: Vec<String> = ["case_id", "n", "fd", "inner", "rel_err"].map(String::from).to_vec();
    let mut t = out.table("lambda_checks.csv", &head)?;
    let mut worst = 0.0f64;
    let mut k = 0;
    while k < c.lambda_cases {
        let n = rng.random_range(2..6);
        let s = random_sym(&mut rng, n);
        let mut ev: Vec<f64> = SymmetricEigen::new(s.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        if ev[0] - ev[1] < 1e-2 {
            continue;
        }
        let h = random_sym(&mut rng, n);
        let (fd, inner) = lambda_max_derivative_check(&s, &h)?;
        let rel = (fd - inner).abs() / inner.abs().max(1.0);
        worst = worst.max(rel);
        t.row(&[Cell::U(k), Cell::U(n), Cell::F(fd), Cell::F(inner), Cell::F(rel)])?;
        k += 1;
    }
    t.finish()?;
    outcome.at_most("lambda_max_derivative_rel_err", worst, c.lambda_tol);
    Ok(())
}

struct LemmaRow {
    lemma: &'static str,
    case: String,
    x: Vec<f64>,
    lhs: f64,
    rhs: f64,
    holds: bool,
}

fn lemmas(cfg: &ExperimentConfig, c: &CheckConfig, out: &mut OutDir, outcome: &mut Outcome) -> Result<()> {
    let ef = cfg.eframe()?;
    let n = ef.dim();
    let dynm = Dynamics::controlled_eps(&ef);
    let cost = cfg.cost()?;
    let family = constant_family(n, c.directions)?;
    let mut pols: Vec<Arc<dyn ControlPolicy>> = spread_order(family.len())
        .into_iter()
        .map(|i| family[i].clone())
        .collect();
    pols.push(Arc::new(cfg.feedback_policy("controlled-eps", None, None)?));
    let mut exps: Vec<Exponent> = c.exponents.iter().map(|p| Exponent::Finite(*p)).collect();
    exps.push(Exponent::Infinity);
    let spec = SearchSpec {
        t: 0.0,
        horizon: c.horizon,
        dt: c.dt,
        paths: c.paths,
        seed: cfg.seed,
        exponents: exps.clone(),
        budgets: vec![],
        integrator: Integrator::Heun,
    };
    let base = cost.clone();
    let (upper, last) = (cost.upper(), n - 1);
    let raised = TerminalCost::custom(
        "raised",
        n,
        move |x| (base.value(x) + 0.125 * (1.0 + x[last].cos())).min(upper),
        cost.lower(),
        cost.upper(),
        cost.lipschitz() + 0.125,
    )?;
    type Map = (&'static str, fn(f64) -> f64, f64);
    let maps: [Map; 3] = [
        ("exp", f64::exp, cost.upper().exp()),
        ("cubic", |s| s * s * s + s, 3.0 * cost.bound() * cost.bound() + 1.0),
        ("affine", |s| 3.0 * s - 0.5, 3.0),
    ];
    let mut rows = Vec::new();
    for x in &c.points {
        let r = search(&dynm, &cost, &pols, x, &spec)?;
        for (w, e) in r.estimates.windows(2).zip(&exps[1..]) {
            rows.push(LemmaRow {
                lemma: "p_monotone",
                case: format!("{}<={}", w[0].exponent, e),
                x: x.clone(),
                lhs: w[0].estimate,
                rhs: w[1].estimate,
                holds: w[0].estimate <= w[1].estimate,
            });
        }
        let vinf = r.estimates.last().unwrap();
        for e in &r.estimates[..r.estimates.len() - 1] {
            rows.push(LemmaRow {
                lemma: "below_sup",
                case: format!("{}<=inf", e.exponent),
                x: x.clone(),
                lhs: e.estimate,
                rhs: vinf.estimate,
                holds: e.estimate <= vinf.estimate,
            });
        }
        let r2 = search(&dynm, &raised, &pols, x, &spec)?;
        for (a, b) in r.estimates.iter().zip(&r2.estimates) {
            rows.push(LemmaRow {
                lemma: "comparison",
                case: format!("p={}", a.exponent),
                x: x.clone(),
                lhs: a.estimate,
                rhs: b.estimate,
                holds: a.estimate <= b.estimate,
            });
        }
        let sup_spec = SearchSpec {
            exponents: vec![Exponent::Infinity],
            ..spec.clone()
        };
        let plain = search(&dynm, &cost, &pols, x, &sup_spec)?.estimates.remove(0);
        for (name, phi, lip) in maps {
            let composed = cost.compose(name, phi, lip)?;
            let mapped = search(&dynm, &composed, &pols, x, &sup_spec)?.estimates.remove(0);
            rows.push(LemmaRow {
                lemma: "commutation",
                case: name.to_string(),
                x: x.clone(),
                lhs: phi(plain.estimate),
                rhs: mapped.estimate,
                holds: phi(plain.estimate) == mapped.estimate && plain.policy_id == mapped.policy_id,
            });
        }
    }
    let mut t = out.table(
        "lemmas.csv",
        &header(&["lemma", "case", "t"], n, &["lhs", "rhs", "holds"]),
    )?;
    for r in &rows {
        let mut cells = vec![Cell::S(r.lemma), Cell::S(&r.case), Cell::F(0.0)];
        cells.extend(r.x.iter().map(|v| Cell::F(*v)));
        cells.extend([
            Cell::F(r.lhs),
            Cell::F(r.rhs),
            Cell::S(if r.holds { "true" } else { "false" }),
        ]);
        t.row(&cells)?;
    }
    t.finish()?;
    for lemma in ["p_monotone", "below_sup", "comparison", "commutation"] {
        let bad = rows.iter().filter(|r| r.lemma == lemma && !r.holds).count();
        outcome.at_most(format!("{lemma}_violations"), bad as f64, 0.0);
    }
    Ok(())
}
