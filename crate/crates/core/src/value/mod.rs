//! Monte Carlo estimates of the p-value functions and the ess-sup value
//! function over enumerated policy families.

pub mod cost;
pub mod hamiltonian;

pub use cost::TerminalCost;
pub use hamiltonian::{
    closed_form_h_eps, closed_form_hp, hamiltonian_h, hamiltonian_h_eps, hamiltonian_hp, hamiltonian_hp_eps,
    lambda_max_derivative_check, HamiltonianValue, Search,
};

use crate::directions;
use crate::error::{Error, Result};
use crate::sde::{simulate_terminal, ConstantPolicy, ControlPolicy, Dynamics, GridTablePolicy, Integrator, SimSpec};
use std::fmt;
use std::sync::Arc;

/// Paths per pruning check in the policy search.
pub const SEARCH_CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Some(Exponent::Infinity),
            t => t
                .parse::<f64>()
                .ok()
                .filter(|p| *p > 1.0 && p.is_finite())
                .map(Exponent::Finite),
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => write!(f, "inf"),
        }
    }
}

/// Estimate of a value function at `(t, x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueEstimate {
    pub t: f64,
    pub x: Vec<f64>,
    pub exponent: Exponent,
    pub estimate: f64,
    /// Delta-method standard error for finite exponents; zero for the
    /// sample maximum, whose error is a bias rather than a variance.
    pub stderr: f64,
    pub policy_id: String,
    pub paths: usize,
    pub seed: u64,
    /// Shift applied before taking powers and removed afterwards.
    pub shift: f64,
}

/// Sampling parameters shared by every policy in a search.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchSpec {
    pub t: f64,
    pub horizon: f64,
    pub dt: f64,
    pub paths: usize,
    pub seed: u64,
    pub exponents: Vec<Exponent>,
    /// Policy counts at which the best-so-far values are recorded.
    pub budgets: Vec<usize>,
    pub integrator: Integrator,
}

/// Best values over the first `budget` policies, one per exponent.
#[derive(Clone, Debug, PartialEq)]
pub struct BudgetRow {
    pub budget: usize,
    pub estimates: Vec<f64>,
    pub policy_ids: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    /// One estimate per requested exponent, in order.
    pub estimates: Vec<ValueEstimate>,
    pub trace: Vec<BudgetRow>,
    /// Policies whose paths were all simulated.
    pub completed: usize,
    /// Policies abandoned once they could no longer win for any exponent.
    pub pruned: usize,
}

/// Relative slack of the log-domain pruning test.
const RANK_MARGIN: f64 = 1e-12;

/// Running statistics of one policy for one exponent.
///
/// Finite exponents keep `sum (v / scale)^p` with `scale` the largest
/// shifted value seen so far, so large `p` neither overflows nor underflows.
#[derive(Clone, Copy, Debug)]
struct Acc {
    /// Scaled sum of shifted powers, or the running maximum for the sample max.
    key: f64,
    sumsq: f64,
    scale: f64,
    min: f64,
    max: f64,
}

impl Acc {
    fn new(exp: Exponent) -> Self {
        Self {
            key: match exp {
                Exponent::Finite(_) => 0.0,
                Exponent::Infinity => f64::NEG_INFINITY,
            },
            sumsq: 0.0,
            scale: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    #[inline]
    fn push(&mut self, exp: Exponent, g: f64, shift: f64) {
        match exp {
            Exponent::Finite(p) => {
                let v = g + shift;
                if v > self.scale {
                    let r = if self.scale > 0.0 {
                        (self.scale / v).powf(p)
                    } else {
                        0.0
                    };
                    self.key = self.key * r + 1.0;
                    self.sumsq = self.sumsq * r * r + 1.0;
                    self.scale = v;
                } else if self.scale > 0.0 {
                    let y = (v / self.scale).powf(p);
                    self.key += y;
                    self.sumsq += y * y;
                }
                self.min = self.min.min(v);
                self.max = self.max.max(v);
            }
            Exponent::Infinity => {
                self.key = self.key.max(g);
            }
        }
    }

    /// `ln sum v^p`, or the sample maximum.
    fn rank(&self, exp: Exponent) -> f64 {
        match exp {
            Exponent::Infinity => self.key,
            Exponent::Finite(_) if self.key == 0.0 => f64::NEG_INFINITY,
            Exponent::Finite(p) => self.key.ln() + p * self.scale.ln(),
        }
    }

    /// True once these partial sums can no longer beat `best`, leaving a
    /// margin over rounding in the log-domain rank.
    fn hopeless(&self, best: &Acc, exp: Exponent) -> bool {
        let (a, b) = (self.rank(exp), best.rank(exp));
        match exp {
            Exponent::Infinity => a >= b,
            Exponent::Finite(_) => a > b + RANK_MARGIN * (1.0 + b.abs()),
        }
    }

    fn finish(&self, exp: Exponent, shift: f64, k: usize) -> (f64, f64) {
        match exp {
            Exponent::Infinity => (self.key, 0.0),
            Exponent::Finite(p) => {
                let kf = k as f64;
                let mean = self.key / kf;
                let raw = (self.scale * mean.powf(1.0 / p)).clamp(self.min, self.max);
                let var = if k > 1 {
                    ((self.sumsq - self.key * mean) / (kf - 1.0)).max(0.0)
                } else {
                    0.0
                };
                let se_mean = (var / kf).sqrt();
                let se = if mean > 0.0 {
                    self.scale * mean.powf(1.0 / p - 1.0) * se_mean / p
                } else {
                    0.0
                };
                (raw - shift, se)
            }
        }
    }
}

fn validate(spec: &SearchSpec, cost: &TerminalCost, dynamics: &Dynamics, x: &[f64]) -> Result<()> {
    if spec.exponents.is_empty() {
        return Err(Error::InvalidArgument("no exponents requested".into()));
    }
    if let Some(Exponent::Finite(p)) = spec
        .exponents
        .iter()
        .find(|e| matches!(e, Exponent::Finite(p) if !(*p > 1.0)))
    {
        return Err(Error::InvalidArgument(format!("exponent must exceed 1, got {p}")));
    }
    if cost.dim() != dynamics.dim() || x.len() != dynamics.dim() {
        return Err(Error::DimensionMismatch {
            expected: dynamics.dim(),
            got: if cost.dim() != dynamics.dim() {
                cost.dim()
            } else {
                x.len()
            },
        });
    }
    if spec.t > spec.horizon {
        return Err(Error::InvalidArgument(format!(
            "t = {} exceeds T = {}",
            spec.t, spec.horizon
        )));
    }
    if spec.paths == 0 {
        return Err(Error::InvalidArgument("need at least one path".into()));
    }
    Ok(())
}

/// Infimum over `policies` (in order, first minimiser wins) of the Monte
/// Carlo functionals for every requested exponent, with common random
/// numbers across policies. A policy is abandoned as soon as its partial
/// statistics cannot beat the incumbent for any exponent; since the
/// statistics only grow with more paths this never changes the result.
pub fn search(
    dynamics: &Dynamics,
    cost: &TerminalCost,
    policies: &[Arc<dyn ControlPolicy>],
    x: &[f64],
    spec: &SearchSpec,
) -> Result<SearchResult> {
    validate(spec, cost, dynamics, x)?;
    if policies.is_empty() {
        return Err(Error::NoPolicy);
    }
    let shift = cost.shift();
    let exps = &spec.exponents;
    let ne = exps.len();
    let make = |est: f64, se: f64, exp: Exponent, id: &str| ValueEstimate {
        t: spec.t,
        x: x.to_vec(),
        exponent: exp,
        estimate: est,
        stderr: se,
        policy_id: id.to_string(),
        paths: spec.paths,
        seed: spec.seed,
        shift,
    };

    if spec.t == spec.horizon {
        let g = cost.value(x);
        let estimates = exps.iter().map(|&e| make(g, 0.0, e, policies[0].id())).collect();
        let trace = spec
            .budgets
            .iter()
            .map(|&b| BudgetRow {
                budget: b,
                estimates: vec![g; ne],
                policy_ids: vec![policies[0].id().to_string(); ne],
            })
            .collect();
        return Ok(SearchResult {
            estimates,
            trace,
            completed: 0,
            pruned: 0,
        });
    }

    let sim = SimSpec {
        t: spec.t,
        horizon: spec.horizon,
        dt: spec.dt,
        paths: spec.paths,
        seed: spec.seed,
        record_every: 0,
        integrator: spec.integrator,
    };
    let n = dynamics.dim();
    // per exponent: (key, acc, policy index)
    let mut best: Vec<Option<(Acc, usize)>> = vec![None; ne];
    let mut trace = Vec::new();
    let (mut completed, mut pruned) = (0, 0);
    for (j, policy) in policies.iter().enumerate() {
        let mut acc: Vec<Acc> = exps.iter().map(|&e| Acc::new(e)).collect();
        let mut done = 0;
        let mut abandoned = false;
        while done < spec.paths {
            let end = (done + SEARCH_CHUNK).min(spec.paths);
            let states = simulate_terminal(dynamics, Some(policy.as_ref()), x, &sim, done..end)?;
            for y in states.chunks(n) {
                let g = cost.value(y);
                for (a, &e) in acc.iter_mut().zip(exps) {
                    a.push(e, g, shift);
                }
            }
            done = end;
            let hopeless = (0..ne).all(|i| matches!(&best[i], Some((b, _)) if acc[i].hopeless(b, exps[i])));
            if hopeless && done < spec.paths {
                abandoned = true;
                break;
            }
        }
        if abandoned {
            pruned += 1;
        } else {
            completed += 1;
            for i in 0..ne {
                let better = match &best[i] {
                    None => true,
                    Some((b, _)) => {
                        acc[i].finish(exps[i], shift, spec.paths).0 < b.finish(exps[i], shift, spec.paths).0
                    }
                };
                if better {
                    best[i] = Some((acc[i], j));
                }
            }
        }
        if spec.budgets.contains(&(j + 1)) {
            let mut estimates = Vec::with_capacity(ne);
            let mut ids = Vec::with_capacity(ne);
            for i in 0..ne {
                let (a, idx) = best[i].as_ref().expect("first policy always completes");
                estimates.push(a.finish(exps[i], shift, spec.paths).0);
                ids.push(policies[*idx].id().to_string());
            }
            trace.push(BudgetRow {
                budget: j + 1,
                estimates,
                policy_ids: ids,
            });
        }
    }
    let estimates = (0..ne)
        .map(|i| {
            let (a, idx) = best[i].as_ref().ok_or(Error::NoPolicy)?;
            let (est, se) = a.finish(exps[i], shift, spec.paths);
            Ok(make(est, se, exps[i], policies[*idx].id()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SearchResult {
        estimates,
        trace,
        completed,
        pruned,
    })
}

/// Constant policies on the default direction grid of the noise dimension.
pub fn constant_family(dim: usize, resolution: usize) -> Result<Vec<Arc<dyn ControlPolicy>>> {
    directions::direction_grid(dim, resolution)
        .into_iter()
        .enumerate()
        .map(|(i, a)| {
            let p: Arc<dyn ControlPolicy> =
                Arc::new(ConstantPolicy::new(format!("const-{i:04}"), a.as_slice().to_vec())?);
            Ok(p)
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn single(
    dynamics: &Dynamics,
    cost: &TerminalCost,
    t: f64,
    horizon: f64,
    x: &[f64],
    exp: Exponent,
    policies: &[Arc<dyn ControlPolicy>],
    budget: usize,
    paths: usize,
    seed: u64,
    dt: f64,
) -> Result<ValueEstimate> {
    let take = budget.min(policies.len());
    if take == 0 {
        return Err(Error::NoPolicy);
    }
    let spec = SearchSpec {
        t,
        horizon,
        dt,
        paths,
        seed,
        exponents: vec![exp],
        budgets: vec![],
        integrator: Integrator::Heun,
    };
    Ok(search(dynamics, cost, &policies[..take], x, &spec)?.estimates.remove(0))
}

/// `inf` over the first `budget` policies of `(mean g~^p)^(1/p) - shift`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_vp(
    dynamics: &Dynamics,
    cost: &TerminalCost,
    t: f64,
    horizon: f64,
    x: &[f64],
    p: f64,
    policies: &[Arc<dyn ControlPolicy>],
    budget: usize,
    paths: usize,
    seed: u64,
    dt: f64,
) -> Result<ValueEstimate> {
    if !(p > 1.0) {
        return Err(Error::InvalidArgument(format!("exponent must exceed 1, got {p}")));
    }
    single(
        dynamics,
        cost,
        t,
        horizon,
        x,
        Exponent::Finite(p),
        policies,
        budget,
        paths,
        seed,
        dt,
    )
}

/// `inf` over the first `budget` policies of the sample maximum of `g`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_vinf(
    dynamics: &Dynamics,
    cost: &TerminalCost,
    t: f64,
    horizon: f64,
    x: &[f64],
    policies: &[Arc<dyn ControlPolicy>],
    budget: usize,
    paths: usize,
    seed: u64,
    dt: f64,
) -> Result<ValueEstimate> {
    single(
        dynamics,
        cost,
        t,
        horizon,
        x,
        Exponent::Infinity,
        policies,
        budget,
        paths,
        seed,
        dt,
    )
}

/// Coordinate descent over the cells of a grid-table policy: each cell in
/// turn tries every candidate direction and keeps the one minimising the
/// estimate for `exponent`. Stops after `budget` policy evaluations.
#[allow(clippy::too_many_arguments)]
pub fn grid_table_descent(
    dynamics: &Dynamics,
    cost: &TerminalCost,
    x: &[f64],
    spec: &SearchSpec,
    start: GridTablePolicy,
    candidates: &[Vec<f64>],
    exponent: Exponent,
    budget: usize,
) -> Result<(GridTablePolicy, ValueEstimate, usize)> {
    let mut spec = spec.clone();
    spec.exponents = vec![exponent];
    spec.budgets = vec![];
    let eval = |pol: &GridTablePolicy| -> Result<ValueEstimate> {
        let arc: Arc<dyn ControlPolicy> = Arc::new(pol.clone());
        Ok(search(dynamics, cost, &[arc], x, &spec)?.estimates.remove(0))
    };
    let mut current = start;
    let mut best = eval(&current)?;
    let mut used = 1;
    'outer: for cell in 0..current.cells() {
        for cand in candidates {
            if used >= budget {
                break 'outer;
            }
            if current.cell_direction(cell) == cand.as_slice() {
                continue;
            }
            let mut trial = current.clone();
            trial.set_cell(cell, cand.clone())?;
            let trial = trial.with_id(format!("table-c{cell}-e{used}"));
            let est = eval(&trial)?;
            used += 1;
            if est.estimate < best.estimate {
                best = est;
                current = trial;
            }
        }
    }
    Ok((current, best, used))
}
