//! Experiment configuration: a TOML document with one table per stage.
//! Unknown keys are rejected and every numeric field is validated before
//! any computation starts.

use crate::expr::parse_polynomial;
use anyhow::{bail, ensure, Context, Result};
use hmcf_core::sde::{ConstantPolicy, ControlPolicy, GradientOrthogonalPolicy, Integrator};
use hmcf_core::value::Exponent;
use hmcf_core::{AnalyticField, Dynamics, EpsilonFrame, Frame, Grid, ScalarField, TerminalCost};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub frame: FrameConfig,
    pub grid: Option<GridConfig>,
    pub time: Option<TimeConfig>,
    pub pde: Option<PdeConfig>,
    pub cost: Option<CostConfig>,
    pub simulate: Option<SimulateConfig>,
    pub value: Option<ValueConfig>,
    pub compare: Option<CompareConfig>,
    pub sweep: Option<SweepConfig>,
    pub check: Option<CheckConfig>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FrameConfig {
    /// `heisenberg1`, `euclidean` or `custom`.
    pub kind: String,
    pub dim: Option<usize>,
    /// Custom frames: one list of component expressions per field.
    pub fields: Option<Vec<Vec<String>>>,
    #[serde(default = "one")]
    pub epsilon: f64,
}

/// Initial data of the PDE as a plain function of `x`.
pub type InitialData = Box<dyn Fn(&[f64]) -> f64 + Sync>;

fn one() -> f64 {
    1.0
}

/// A scalar applied to every axis, or one value per axis.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum PerAxis<T> {
    All(T),
    Each(Vec<T>),
}

impl<T: Clone> PerAxis<T> {
    fn expand(&self, dim: usize, what: &str) -> Result<Vec<T>> {
        match self {
            PerAxis::All(v) => Ok(vec![v.clone(); dim]),
            PerAxis::Each(v) => {
                ensure!(
                    v.len() == dim,
                    "grid.{what} has {} entries, frame dimension is {dim}",
                    v.len()
                );
                Ok(v.clone())
            }
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lo: PerAxis<f64>,
    pub hi: PerAxis<f64>,
    pub nodes: PerAxis<usize>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub horizon: Option<f64>,
    /// Fixed number of steps; the horizon becomes `steps * dt`.
    pub steps: Option<usize>,
    /// Step size; the CFL limit when absent.
    pub dt: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PdeConfig {
    /// Initial data as a polynomial expression; the terminal cost when absent.
    pub initial: Option<String>,
    /// `none`, `final` or `all` (every series sample).
    #[serde(default = "default_snapshots")]
    pub snapshots: String,
    /// Number of series samples over the run.
    #[serde(default = "default_samples")]
    pub samples: usize,
    pub radius: Option<RadiusConfig>,
    /// Largest admissible interior change between initial and final data.
    pub stationary_tol: Option<f64>,
}

fn default_snapshots() -> String {
    "final".into()
}

fn default_samples() -> usize {
    70
}

/// Zero-set radius about `center` in the listed coordinates (1-based); with
/// `r0`, checked against `sqrt(r0^2 - 2 (k - 1) t)` for `k` axes.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RadiusConfig {
    pub center: Vec<f64>,
    pub axes: Vec<usize>,
    pub r0: Option<f64>,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    pub window: Option<[f64; 2]>,
}

fn default_rel_tol() -> f64 {
    0.02
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    /// `sphere`, `cylinder`, `plane`, `clamped-distance` or `constant`.
    pub kind: String,
    pub radius: Option<f64>,
    pub cap: Option<f64>,
    pub center: Option<Vec<f64>>,
    /// 1-based coordinate for `plane`.
    pub axis: Option<usize>,
    #[serde(default)]
    pub offset: f64,
    pub value: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    /// `constant` or `feedback`.
    pub kind: String,
    pub direction: Option<Vec<f64>>,
    /// Guide of the feedback rule; the cost's guide when absent.
    pub guide: Option<String>,
    pub fallback: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    /// `horizontal-bm`, `controlled-eps` or `controlled-sub`.
    pub mode: String,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub t: f64,
    pub horizon: f64,
    pub dt: f64,
    pub paths: usize,
    #[serde(default = "default_integrator")]
    pub integrator: String,
    pub policy: Option<PolicyConfig>,
    /// Paths written to the path dump.
    #[serde(default)]
    pub dump_paths: usize,
    /// Recording cadence of the dump, in steps.
    #[serde(default = "one_usize")]
    pub dump_every: usize,
    pub expect: Option<SimulateExpect>,
}

fn one_usize() -> usize {
    1
}

fn default_integrator() -> String {
    "heun".into()
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateExpect {
    /// Coordinates (1-based) whose terminal mean must be zero within
    /// `mean_sigmas` standard errors.
    #[serde(default)]
    pub zero_mean: Vec<usize>,
    #[serde(default = "three")]
    pub mean_sigmas: f64,
    #[serde(default)]
    pub second_moment: Vec<MomentExpect>,
}

fn three() -> f64 {
    3.0
}

/// `E[(x_coord - x0_coord)^2]` against `value`: within `rel_tol * value`,
/// or within `sigmas` standard errors.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MomentExpect {
    pub coord: usize,
    pub value: f64,
    pub rel_tol: Option<f64>,
    pub sigmas: Option<f64>,
}

/// An exponent written as a number or as `"inf"`.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum ExponentSpec {
    Number(f64),
    Text(String),
}

impl ExponentSpec {
    pub fn parse(&self) -> Result<Exponent> {
        let e = match self {
            ExponentSpec::Number(p) if *p > 1.0 && p.is_finite() => Some(Exponent::Finite(*p)),
            ExponentSpec::Number(_) => None,
            ExponentSpec::Text(s) => Exponent::parse(s),
        };
        e.with_context(|| format!("exponent {self:?} must be a number above 1 or \"inf\""))
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ValueConfig {
    #[serde(default)]
    pub t: f64,
    /// Defaults to `time.horizon`.
    pub horizon: Option<f64>,
    pub dt: f64,
    pub paths: usize,
    pub exponents: Vec<ExponentSpec>,
    pub points: Vec<Vec<f64>>,
    #[serde(default = "default_mode")]
    pub mode: String,
    /// Size of the constant-direction family; the default resolution when absent.
    pub directions: Option<usize>,
    /// Append the gradient-orthogonal feedback policy to the family.
    #[serde(default = "yes")]
    pub feedback: bool,
    pub fallback: Option<Vec<f64>>,
    /// Policy counts at which best-so-far values are reported.
    #[serde(default)]
    pub budgets: Vec<usize>,
    #[serde(default = "default_integrator")]
    pub integrator: String,
}

fn default_mode() -> String {
    "controlled-eps".into()
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    /// Tolerance on `|PDE - V_inf|` as a fraction of the cost range.
    #[serde(default = "default_compare_tol")]
    pub tol_fraction: f64,
}

fn default_compare_tol() -> f64 {
    0.15
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// `epsilon`, `p`, `dt`, `h`, `K` or `directions`.
    pub axis: String,
    pub values: Vec<f64>,
    /// `dt` axis: dynamics mode, `controlled-eps` when absent.
    pub mode: Option<String>,
    /// `dt` axis: evaluation point, frozen direction and sample count.
    pub point: Option<Vec<f64>>,
    pub direction: Option<Vec<f64>>,
    pub paths: Option<usize>,
    #[serde(default = "default_integrator")]
    pub integrator: String,
    #[serde(default = "default_min_order")]
    pub min_order: f64,
    /// `directions` axis: random cases per resolution.
    #[serde(default = "default_cases")]
    pub cases: usize,
}

fn default_min_order() -> f64 {
    0.9
}

fn default_cases() -> usize {
    100
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    #[serde(default = "default_cases")]
    pub hamiltonian_cases: usize,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "default_hamiltonian_tol")]
    pub hamiltonian_tol: f64,
    #[serde(default = "default_cases")]
    pub lambda_cases: usize,
    #[serde(default = "default_lambda_tol")]
    pub lambda_tol: f64,
    /// Points of the value-function lemma suite.
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    #[serde(default = "default_lemma_exponents")]
    pub exponents: Vec<f64>,
    #[serde(default = "default_lemma_paths")]
    pub paths: usize,
    #[serde(default = "default_lemma_dt")]
    pub dt: f64,
    #[serde(default = "default_lemma_horizon")]
    pub horizon: f64,
    #[serde(default = "default_lemma_directions")]
    pub directions: usize,
}

fn default_resolution() -> usize {
    720
}

fn default_hamiltonian_tol() -> f64 {
    1e-3
}

fn default_lambda_tol() -> f64 {
    1e-5
}

fn default_lemma_exponents() -> Vec<f64> {
    vec![2.0, 4.0, 8.0, 16.0]
}

fn default_lemma_paths() -> usize {
    2000
}

fn default_lemma_dt() -> f64 {
    0.01
}

fn default_lemma_horizon() -> f64 {
    0.2
}

fn default_lemma_directions() -> usize {
    48
}

fn positive(name: &str, v: f64) -> Result<()> {
    ensure!(v > 0.0 && v.is_finite(), "{name} must be positive and finite, got {v}");
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok((Self::from_toml(&text)?, text))
    }

    pub fn validate(&self) -> Result<()> {
        let ef = self.eframe()?;
        let n = ef.dim();
        if self.grid.is_some() {
            self.grid()?;
        }
        if let Some(t) = &self.time {
            ensure!(
                t.horizon.is_some() || t.steps.is_some(),
                "time needs either horizon or steps"
            );
            if let Some(h) = t.horizon {
                ensure!(h >= 0.0 && h.is_finite(), "time.horizon must be non-negative, got {h}");
            }
            if let Some(dt) = t.dt {
                positive("time.dt", dt)?;
            }
            ensure!(
                t.steps.is_none() || t.horizon.is_none(),
                "time.horizon and time.steps are exclusive"
            );
        }
        if let Some(p) = &self.pde {
            ensure!(
                matches!(p.snapshots.as_str(), "none" | "final" | "all"),
                "pde.snapshots must be none, final or all"
            );
            ensure!(p.samples >= 1, "pde.samples must be at least 1");
            if let Some(r) = &p.radius {
                ensure!(r.center.len() == n, "pde.radius.center needs {n} coordinates");
                ensure!(
                    !r.axes.is_empty() && r.axes.iter().all(|&a| a >= 1 && a <= n),
                    "pde.radius.axes must list coordinates in 1..={n}"
                );
                if let Some(r0) = r.r0 {
                    positive("pde.radius.r0", r0)?;
                }
                positive("pde.radius.rel_tol", r.rel_tol)?;
                if let Some([a, b]) = r.window {
                    ensure!(a <= b, "pde.radius.window must be ordered");
                }
            }
            if let Some(tol) = p.stationary_tol {
                positive("pde.stationary_tol", tol)?;
            }
            if let Some(init) = &p.initial {
                parse_polynomial(init, n).context("pde.initial")?;
            }
        }
        if self.cost.is_some() {
            self.cost()?;
        }
        if let Some(s) = &self.simulate {
            ensure!(s.x0.len() == n, "simulate.x0 needs {n} coordinates");
            positive("simulate.dt", s.dt)?;
            ensure!(s.horizon > s.t, "simulate.horizon must exceed simulate.t");
            ensure!(s.paths > 0, "simulate.paths must be positive");
            ensure!(s.dump_every > 0, "simulate.dump_every must be positive");
            ensure!(s.dump_paths <= s.paths, "simulate.dump_paths exceeds simulate.paths");
            self.dynamics(&s.mode)?;
            integrator(&s.integrator)?;
            if s.mode != "horizontal-bm" {
                ensure!(s.policy.is_some(), "controlled simulation needs simulate.policy");
            }
            if let Some(e) = &s.expect {
                for &c in &e.zero_mean {
                    ensure!(
                        c >= 1 && c <= n,
                        "simulate.expect.zero_mean coordinate {c} outside 1..={n}"
                    );
                }
                for m in &e.second_moment {
                    ensure!(m.coord >= 1 && m.coord <= n, "second_moment coordinate outside 1..={n}");
                    ensure!(
                        m.rel_tol.is_some() || m.sigmas.is_some(),
                        "second_moment needs rel_tol or sigmas"
                    );
                }
            }
        }
        if let Some(v) = &self.value {
            positive("value.dt", v.dt)?;
            ensure!(v.paths > 0, "value.paths must be positive");
            ensure!(!v.exponents.is_empty(), "value.exponents must not be empty");
            for e in &v.exponents {
                e.parse()?;
            }
            ensure!(!v.points.is_empty(), "value.points must not be empty");
            for p in &v.points {
                ensure!(p.len() == n, "value point {p:?} needs {n} coordinates");
            }
            let horizon = self.value_horizon()?;
            ensure!(v.t <= horizon, "value.t must not exceed the horizon");
            ensure!(
                matches!(v.mode.as_str(), "controlled-eps" | "controlled-sub"),
                "value.mode must be controlled-eps or controlled-sub"
            );
            integrator(&v.integrator)?;
            ensure!(self.cost.is_some(), "value estimation needs a [cost] table");
            ensure!(v.directions.is_none_or(|d| d > 0), "value.directions must be positive");
        }
        if let Some(c) = &self.compare {
            ensure!(
                self.value.is_some() && self.grid.is_some(),
                "compare needs [value] and [grid] tables"
            );
            positive("compare.tol_fraction", c.tol_fraction)?;
        }
        if let Some(s) = &self.sweep {
            ensure!(
                matches!(s.axis.as_str(), "epsilon" | "p" | "dt" | "h" | "K" | "directions"),
                "sweep.axis must be one of epsilon, p, dt, h, K, directions"
            );
            ensure!(!s.values.is_empty(), "sweep.values must not be empty");
            for &v in &s.values {
                if !(s.axis == "p" && v == f64::INFINITY) {
                    positive("sweep value", v)?;
                }
            }
            integrator(&s.integrator)?;
            if s.axis == "dt" {
                ensure!(
                    s.point.as_ref().is_some_and(|p| p.len() == n),
                    "sweep.point needs {n} coordinates"
                );
                ensure!(
                    s.paths.is_some_and(|k| k >= 2 && k % 2 == 0),
                    "sweep.paths must be even"
                );
                let mode = s.mode.as_deref().unwrap_or("controlled-eps");
                self.dynamics(mode)?;
                if mode != "horizontal-bm" {
                    ensure!(
                        s.direction.is_some(),
                        "sweep.direction is required for controlled dynamics"
                    );
                }
            }
        }
        if let Some(c) = &self.check {
            ensure!(c.resolution > 0, "check.resolution must be positive");
            for p in &c.points {
                ensure!(p.len() == n, "check point {p:?} needs {n} coordinates");
            }
            ensure!(c.exponents.iter().all(|p| *p > 1.0), "check.exponents must exceed 1");
            positive("check.dt", c.dt)?;
            positive("check.horizon", c.horizon)?;
            ensure!(c.paths > 0, "check.paths must be positive");
        }
        Ok(())
    }

    pub fn frame(&self) -> Result<Frame> {
        let f = &self.frame;
        let frame = match f.kind.as_str() {
            "heisenberg1" => {
                ensure!(f.dim.is_none_or(|d| d == 3), "heisenberg1 is three-dimensional");
                Frame::heisenberg1()
            }
            "euclidean" => Frame::euclidean(f.dim.context("euclidean frames need frame.dim")?)?,
            "custom" => {
                let dim = f.dim.context("custom frames need frame.dim")?;
                let fields = f.fields.as_ref().context("custom frames need frame.fields")?;
                let polys = fields
                    .iter()
                    .map(|comps| {
                        comps
                            .iter()
                            .map(|c| parse_polynomial(c, dim))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()
                    .context("frame.fields")?;
                Frame::custom(dim, polys)?
            }
            other => bail!("unknown frame kind \"{other}\""),
        };
        Ok(frame)
    }

    pub fn eframe(&self) -> Result<EpsilonFrame> {
        Ok(self.frame()?.with_epsilon(self.frame.epsilon)?)
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = self.grid.as_ref().context("missing [grid] table")?;
        let n = self.frame()?.dim();
        let lo = g.lo.expand(n, "lo")?;
        let hi = g.hi.expand(n, "hi")?;
        let nodes = g.nodes.expand(n, "nodes")?;
        Ok(Grid::new(lo, hi, nodes)?)
    }

    pub fn cost(&self) -> Result<TerminalCost> {
        let c = self.cost.as_ref().context("missing [cost] table")?;
        let n = self.frame()?.dim();
        let need = |v: Option<f64>, what: &str| v.with_context(|| format!("cost.{what} is required for {}", c.kind));
        let center = || -> Result<Vec<f64>> {
            let ctr = c.center.clone().unwrap_or_else(|| vec![0.0; n]);
            ensure!(ctr.len() == n, "cost.center needs {n} coordinates");
            Ok(ctr)
        };
        let cost = match c.kind.as_str() {
            "sphere" => TerminalCost::sphere(center()?, need(c.radius, "radius")?, need(c.cap, "cap")?)?,
            "cylinder" => TerminalCost::cylinder(n, need(c.radius, "radius")?, need(c.cap, "cap")?)?,
            "plane" => {
                let axis = c.axis.context("cost.axis is required for plane")?;
                ensure!(axis >= 1, "cost.axis is 1-based");
                TerminalCost::plane(n, axis - 1, c.offset, need(c.cap, "cap")?)?
            }
            "clamped-distance" => {
                TerminalCost::clamped_distance(center()?, need(c.radius, "radius")?, need(c.cap, "cap")?)?
            }
            "constant" => TerminalCost::constant(n, need(c.value, "value")?)?,
            other => bail!("unknown cost kind \"{other}\""),
        };
        Ok(cost)
    }

    /// Initial data of the PDE: `pde.initial` or the terminal cost.
    pub fn initial_field(&self) -> Result<InitialData> {
        let n = self.frame()?.dim();
        if let Some(src) = self.pde.as_ref().and_then(|p| p.initial.as_ref()) {
            let poly = parse_polynomial(src, n)?;
            return Ok(Box::new(move |x| poly.eval(x)));
        }
        let cost = self
            .cost()
            .context("PDE initial data needs pde.initial or a [cost] table")?;
        Ok(Box::new(move |x| cost.value(x)))
    }

    /// PDE horizon and optional fixed step from the `[time]` table.
    pub fn time_plan(&self, cfl: f64) -> Result<(f64, Option<f64>)> {
        let t = self.time.as_ref().context("missing [time] table")?;
        match (t.horizon, t.steps) {
            (Some(h), _) => Ok((h, t.dt)),
            (None, Some(k)) => {
                let dt = t.dt.unwrap_or(cfl);
                Ok((k as f64 * dt, Some(dt)))
            }
            (None, None) => bail!("time needs either horizon or steps"),
        }
    }

    pub fn value_horizon(&self) -> Result<f64> {
        let v = self.value.as_ref().context("missing [value] table")?;
        v.horizon
            .or_else(|| self.time.as_ref().and_then(|t| t.horizon))
            .context("value.horizon or time.horizon is required")
    }

    pub fn dynamics(&self, mode: &str) -> Result<Dynamics> {
        Ok(match mode {
            "horizontal-bm" => Dynamics::horizontal_bm(&self.frame()?),
            "controlled-eps" => Dynamics::controlled_eps(&self.eframe()?),
            "controlled-sub" => Dynamics::controlled_sub(&self.frame()?),
            other => bail!("unknown dynamics mode \"{other}\""),
        })
    }

    /// Guide of the feedback rule: an expression, or the cost's smooth guide.
    pub fn guide(&self, expr: Option<&str>) -> Result<Arc<dyn ScalarField>> {
        let n = self.frame()?.dim();
        if let Some(src) = expr {
            return Ok(Arc::new(AnalyticField::polynomial(parse_polynomial(src, n)?)));
        }
        let cost = self.cost().context("feedback policy needs a guide or a [cost] table")?;
        let g = cost.guide().context("the configured cost has no smooth guide")?;
        Ok(Arc::new(g.clone()))
    }

    pub fn feedback_policy(
        &self,
        mode: &str,
        fallback: Option<&[f64]>,
        guide: Option<&str>,
    ) -> Result<GradientOrthogonalPolicy> {
        let guide = self.guide(guide)?;
        Ok(match mode {
            "controlled-sub" => {
                let f = self.frame()?;
                let fb = fallback
                    .map(<[f64]>::to_vec)
                    .unwrap_or_else(|| axis_vector(f.rank(), 0));
                GradientOrthogonalPolicy::sub("feedback", &f, guide, fb)?
            }
            _ => {
                let ef = self.eframe()?;
                let fb = fallback
                    .map(<[f64]>::to_vec)
                    .unwrap_or_else(|| axis_vector(ef.dim(), ef.dim() - 1));
                GradientOrthogonalPolicy::eps("feedback", &ef, guide, fb)?
            }
        })
    }

    pub fn policy(&self, mode: &str, p: &PolicyConfig) -> Result<Arc<dyn ControlPolicy>> {
        Ok(match p.kind.as_str() {
            "constant" => {
                let a = p.direction.clone().context("constant policy needs a direction")?;
                let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
                ensure!(norm > 0.0, "policy direction must be nonzero");
                let a: Vec<f64> = a.iter().map(|v| v / norm).collect();
                Arc::new(ConstantPolicy::new("constant", a)?)
            }
            "feedback" => Arc::new(self.feedback_policy(mode, p.fallback.as_deref(), p.guide.as_deref())?),
            other => bail!("unknown policy kind \"{other}\""),
        })
    }

    pub fn exponents(&self) -> Result<Vec<Exponent>> {
        let v = self.value.as_ref().context("missing [value] table")?;
        v.exponents.iter().map(ExponentSpec::parse).collect()
    }
}

pub fn integrator(name: &str) -> Result<Integrator> {
    Ok(match name {
        "heun" => Integrator::Heun,
        "euler-maruyama" => Integrator::EulerMaruyama,
        other => bail!("unknown integrator \"{other}\""),
    })
}

fn axis_vector(n: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    v
}
