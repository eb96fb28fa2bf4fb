//! Horizontal Brownian motion and the controlled Stratonovich dynamics,
//! integrated with a Heun predictor-corrector.

pub mod policy;
pub mod weak_order;

pub use policy::{
    extremal_control, ConstantPolicy, ControlPolicy, GradientOrthogonalPolicy, GridTablePolicy, PolicyFamily,
};

use crate::error::{Error, Result};
use crate::frames::{EpsilonFrame, Frame, VectorField, MAX_DIM};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// Factor multiplying the diffusion in the controlled dynamics.
pub const CONTROLLED_NOISE_SCALE: f64 = std::f64::consts::SQRT_2;

/// Paths simulated per parallel task.
const PATHS_PER_TASK: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// `d xi = sum_i X_i(xi) o dB^i`, no control.
    HorizontalBm,
    /// `d xi = sqrt(2) sigma^T(xi) o nu dB` with `nu` acting on R^m.
    ControlledSub,
    /// `d xi = sqrt(2) sigma_eps^T(xi) o nu dB` with `nu` acting on R^N.
    ControlledEps,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::HorizontalBm => "horizontal-bm",
            Mode::ControlledSub => "controlled-sub",
            Mode::ControlledEps => "controlled-eps",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Integrator {
    /// Stratonovich predictor-corrector.
    #[default]
    Heun,
    /// Plain Euler-Maruyama (Ito); agrees with Heun only for constant fields.
    EulerMaruyama,
}

/// The diffusion fields and noise convention of one of the three dynamics.
#[derive(Clone, Debug)]
pub struct Dynamics {
    mode: Mode,
    fields: Vec<VectorField>,
    dim: usize,
    label: String,
}

impl Dynamics {
    pub fn horizontal_bm(frame: &Frame) -> Self {
        Self {
            mode: Mode::HorizontalBm,
            fields: frame.fields().to_vec(),
            dim: frame.dim(),
            label: frame.kind().as_str().to_string(),
        }
    }

    pub fn controlled_sub(frame: &Frame) -> Self {
        Self {
            mode: Mode::ControlledSub,
            ..Self::horizontal_bm(frame)
        }
    }

    pub fn controlled_eps(eframe: &EpsilonFrame) -> Self {
        Self {
            mode: Mode::ControlledEps,
            fields: eframe.fields().to_vec(),
            dim: eframe.dim(),
            label: format!("{}/eps={}", eframe.base().kind().as_str(), eframe.epsilon()),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// State dimension N.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimension of the driving Brownian motion (and of control directions).
    pub fn noise_dim(&self) -> usize {
        self.fields.len()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `Delta = dB` without control, `sqrt(2) (dB - a <a, dB>)` with it.
    #[inline]
    pub fn increment(&self, db: &[f64], a: Option<&[f64]>, out: &mut [f64]) {
        let d = self.noise_dim();
        match (self.mode, a) {
            (Mode::HorizontalBm, _) | (_, None) => out[..d].copy_from_slice(&db[..d]),
            (_, Some(a)) => {
                let proj: f64 = (0..d).map(|i| a[i] * db[i]).sum();
                for i in 0..d {
                    out[i] = CONTROLLED_NOISE_SCALE * (db[i] - a[i] * proj);
                }
            }
        }
    }

    /// `out = sum_i delta_i X_i(y)`.
    #[inline]
    fn drive(&self, y: &[f64], delta: &[f64], out: &mut [f64], tmp: &mut [f64]) {
        out[..self.dim].fill(0.0);
        for (i, f) in self.fields.iter().enumerate() {
            if delta[i] == 0.0 {
                continue;
            }
            f.eval_into(y, &mut tmp[..self.dim]);
            for k in 0..self.dim {
                out[k] += delta[i] * tmp[k];
            }
        }
    }

    /// One step driven by the already-formed increment `delta`.
    #[inline]
    pub fn step_with_increment(&self, y: &mut [f64], delta: &[f64], integrator: Integrator) {
        let n = self.dim;
        let mut f0 = [0.0; MAX_DIM];
        let mut f1 = [0.0; MAX_DIM];
        let mut tmp = [0.0; MAX_DIM];
        self.drive(y, delta, &mut f0, &mut tmp);
        match integrator {
            Integrator::EulerMaruyama => {
                for k in 0..n {
                    y[k] += f0[k];
                }
            }
            Integrator::Heun => {
                let mut pred = [0.0; MAX_DIM];
                for k in 0..n {
                    pred[k] = y[k] + f0[k];
                }
                self.drive(&pred[..n], delta, &mut f1, &mut tmp);
                for k in 0..n {
                    y[k] += 0.5 * (f0[k] + f1[k]);
                }
            }
        }
    }

    /// One step from a raw Brownian increment `db` and control direction `a`.
    #[inline]
    pub fn step(&self, y: &mut [f64], db: &[f64], a: Option<&[f64]>, integrator: Integrator) {
        let mut delta = [0.0; MAX_DIM];
        self.increment(db, a, &mut delta);
        self.step_with_increment(y, &delta[..self.noise_dim()], integrator);
    }
}

/// Time grid and sampling parameters of an ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct SimSpec {
    /// Start time `t`.
    pub t: f64,
    /// Horizon `T`.
    pub horizon: f64,
    /// Requested step; the realised step is `(T - t) / ceil((T - t) / dt)`.
    pub dt: f64,
    pub paths: usize,
    pub seed: u64,
    /// Keep every k-th state (0 keeps only the initial and terminal states).
    pub record_every: usize,
    pub integrator: Integrator,
}

impl SimSpec {
    pub fn steps(&self) -> (usize, f64) {
        let span = self.horizon - self.t;
        let n = (span / self.dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        (n, span / n as f64)
    }

    fn validate(&self, controlled: bool) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if self.paths == 0 {
            return Err(Error::InvalidArgument("need at least one path".into()));
        }
        if !(self.horizon > self.t) {
            return Err(Error::InvalidArgument(format!(
                "start time {} must precede the horizon {}",
                self.t, self.horizon
            )));
        }
        if controlled && self.dt >= self.horizon - self.t {
            return Err(Error::InvalidArgument(format!(
                "dt {} must be smaller than T - t = {}",
                self.dt,
                self.horizon - self.t
            )));
        }
        Ok(())
    }
}

/// Random-number stream of path `k`.
pub fn path_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// Recorded states of K simulated paths.
#[derive(Clone, Debug, PartialEq)]
pub struct PathEnsemble {
    pub t: f64,
    pub x0: Vec<f64>,
    pub horizon: f64,
    pub dt: f64,
    pub steps: usize,
    pub seed: u64,
    pub policy_id: String,
    pub mode: Mode,
    /// Step indices that were recorded, always starting at 0 and ending at `steps`.
    pub recorded: Vec<usize>,
    dim: usize,
    paths: usize,
    data: Vec<f64>,
}

impl PathEnsemble {
    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// State of path `k` at the `r`-th recorded step.
    pub fn state(&self, k: usize, r: usize) -> &[f64] {
        let per = self.recorded.len() * self.dim;
        let off = k * per + r * self.dim;
        &self.data[off..off + self.dim]
    }

    pub fn terminal(&self, k: usize) -> &[f64] {
        self.state(k, self.recorded.len() - 1)
    }

    pub fn time_of(&self, r: usize) -> f64 {
        self.t + self.recorded[r] as f64 * self.dt
    }

    /// Sample mean and standard error of `f` over terminal states.
    pub fn terminal_mean(&self, f: impl Fn(&[f64]) -> f64) -> (f64, f64) {
        let vals: Vec<f64> = (0..self.paths).map(|k| f(self.terminal(k))).collect();
        mean_stderr(&vals)
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    if vals.len() < 2 {
        return (mean, 0.0);
    }
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn check_policy(dynamics: &Dynamics, policy: Option<&dyn ControlPolicy>) -> Result<()> {
    match (dynamics.mode(), policy) {
        (Mode::HorizontalBm, _) => Ok(()),
        (_, None) => Err(Error::InvalidArgument("controlled dynamics need a policy".into())),
        (_, Some(p)) if p.dim() != dynamics.noise_dim() => Err(Error::DimensionMismatch {
            expected: dynamics.noise_dim(),
            got: p.dim(),
        }),
        _ => Ok(()),
    }
}

/// Simulates path `k` and hands `(step, state)` to `visit` at step 0 and
/// after every step.
pub fn simulate_path(
    dynamics: &Dynamics,
    policy: Option<&dyn ControlPolicy>,
    x0: &[f64],
    spec: &SimSpec,
    k: u64,
    mut visit: impl FnMut(usize, &[f64]),
) {
    let (steps, dt) = spec.steps();
    let sq = dt.sqrt();
    let n = dynamics.dim();
    let d = dynamics.noise_dim();
    let mut rng = path_rng(spec.seed, k);
    let mut y = [0.0; MAX_DIM];
    y[..n].copy_from_slice(x0);
    let mut db = [0.0; MAX_DIM];
    let mut a = [0.0; MAX_DIM];
    visit(0, &y[..n]);
    for j in 0..steps {
        for v in db[..d].iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = sq * z;
        }
        let control = match (dynamics.mode(), policy) {
            (Mode::HorizontalBm, _) | (_, None) => None,
            (_, Some(p)) => {
                p.direction(spec.t + j as f64 * dt, &y[..n], &mut a[..d]);
                Some(&a[..d])
            }
        };
        dynamics.step(&mut y[..n], &db[..d], control, spec.integrator);
        visit(j + 1, &y[..n]);
    }
}

/// Terminal states of paths `range`, in path order.
pub fn simulate_terminal(
    dynamics: &Dynamics,
    policy: Option<&dyn ControlPolicy>,
    x0: &[f64],
    spec: &SimSpec,
    range: std::ops::Range<usize>,
) -> Result<Vec<f64>> {
    spec.validate(dynamics.mode() != Mode::HorizontalBm)?;
    check_policy(dynamics, policy)?;
    check_start(dynamics, x0)?;
    let n = dynamics.dim();
    let (steps, _) = spec.steps();
    let mut out = vec![0.0; range.len() * n];
    out.par_chunks_mut(n * PATHS_PER_TASK)
        .enumerate()
        .for_each(|(c, block)| {
            for (i, slot) in block.chunks_mut(n).enumerate() {
                let k = range.start + c * PATHS_PER_TASK + i;
                simulate_path(dynamics, policy, x0, spec, k as u64, |j, y| {
                    if j == steps {
                        slot.copy_from_slice(y);
                    }
                });
            }
        });
    Ok(out)
}

fn check_start(dynamics: &Dynamics, x0: &[f64]) -> Result<()> {
    if x0.len() != dynamics.dim() {
        return Err(Error::DimensionMismatch {
            expected: dynamics.dim(),
            got: x0.len(),
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("start point must be finite".into()));
    }
    Ok(())
}

/// Simulates `spec.paths` paths from `(spec.t, x0)`.
pub fn simulate(
    dynamics: &Dynamics,
    policy: Option<&dyn ControlPolicy>,
    x0: &[f64],
    spec: &SimSpec,
) -> Result<PathEnsemble> {
    spec.validate(dynamics.mode() != Mode::HorizontalBm)?;
    check_policy(dynamics, policy)?;
    check_start(dynamics, x0)?;
    let n = dynamics.dim();
    let (steps, dt) = spec.steps();
    let mut recorded: Vec<usize> = (0..=steps)
        .filter(|&j| j == 0 || j == steps || (spec.record_every > 0 && j % spec.record_every == 0))
        .collect();
    recorded.dedup();
    let per = recorded.len() * n;
    let mut data = vec![0.0; spec.paths * per];
    data.par_chunks_mut(per * PATHS_PER_TASK)
        .enumerate()
        .for_each(|(c, block)| {
            for (i, slot) in block.chunks_mut(per).enumerate() {
                let k = c * PATHS_PER_TASK + i;
                let mut r = 0;
                simulate_path(dynamics, policy, x0, spec, k as u64, |j, y| {
                    if r < recorded.len() && recorded[r] == j {
                        slot[r * n..(r + 1) * n].copy_from_slice(y);
                        r += 1;
                    }
                });
            }
        });
    Ok(PathEnsemble {
        t: spec.t,
        x0: x0.to_vec(),
        horizon: spec.horizon,
        dt,
        steps,
        seed: spec.seed,
        policy_id: policy.map(|p| p.id().to_string()).unwrap_or_else(|| "none".into()),
        mode: dynamics.mode(),
        recorded,
        dim: n,
        paths: spec.paths,
        data,
    })
}

/// Horizontal Brownian motion of `frame` from `x0` over `[0, T]`.
pub fn simulate_horizontal_bm(
    frame: &Frame,
    x0: &[f64],
    horizon: f64,
    dt: f64,
    paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    let spec = SimSpec {
        t: 0.0,
        horizon,
        dt,
        paths,
        seed,
        record_every: 0,
        integrator: Integrator::Heun,
    };
    simulate(&Dynamics::horizontal_bm(frame), None, x0, &spec)
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic critical value of the two-sample statistic at level `alpha`.
pub fn ks_critical(na: usize, nb: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((na + nb) as f64 / (na as f64 * nb as f64)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(paths: usize, seed: u64) -> SimSpec {
        SimSpec {
            t: 0.0,
            horizon: 0.1,
            dt: 0.01,
            paths,
            seed,
            record_every: 1,
            integrator: Integrator::Heun,
        }
    }

    #[test]
    fn paths_start_at_origin_and_reproduce() {
        let f = Frame::heisenberg1();
        let d = Dynamics::horizontal_bm(&f);
        let e1 = simulate(&d, None, &[0.1, 0.2, 0.3], &spec(10, 9)).unwrap();
        let e2 = simulate(&d, None, &[0.1, 0.2, 0.3], &spec(10, 9)).unwrap();
        assert_eq!(e1, e2);
        for k in 0..10 {
            assert_eq!(e1.state(k, 0), &[0.1, 0.2, 0.3]);
        }
        assert_eq!(e1.recorded.len(), 11);
        let e3 = simulate(&d, None, &[0.1, 0.2, 0.3], &spec(10, 10)).unwrap();
        assert_ne!(e1.terminal(0), e3.terminal(0));
    }

    #[test]
    fn frozen_coordinate_under_projection() {
        let f = Frame::euclidean(2).unwrap().with_epsilon(1.0).unwrap();
        let d = Dynamics::controlled_eps(&f);
        let pol = ConstantPolicy::new("e1", vec![1.0, 0.0]).unwrap();
        let e = simulate(&d, Some(&pol), &[0.3, -0.2], &spec(20, 1)).unwrap();
        for k in 0..20 {
            for r in 0..e.recorded.len() {
                assert_eq!(e.state(k, r)[0], 0.3);
            }
        }
        assert!((0..20).any(|k| e.terminal(k)[1] != -0.2));
    }

    #[test]
    fn projected_increment_is_orthogonal() {
        let f = Frame::heisenberg1().with_epsilon(0.5).unwrap();
        let d = Dynamics::controlled_eps(&f);
        let c = 1.0 / 3f64.sqrt();
        let a = [c, -c, c];
        let mut out = [0.0; 3];
        d.increment(&[0.3, 1.2, -0.7], Some(&a), &mut out);
        let dot: f64 = out.iter().zip(&a).map(|(x, y)| x * y).sum();
        assert!(dot.abs() < 1e-15);
    }

    #[test]
    fn validation() {
        let f = Frame::heisenberg1();
        let d = Dynamics::controlled_sub(&f);
        let pol = ConstantPolicy::new("e1", vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            simulate(&d, Some(&pol), &[0.0; 3], &spec(2, 0)),
            Err(Error::DimensionMismatch { .. })
        ));
        let pol = ConstantPolicy::new("e1", vec![1.0, 0.0]).unwrap();
        let mut s = spec(2, 0);
        s.dt = 0.1;
        assert!(simulate(&d, Some(&pol), &[0.0; 3], &s).is_err());
        assert!(simulate(&d, None, &[0.0; 3], &spec(2, 0)).is_err());
    }

    #[test]
    fn ks_statistic_basics() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(ks_statistic(&a, &a), 0.0);
        assert_eq!(ks_statistic(&[0.0, 0.1], &[1.0, 2.0]), 1.0);
        assert!(ks_critical(1000, 1000, 0.01) > 0.0);
    }
}
