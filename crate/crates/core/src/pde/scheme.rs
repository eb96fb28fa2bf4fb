//! Explicit central-difference scheme for `u_t = Tr(Sbar) - <Sbar n, n>`.

use super::grid::{Grid, LevelSetField};
use super::operators::{forward_rate, NodeBranch};
use crate::error::{Error, Result};
use crate::frames::{EpsilonFrame, MAX_DIM};
use crate::linalg;
use nalgebra::DMatrix;
use rayon::prelude::*;
use std::sync::Arc;

/// Safety factor in `dt <= CFL_SAFETY * h_min^2 / (N * max |sigma_eps|^2)`.
pub const CFL_SAFETY: f64 = 0.2;

/// Squared gradient norm above which a node is certainly on the regular
/// branch: `|p| >= 1e-6` exceeds the blend limit `BLEND_FACTOR * tol_char(|p|)`
/// for every `|p|`.
const REGULAR_GRAD_SQ: f64 = 1e-12;

/// Nodes evaluated together in the whole-line pass.
const LANES: usize = 4;

/// Grid lines handed to one worker at a time.
const LINES_PER_TASK: usize = 16;

/// Largest squared spectral norm of `sigma_eps` over the grid nodes. Axes
/// on which the frame does not depend are visited at one index only.
pub fn max_sigma_norm_sq(eframe: &EpsilonFrame, grid: &Grid) -> f64 {
    let n = grid.dim();
    let counts: Vec<usize> = (0..n)
        .map(|k| if eframe.depends_on(k) { grid.nodes()[k] } else { 1 })
        .collect();
    let total: usize = counts.iter().product();
    let mut x = vec![0.0; n];
    let mut best = 0.0f64;
    for flat in 0..total {
        let mut rem = flat;
        for k in (0..n).rev() {
            x[k] = grid.coord(k, rem % counts[k]);
            rem /= counts[k];
        }
        let s = eframe.sigma_eps(&x);
        best = best.max(linalg::lambda_max(&(&s * s.transpose())));
    }
    best
}

/// Largest stable time step for the explicit scheme on `grid`.
pub fn cfl_limit(eframe: &EpsilonFrame, grid: &Grid) -> f64 {
    let h = grid.h_min();
    CFL_SAFETY * h * h / (grid.dim() as f64 * max_sigma_norm_sq(eframe, grid))
}

/// Diagnostics of one explicit step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepStats {
    pub min: f64,
    pub max: f64,
    pub envelope_nodes: usize,
    pub blend_nodes: usize,
}

#[derive(Clone, Copy)]
struct BlockStats {
    min: f64,
    max: f64,
    envelope: usize,
    blend: usize,
    bad: Option<usize>,
}

impl BlockStats {
    fn empty() -> Self {
        Self {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            envelope: 0,
            blend: 0,
            bad: None,
        }
    }

    fn merge(self, o: Self) -> Self {
        Self {
            min: self.min.min(o.min),
            max: self.max.max(o.max),
            envelope: self.envelope + o.envelope,
            blend: self.blend + o.blend,
            bad: match (self.bad, o.bad) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            },
        }
    }
}

/// Reusable explicit stepper for one frame and grid.
#[derive(Clone, Debug)]
pub struct Stepper {
    eframe: EpsilonFrame,
    grid: Arc<Grid>,
    cfl: f64,
    /// sigma_eps can be evaluated once per line of the fastest axis.
    line_constant_sigma: bool,
    line_constant_conn: bool,
}

impl Stepper {
    pub fn new(eframe: &EpsilonFrame, grid: Arc<Grid>) -> Result<Self> {
        if grid.dim() != eframe.dim() {
            return Err(Error::DimensionMismatch {
                expected: eframe.dim(),
                got: grid.dim(),
            });
        }
        if grid.dim() > MAX_DIM {
            return Err(Error::InvalidArgument(format!("dimension above {MAX_DIM}")));
        }
        let last = grid.dim() - 1;
        let line_constant_sigma = !eframe.fields().iter().any(|f| f.depends_on(last));
        let line_constant_conn = eframe.connection_vanishes();
        Ok(Self {
            cfl: cfl_limit(eframe, &grid),
            eframe: eframe.clone(),
            grid,
            line_constant_sigma,
            line_constant_conn,
        })
    }

    pub fn cfl_limit(&self) -> f64 {
        self.cfl
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Advances `field` by `dt` into `out` (which must live on the same grid).
    pub fn step_into(&self, field: &LevelSetField, dt: f64, out: &mut LevelSetField) -> Result<StepStats> {
        if !(dt > 0.0) || dt > self.cfl * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt, limit: self.cfl });
        }
        if field.grid().as_ref() != self.grid.as_ref() || out.grid().as_ref() != self.grid.as_ref() {
            return Err(Error::InvalidArgument("field is not on the stepper grid".into()));
        }
        let stats = match self.grid.dim() {
            1 => self.run::<1>(field.values(), out.values_mut(), dt),
            2 => self.run::<2>(field.values(), out.values_mut(), dt),
            3 => self.run::<3>(field.values(), out.values_mut(), dt),
            4 => self.run::<4>(field.values(), out.values_mut(), dt),
            5 => self.run::<5>(field.values(), out.values_mut(), dt),
            6 => self.run::<6>(field.values(), out.values_mut(), dt),
            _ => unreachable!("dimension checked in Stepper::new"),
        };
        let time = field.time() + dt;
        out.set_time(time);
        if let Some(node) = stats.bad {
            return Err(Error::NonFinite { node, time });
        }
        Ok(StepStats {
            min: stats.min,
            max: stats.max,
            envelope_nodes: stats.envelope,
            blend_nodes: stats.blend,
        })
    }

    pub fn step(&self, field: &LevelSetField, dt: f64) -> Result<(LevelSetField, StepStats)> {
        let mut out = field.clone();
        let stats = self.step_into(field, dt, &mut out)?;
        Ok((out, stats))
    }

    fn run<const N: usize>(&self, old: &[f64], new: &mut [f64], dt: f64) -> BlockStats {
        let line_len = self.grid.nodes()[N - 1];
        let chunk = line_len * LINES_PER_TASK;
        new.par_chunks_mut(chunk)
            .enumerate()
            .map(|(c, block)| {
                let first_line = c * LINES_PER_TASK;
                let mut acc = BlockStats::empty();
                let mut scratch = Vec::new();
                for (l, line) in block.chunks_mut(line_len).enumerate() {
                    acc = acc.merge(self.line::<N>(old, line, first_line + l, dt, &mut scratch));
                }
                acc
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(BlockStats::empty(), BlockStats::merge)
    }

    fn line<const N: usize>(
        &self,
        old: &[f64],
        out: &mut [f64],
        line: usize,
        dt: f64,
        scratch: &mut Vec<f64>,
    ) -> BlockStats {
        let g = &*self.grid;
        let nodes = g.nodes();
        let strides = g.strides();
        let h = g.spacing();
        let mut inv_2h = [0.0; N];
        let mut inv_h2 = [0.0; N];
        for k in 0..N {
            inv_2h[k] = 0.5 / h[k];
            inv_h2[k] = 1.0 / (h[k] * h[k]);
        }
        let mut inv_4hh = [[0.0; N]; N];
        for k in 0..N {
            for l in 0..N {
                inv_4hh[k][l] = 0.25 / (h[k] * h[l]);
            }
        }
        // index, coordinates and neighbour offsets of the line's outer axes
        let mut x = [0.0; N];
        let mut plus = [0usize; N];
        let mut minus = [0usize; N];
        let mut rem = line;
        for k in (0..N - 1).rev() {
            let i = rem % nodes[k];
            rem /= nodes[k];
            x[k] = g.coord(k, i);
            plus[k] = if i + 1 < nodes[k] { strides[k] } else { 0 };
            minus[k] = if i > 0 { strides[k] } else { 0 };
        }
        let base = line * nodes[N - 1];
        let last = N - 1;
        let len = nodes[last];

        let mut sigma = [0.0f64; MAX_DIM * MAX_DIM];
        let mut gram = [[0.0f64; N]; N];
        if self.line_constant_sigma {
            x[last] = g.coord(last, 0);
            self.eframe.sigma_into(&x[..], &mut sigma);
            gram_matrix::<N>(&sigma, &mut gram);
        }
        // neighbouring lines along the outer axes, each of length `len`
        let at = |off: usize| &old[off..off + len];
        let c = at(base);
        let mut lp = [c; N];
        let mut lm = [c; N];
        let mut cross = [[[c; 4]; N]; N];
        for k in 0..last {
            lp[k] = at(base + plus[k]);
            lm[k] = at(base - minus[k]);
            for l in k + 1..last {
                cross[k][l] = [
                    at(base + plus[k] + plus[l]),
                    at(base + plus[k] - minus[l]),
                    at(base - minus[k] + plus[l]),
                    at(base - minus[k] - minus[l]),
                ];
            }
        }
        let mut stats = BlockStats::empty();
        if self.line_constant_sigma && self.line_constant_conn {
            // whole-line pass: derivative columns first, then the regular
            // rate for every node, then the small-gradient nodes again
            let nd = N * (N + 1) / 2;
            let need = (N + nd + 1) * len;
            if scratch.len() != need {
                scratch.resize(need, 0.0);
            }
            let (pb, rest) = scratch.split_at_mut(N * len);
            let (sb, pn) = rest.split_at_mut(nd * len);
            let mut tri = [[0usize; N]; N];
            let mut next = 0;
            for k in 0..N {
                for l in k..N {
                    tri[k][l] = next;
                    tri[l][k] = next;
                    next += 1;
                }
            }
            centred(c, &mut pb[last * len..(last + 1) * len], inv_2h[last]);
            second(c, &mut sb[tri[last][last] * len..][..len], inv_h2[last]);
            for k in 0..last {
                let pk = &mut pb[k * len..(k + 1) * len];
                for ((o, a), b) in pk.iter_mut().zip(lp[k]).zip(lm[k]) {
                    *o = (a - b) * inv_2h[k];
                }
                let skk = &mut sb[tri[k][k] * len..][..len];
                for (((o, a), b), u) in skk.iter_mut().zip(lp[k]).zip(lm[k]).zip(c) {
                    *o = (a - 2.0 * u + b) * inv_h2[k];
                }
                mixed(lp[k], lm[k], &mut sb[tri[k][last] * len..][..len], inv_4hh[k][last]);
                for l in k + 1..last {
                    let q = &cross[k][l];
                    let skl = &mut sb[tri[k][l] * len..][..len];
                    for (j, o) in skl.iter_mut().enumerate() {
                        *o = (q[0][j] - q[1][j] - q[2][j] + q[3][j]) * inv_4hh[k][l];
                    }
                }
            }
            let pcol = |k: usize| &pb[k * len..(k + 1) * len];
            let scol = |k: usize, l: usize| &sb[tri[k][l] * len..][..len];
            let pc: [&[f64]; N] = std::array::from_fn(pcol);
            let sc: [[&[f64]; N]; N] = std::array::from_fn(|k| std::array::from_fn(|l| scol(k, l)));
            let out = &mut out[..len];
            let pn = &mut pn[..len];
            let mut j = 0;
            while j + LANES <= len {
                let mut pv = [[0.0; LANES]; N];
                let mut sv = [[[0.0; LANES]; N]; N];
                for k in 0..N {
                    pv[k].copy_from_slice(&pc[k][j..j + LANES]);
                    for l in k..N {
                        sv[k][l].copy_from_slice(&sc[k][l][j..j + LANES]);
                    }
                }
                let (rate, n2) = regular_rate_lanes::<N>(&gram, &pv, &sv);
                for i in 0..LANES {
                    pn[j + i] = n2[i];
                    out[j + i] = c[j + i] + dt * rate[i];
                }
                j += LANES;
            }
            for j in j..len {
                let mut pv = [0.0; N];
                let mut sv = [[0.0; N]; N];
                let mut n2 = 0.0;
                for k in 0..N {
                    pv[k] = pc[k][j];
                    n2 += pv[k] * pv[k];
                    for l in 0..N {
                        sv[k][l] = sc[k][l][j];
                    }
                }
                pn[j] = n2;
                out[j] = c[j] + dt * regular_rate::<N>(&gram, &pv, &sv);
            }
            let mut p = [0.0f64; N];
            let mut s = [[0.0f64; N]; N];
            for j in 0..len {
                if pn[j] <= REGULAR_GRAD_SQ {
                    for k in 0..N {
                        p[k] = pcol(k)[j];
                        for l in 0..N {
                            s[k][l] = scol(k, l)[j];
                        }
                    }
                    x[last] = g.coord(last, j);
                    out[j] = c[j] + dt * self.dense_rate::<N>(&x, &sigma, &p, &s, pn[j], &mut stats);
                }
            }
            // `0 * u` stays zero unless some `u` is infinite or NaN
            let mut probe = 0.0;
            let (mut lo, mut hi) = (stats.min, stats.max);
            for &un in out.iter() {
                probe += 0.0 * un;
                lo = if un < lo { un } else { lo };
                hi = if un > hi { un } else { hi };
            }
            stats.min = lo;
            stats.max = hi;
            if probe != 0.0 {
                stats.bad = out.iter().position(|u| !u.is_finite()).map(|j| base + j);
            }
            return stats;
        }
        let mut p = [0.0f64; N];
        let mut s = [[0.0f64; N]; N];
        for j in 0..len {
            let jm = j.saturating_sub(1);
            let jp = if j + 1 < len { j + 1 } else { j };
            let u0 = c[j];
            p[last] = (c[jp] - c[jm]) * inv_2h[last];
            s[last][last] = (c[jp] - 2.0 * u0 + c[jm]) * inv_h2[last];
            for k in 0..last {
                let (up, um) = (lp[k][j], lm[k][j]);
                p[k] = (up - um) * inv_2h[k];
                s[k][k] = (up - 2.0 * u0 + um) * inv_h2[k];
                let d = (lp[k][jp] - lp[k][jm] - lm[k][jp] + lm[k][jm]) * inv_4hh[k][last];
                s[k][last] = d;
                s[last][k] = d;
                for l in k + 1..last {
                    let q = &cross[k][l];
                    let d = (q[0][j] - q[1][j] - q[2][j] + q[3][j]) * inv_4hh[k][l];
                    s[k][l] = d;
                    s[l][k] = d;
                }
            }
            x[last] = g.coord(last, j);
            if !self.line_constant_sigma {
                self.eframe.sigma_into(&x[..], &mut sigma);
                gram_matrix::<N>(&sigma, &mut gram);
            }
            let rate = self.node_rate::<N>(&x, &sigma, &gram, &p, &s, &mut stats);
            let un = u0 + dt * rate;
            if !un.is_finite() && stats.bad.is_none() {
                stats.bad = Some(base + j);
            }
            out[j] = un;
            stats.min = stats.min.min(un);
            stats.max = stats.max.max(un);
        }
        stats
    }

    /// `Tr(Sbar) - <Sbar v, v> / |v|^2` with `v = sigma p`, evaluated through
    /// the Gram matrix `G = sigma^T sigma`: `Tr(sigma S sigma^T) = <G, S>` and
    /// `<sigma S sigma^T v, v> = w^T S w` with `w = G p`, `|v|^2 = <p, w>`.
    /// Small gradients go through the envelope logic of [`forward_rate`].
    #[inline(always)]
    fn node_rate<const N: usize>(
        &self,
        x: &[f64; N],
        sigma: &[f64; MAX_DIM * MAX_DIM],
        gram: &[[f64; N]; N],
        p: &[f64; N],
        s: &[[f64; N]; N],
        stats: &mut BlockStats,
    ) -> f64 {
        let mut pn = 0.0;
        for pk in p {
            pn += pk * pk;
        }
        if pn > REGULAR_GRAD_SQ {
            if self.line_constant_conn {
                return regular_rate::<N>(gram, p, s);
            }
            let mut w = [0.0; N];
            let mut pw = 0.0;
            let mut trs = 0.0;
            for k in 0..N {
                let mut a = 0.0;
                for l in 0..N {
                    a += gram[k][l] * p[l];
                    trs += gram[k][l] * s[k][l];
                }
                w[k] = a;
                pw += p[k] * a;
            }
            let mut wsw = 0.0;
            for k in 0..N {
                let mut a = 0.0;
                for l in 0..N {
                    a += s[k][l] * w[l];
                }
                wsw += w[k] * a;
            }
            let mut conn = [0.0f64; MAX_DIM * MAX_DIM];
            self.eframe.covariant_into(&x[..], &p[..], &mut conn);
            let mut v = [0.0; N];
            for i in 0..N {
                for k in 0..N {
                    v[i] += sigma[i * N + k] * p[k];
                }
            }
            let (mut tra, mut vav) = (0.0, 0.0);
            for i in 0..N {
                tra += conn[i * N + i];
                for k in 0..N {
                    vav += v[i] * conn[i * N + k] * v[k];
                }
            }
            return trs + tra - (wsw + vav) / pw;
        }
        self.dense_rate::<N>(x, sigma, p, s, pn, stats)
    }

    /// Rate through the dense `Sbar`, used near a vanishing gradient.
    #[cold]
    #[inline(never)]
    fn dense_rate<const N: usize>(
        &self,
        x: &[f64; N],
        sigma: &[f64; MAX_DIM * MAX_DIM],
        p: &[f64; N],
        s: &[[f64; N]; N],
        pn: f64,
        stats: &mut BlockStats,
    ) -> f64 {
        let mut sbar = [0.0f64; MAX_DIM * MAX_DIM];
        let mut v = [0.0f64; N];
        for i in 0..N {
            for k in 0..N {
                v[i] += sigma[i * N + k] * p[k];
            }
            for jj in 0..N {
                let mut a = 0.0;
                for k in 0..N {
                    for l in 0..N {
                        a += sigma[i * N + k] * s[k][l] * sigma[jj * N + l];
                    }
                }
                sbar[i * N + jj] = a;
            }
        }
        if !self.line_constant_conn {
            let mut conn = [0.0f64; MAX_DIM * MAX_DIM];
            self.eframe.covariant_into(&x[..], &p[..], &mut conn);
            for i in 0..N * N {
                sbar[i] += conn[i];
            }
        }
        let (rate, branch) = forward_rate(N, &sbar[..N * N], &v[..], pn.sqrt());
        match branch {
            NodeBranch::Regular => {}
            NodeBranch::Envelope => stats.envelope += 1,
            NodeBranch::Blend => stats.blend += 1,
        }
        rate
    }
}

/// `<G, S> - w^T S w / <p, w>` with `w = G p`.
#[inline(always)]
fn regular_rate<const N: usize>(gram: &[[f64; N]; N], p: &[f64; N], s: &[[f64; N]; N]) -> f64 {
    let mut w = [0.0; N];
    for k in 0..N {
        for l in 0..N {
            w[k] += gram[k][l] * p[l];
        }
    }
    let mut pw = 0.0;
    let mut trs = 0.0;
    let mut wsw = 0.0;
    for k in 0..N {
        pw += p[k] * w[k];
        trs += gram[k][k] * s[k][k];
        wsw += w[k] * w[k] * s[k][k];
        for l in k + 1..N {
            trs += 2.0 * gram[k][l] * s[k][l];
            wsw += 2.0 * w[k] * w[l] * s[k][l];
        }
    }
    trs - wsw / pw
}

/// [`regular_rate`] on `LANES` nodes at once (upper triangle of `s` only),
/// with the same operation order per node; also returns `|p|^2`.
#[inline(always)]
fn regular_rate_lanes<const N: usize>(
    gram: &[[f64; N]; N],
    p: &[[f64; LANES]; N],
    s: &[[[f64; LANES]; N]; N],
) -> ([f64; LANES], [f64; LANES]) {
    let mut w = [[0.0; LANES]; N];
    let mut n2 = [0.0; LANES];
    for k in 0..N {
        for i in 0..LANES {
            n2[i] += p[k][i] * p[k][i];
        }
        for l in 0..N {
            for i in 0..LANES {
                w[k][i] += gram[k][l] * p[l][i];
            }
        }
    }
    let mut pw = [0.0; LANES];
    let mut trs = [0.0; LANES];
    let mut wsw = [0.0; LANES];
    for k in 0..N {
        for i in 0..LANES {
            pw[i] += p[k][i] * w[k][i];
            trs[i] += gram[k][k] * s[k][k][i];
            wsw[i] += w[k][i] * w[k][i] * s[k][k][i];
        }
        for l in k + 1..N {
            for i in 0..LANES {
                trs[i] += 2.0 * gram[k][l] * s[k][l][i];
                wsw[i] += 2.0 * w[k][i] * w[l][i] * s[k][l][i];
            }
        }
    }
    let mut rate = [0.0; LANES];
    for i in 0..LANES {
        rate[i] = trs[i] - wsw[i] / pw[i];
    }
    (rate, n2)
}

/// Centred first difference along a line, one-sided halves at the ends.
fn centred(c: &[f64], out: &mut [f64], inv_2h: f64) {
    let n = c.len();
    out[0] = (c[1] - c[0]) * inv_2h;
    out[n - 1] = (c[n - 1] - c[n - 2]) * inv_2h;
    for (o, w) in out[1..n - 1].iter_mut().zip(c.windows(3)) {
        *o = (w[2] - w[0]) * inv_2h;
    }
}

fn second(c: &[f64], out: &mut [f64], inv_h2: f64) {
    let n = c.len();
    out[0] = (c[1] - c[0]) * inv_h2;
    out[n - 1] = (c[n - 2] - c[n - 1]) * inv_h2;
    for (o, w) in out[1..n - 1].iter_mut().zip(c.windows(3)) {
        *o = (w[2] - 2.0 * w[1] + w[0]) * inv_h2;
    }
}

/// Cross difference between the outer axis (lines `a`, `b`) and the line axis.
fn mixed(a: &[f64], b: &[f64], out: &mut [f64], inv_4hh: f64) {
    let n = a.len();
    out[0] = (a[1] - a[0] - b[1] + b[0]) * inv_4hh;
    out[n - 1] = (a[n - 1] - a[n - 2] - b[n - 1] + b[n - 2]) * inv_4hh;
    for ((o, wa), wb) in out[1..n - 1].iter_mut().zip(a.windows(3)).zip(b.windows(3)) {
        *o = (wa[2] - wa[0] - wb[2] + wb[0]) * inv_4hh;
    }
}

/// `G = sigma^T sigma` for a row-major `sigma`.
#[inline]
fn gram_matrix<const N: usize>(sigma: &[f64; MAX_DIM * MAX_DIM], out: &mut [[f64; N]; N]) {
    for k in 0..N {
        for l in 0..N {
            let mut a = 0.0;
            for i in 0..N {
                a += sigma[i * N + k] * sigma[i * N + l];
            }
            out[k][l] = a;
        }
    }
}

/// One explicit step; rejects `dt` above the CFL limit.
pub fn step_explicit(eframe: &EpsilonFrame, field: &LevelSetField, dt: f64) -> Result<(LevelSetField, StepStats)> {
    Stepper::new(eframe, field.grid().clone())?.step(field, dt)
}

/// Time-step selection and snapshot cadence for [`evolve`].
#[derive(Clone, Debug, Default)]
pub struct EvolveOptions {
    /// Requested step; the CFL limit when absent. The horizon is split into
    /// `ceil(T / dt)` equal steps.
    pub dt: Option<f64>,
    /// Keep every k-th step as a snapshot (the initial and final states are
    /// always kept). Zero keeps only those two.
    pub snapshot_every: usize,
}

/// Summary of a run driven by [`evolve_with`].
#[derive(Clone, Debug, PartialEq)]
pub struct EvolveSummary {
    pub steps: usize,
    pub dt: f64,
    pub cfl_dt: f64,
    /// `(min, max)` of u at the initial state and after every step.
    pub extrema: Vec<(f64, f64)>,
    pub envelope_nodes: usize,
    pub blend_nodes: usize,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<LevelSetField>,
    pub summary: EvolveSummary,
}

/// Number of equal steps and the step length covering `horizon`.
pub fn plan_steps(horizon: f64, dt_max: f64) -> (usize, f64) {
    if horizon <= 0.0 {
        return (0, 0.0);
    }
    let n = (horizon / dt_max * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    (n, horizon / n as f64)
}

/// Advances `field` to `field.time() + horizon`, calling `observer` with
/// `(step, total_steps, state)` at the start and after each step.
pub fn evolve_with(
    eframe: &EpsilonFrame,
    field: &LevelSetField,
    horizon: f64,
    dt: Option<f64>,
    mut observer: impl FnMut(usize, usize, &LevelSetField) -> Result<()>,
) -> Result<EvolveSummary> {
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "horizon must be finite and non-negative, got {horizon}"
        )));
    }
    let stepper = Stepper::new(eframe, field.grid().clone())?;
    let cfl = stepper.cfl_limit();
    let dt_max = match dt {
        Some(d) if d > cfl * (1.0 + 1e-12) || !(d > 0.0) => {
            return Err(Error::CflViolation { dt: d, limit: cfl });
        }
        Some(d) => d,
        None => cfl,
    };
    let (steps, dt_eff) = plan_steps(horizon, dt_max);
    let t0 = field.time();
    let mut cur = field.clone();
    let mut next = field.clone();
    let mut extrema = vec![cur.min_max()];
    let (mut env, mut blend) = (0, 0);
    observer(0, steps, &cur)?;
    for k in 1..=steps {
        let st = stepper.step_into(&cur, dt_eff, &mut next)?;
        next.set_time(t0 + k as f64 * dt_eff);
        extrema.push((st.min, st.max));
        env += st.envelope_nodes;
        blend += st.blend_nodes;
        std::mem::swap(&mut cur, &mut next);
        observer(k, steps, &cur)?;
    }
    Ok(EvolveSummary {
        steps,
        dt: dt_eff,
        cfl_dt: cfl,
        extrema,
        envelope_nodes: env,
        blend_nodes: blend,
    })
}

/// Repeated [`step_explicit`] from `field.time()` over `horizon`.
pub fn evolve(eframe: &EpsilonFrame, field: &LevelSetField, horizon: f64, opts: &EvolveOptions) -> Result<Trajectory> {
    let mut snapshots = Vec::new();
    let every = opts.snapshot_every;
    let summary = evolve_with(eframe, field, horizon, opts.dt, |k, total, f| {
        if k == 0 || k == total || (every > 0 && k % every == 0) {
            snapshots.push(f.clone());
        }
        Ok(())
    })?;
    Ok(Trajectory { snapshots, summary })
}

/// Forward rate at node `idx` assembled from dense matrices; a slow
/// reference for the fused kernel.
pub fn node_rate(eframe: &EpsilonFrame, field: &LevelSetField, idx: usize) -> f64 {
    let g = field.grid();
    let n = g.dim();
    let mut x = vec![0.0; n];
    g.point(idx, &mut x);
    let p = crate::levelset::ScalarField::gradient(field, field.time(), &x);
    let s = crate::levelset::ScalarField::hessian(field, field.time(), &x);
    let sig = eframe.sigma_eps(&x);
    let sbar: DMatrix<f64> = &sig * s * sig.transpose() + eframe.covariant_matrix_eps(&x, p.as_slice());
    let v = &sig * &p;
    let flat: Vec<f64> = (0..n * n).map(|i| sbar[(i / n, i % n)]).collect();
    forward_rate(n, &flat, v.as_slice(), p.norm()).0
}
