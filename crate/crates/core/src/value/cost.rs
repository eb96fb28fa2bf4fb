//! Bounded Lipschitz terminal costs.

use crate::error::{Error, Result};
use crate::levelset::AnalyticField;
use std::fmt;
use std::sync::Arc;

type CostFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A terminal cost `g` with recorded bounds `lower <= g <= upper` and a
/// Lipschitz constant, plus an optional smooth guide sharing its level sets.
#[derive(Clone)]
pub struct TerminalCost {
    name: String,
    dim: usize,
    f: Arc<CostFn>,
    lower: f64,
    upper: f64,
    lipschitz: f64,
    guide: Option<AnalyticField>,
}

impl fmt::Debug for TerminalCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TerminalCost")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .field("lipschitz", &self.lipschitz)
            .finish_non_exhaustive()
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "{name} must be positive and finite, got {v}"
        )));
    }
    Ok(())
}

impl TerminalCost {
    pub fn custom(
        name: impl Into<String>,
        dim: usize,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        lower: f64,
        upper: f64,
        lipschitz: f64,
    ) -> Result<Self> {
        if !(lower <= upper) || !lower.is_finite() || !upper.is_finite() || !(lipschitz >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cost bounds must satisfy lower <= upper and lipschitz >= 0, got [{lower}, {upper}], {lipschitz}"
            )));
        }
        Ok(Self {
            name: name.into(),
            dim,
            f: Arc::new(f),
            lower,
            upper,
            lipschitz,
            guide: None,
        })
    }

    pub fn constant(dim: usize, c: f64) -> Result<Self> {
        Self::custom(format!("constant({c})"), dim, move |_| c, c, c, 0.0)
    }

    /// `min(|x - c|^2 - r^2, cap)`.
    pub fn sphere(center: Vec<f64>, radius: f64, cap: f64) -> Result<Self> {
        positive("radius", radius)?;
        positive("cap", cap)?;
        let dim = center.len();
        let axes: Vec<usize> = (0..dim).collect();
        Self::capped_quadric("sphere", dim, axes, center, radius, cap)
    }

    /// `min(x_1^2 + x_2^2 - r^2, cap)` (distance to the `x_3..` axis).
    pub fn cylinder(dim: usize, radius: f64, cap: f64) -> Result<Self> {
        positive("radius", radius)?;
        positive("cap", cap)?;
        if dim < 2 {
            return Err(Error::InvalidArgument("cylinder cost needs dim >= 2".into()));
        }
        Self::capped_quadric("cylinder", dim, vec![0, 1], vec![0.0; dim], radius, cap)
    }

    fn capped_quadric(
        kind: &str,
        dim: usize,
        axes: Vec<usize>,
        center: Vec<f64>,
        radius: f64,
        cap: f64,
    ) -> Result<Self> {
        let r2 = radius * radius;
        let ax = axes.clone();
        let c = center.clone();
        let mut cost = Self::custom(
            format!("{kind}(r={radius},cap={cap})"),
            dim,
            move |x| {
                let d2: f64 = ax.iter().map(|&k| (x[k] - c[k]) * (x[k] - c[k])).sum();
                (d2 - r2).min(cap)
            },
            -r2,
            cap,
            2.0 * (r2 + cap).sqrt(),
        )?;
        let shifted = crate::poly::Polynomial::constant(dim, -r2);
        let guide = axes.iter().fold(shifted, |acc, &k| {
            let v = crate::poly::Polynomial::var(dim, k).sub(&crate::poly::Polynomial::constant(dim, center[k]));
            acc.add(&v.mul(&v))
        });
        cost.guide = Some(AnalyticField::polynomial(guide));
        Ok(cost)
    }

    /// `clamp(x_axis - offset, -cap, cap)`.
    pub fn plane(dim: usize, axis: usize, offset: f64, cap: f64) -> Result<Self> {
        positive("cap", cap)?;
        if axis >= dim {
            return Err(Error::InvalidArgument(format!(
                "plane axis {} outside 1..={dim}",
                axis + 1
            )));
        }
        let mut cost = Self::custom(
            format!("plane(axis={},offset={offset},cap={cap})", axis + 1),
            dim,
            move |x| (x[axis] - offset).clamp(-cap, cap),
            -cap,
            cap,
            1.0,
        )?;
        cost.guide = Some(AnalyticField::polynomial(
            crate::poly::Polynomial::var(dim, axis).sub(&crate::poly::Polynomial::constant(dim, offset)),
        ));
        Ok(cost)
    }

    /// `min(|x - c| - r, cap)`.
    pub fn clamped_distance(center: Vec<f64>, radius: f64, cap: f64) -> Result<Self> {
        positive("radius", radius)?;
        positive("cap", cap)?;
        let dim = center.len();
        let c = center.clone();
        let mut cost = Self::custom(
            format!("clamped-distance(r={radius},cap={cap})"),
            dim,
            move |x| {
                let d: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                (d - radius).min(cap)
            },
            -radius,
            cap,
            1.0,
        )?;
        let sphere = Self::sphere(center, radius, cap)?;
        cost.guide = sphere.guide;
        Ok(cost)
    }

    /// `phi o g` for a strictly increasing `phi`; bounds are mapped through
    /// `phi` and the guide is kept, since level sets are unchanged.
    pub fn compose(
        &self,
        name: &str,
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        phi_lipschitz: f64,
    ) -> Result<Self> {
        let lower = phi(self.lower);
        let upper = phi(self.upper);
        let inner = self.f.clone();
        let phi = Arc::new(phi);
        let mut cost = Self::custom(
            format!("{name}({})", self.name),
            self.dim,
            move |x| phi(inner(x)),
            lower,
            upper,
            phi_lipschitz * self.lipschitz,
        )?;
        cost.guide = self.guide.clone();
        Ok(cost)
    }

    pub fn with_guide(mut self, guide: AnalyticField) -> Self {
        self.guide = Some(guide);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// `max(|lower|, |upper|)`.
    pub fn bound(&self) -> f64 {
        self.lower.abs().max(self.upper.abs())
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn range(&self) -> f64 {
        self.upper - self.lower
    }

    /// Amount added to `g` before taking powers: `bound` when `g` can be
    /// negative, zero otherwise.
    pub fn shift(&self) -> f64 {
        if self.lower < 0.0 {
            self.bound()
        } else {
            0.0
        }
    }

    pub fn guide(&self) -> Option<&AnalyticField> {
        self.guide.as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn builtins_respect_bounds_and_lipschitz() {
        let costs = vec![
            TerminalCost::sphere(vec![0.0, 0.5, 0.0], 1.0, 1.0).unwrap(),
            TerminalCost::cylinder(3, 1.0, 0.5).unwrap(),
            TerminalCost::plane(3, 2, 0.25, 2.0).unwrap(),
            TerminalCost::clamped_distance(vec![0.0; 3], 0.5, 1.0).unwrap(),
            TerminalCost::constant(3, -2.0).unwrap(),
        ];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for c in &costs {
            for _ in 0..500 {
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
                let y: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
                let (gx, gy) = (c.value(&x), c.value(&y));
                assert!(gx >= c.lower() && gx <= c.upper(), "{}", c.name());
                let d: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                assert!((gx - gy).abs() <= c.lipschitz() * d + 1e-12, "{}", c.name());
            }
        }
    }

    #[test]
    fn shift_protocol() {
        assert_eq!(TerminalCost::cylinder(3, 1.0, 2.0).unwrap().shift(), 2.0);
        assert_eq!(TerminalCost::constant(2, 3.0).unwrap().shift(), 0.0);
        assert_eq!(TerminalCost::constant(2, -3.0).unwrap().shift(), 3.0);
    }

    #[test]
    fn compose_maps_bounds() {
        let g = TerminalCost::cylinder(3, 1.0, 1.0).unwrap();
        let e = g.compose("exp", f64::exp, 1f64.exp()).unwrap();
        assert_eq!(e.lower(), (-1f64).exp());
        assert_eq!(e.value(&[0.0, 0.0, 0.0]), (-1f64).exp());
        assert!(e.guide().is_some());
    }

    #[test]
    fn invalid_parameters() {
        assert!(TerminalCost::sphere(vec![0.0; 2], -1.0, 1.0).is_err());
        assert!(TerminalCost::cylinder(1, 1.0, 1.0).is_err());
        assert!(TerminalCost::plane(2, 2, 0.0, 1.0).is_err());
    }
}
