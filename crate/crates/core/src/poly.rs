//! Sparse multivariate polynomials with exact differentiation.
//!
//! Frame coefficients, their Jacobians, Lie brackets and connection terms are
//! all polynomial, so every derivative used downstream is symbolic.

use crate::error::{Error, Result};
use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub coeff: f64,
    pub exps: Vec<u32>,
}

impl Monomial {
    pub fn new(coeff: f64, exps: Vec<u32>) -> Self {
        Self { coeff, exps }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let mut acc = self.coeff;
        for (&e, &xi) in self.exps.iter().zip(x) {
            match e {
                0 => {}
                1 => acc *= xi,
                2 => acc *= xi * xi,
                _ => acc *= xi.powi(e as i32),
            }
        }
        acc
    }
}

/// A polynomial in `nvars` real variables, kept in canonical form
/// (terms sorted by exponent vector, like terms merged, zero terms dropped).
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: Vec<Monomial>,
    constant: Option<f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: Vec::new(),
            constant: Some(0.0),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        Self::canonical(nvars, vec![Monomial::new(c, vec![0; nvars])])
    }

    /// The coordinate function `x_var` (0-based).
    pub fn var(nvars: usize, var: usize) -> Self {
        let mut exps = vec![0; nvars];
        exps[var] = 1;
        Self::canonical(nvars, vec![Monomial::new(1.0, exps)])
    }

    pub fn from_terms(nvars: usize, terms: Vec<Monomial>) -> Result<Self> {
        for t in &terms {
            if t.exps.len() != nvars {
                return Err(Error::DimensionMismatch {
                    expected: nvars,
                    got: t.exps.len(),
                });
            }
            if !t.coeff.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite polynomial coefficient {}",
                    t.coeff
                )));
            }
        }
        Ok(Self::canonical(nvars, terms))
    }

    fn canonical(nvars: usize, mut terms: Vec<Monomial>) -> Self {
        terms.sort_by(|a, b| a.exps.cmp(&b.exps));
        let mut merged: Vec<Monomial> = Vec::with_capacity(terms.len());
        for t in terms {
            match merged.last_mut() {
                Some(last) if last.exps == t.exps => last.coeff += t.coeff,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.coeff != 0.0);
        let constant = match merged.as_slice() {
            [] => Some(0.0),
            [t] if t.exps.iter().all(|&e| e == 0) => Some(t.coeff),
            _ => None,
        };
        Self {
            nvars,
            terms: merged,
            constant,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `Some(c)` when the polynomial is the constant `c`.
    pub fn as_constant(&self) -> Option<f64> {
        self.constant
    }

    pub fn depends_on(&self, var: usize) -> bool {
        self.terms.iter().any(|t| t.exps[var] > 0)
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|t| t.exps.iter().sum::<u32>()).max().unwrap_or(0)
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        if let Some(c) = self.constant {
            return c;
        }
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    pub fn derivative(&self, var: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|t| t.exps[var] > 0)
            .map(|t| {
                let mut exps = t.exps.clone();
                exps[var] -= 1;
                Monomial::new(t.coeff * f64::from(t.exps[var]), exps)
            })
            .collect();
        Self::canonical(self.nvars, terms)
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.nvars, other.nvars);
        let terms = self.terms.iter().chain(&other.terms).cloned().collect();
        Self::canonical(self.nvars, terms)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| Monomial::new(t.coeff * c, t.exps.clone()))
            .collect();
        Self::canonical(self.nvars, terms)
    }

    pub fn mul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.nvars, other.nvars);
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let exps = a.exps.iter().zip(&b.exps).map(|(x, y)| x + y).collect();
                terms.push(Monomial::new(a.coeff * b.coeff, exps));
            }
        }
        Self::canonical(self.nvars, terms)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, t) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}", t.coeff)?;
            for (v, &e) in t.exps.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*x{}", v + 1)?,
                    _ => write!(f, "*x{}^{}", v + 1, e)?,
                }
            }
        }
        Ok(())
    }
}
