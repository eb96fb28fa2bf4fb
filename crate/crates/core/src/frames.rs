//! Carnot-type frames on R^N, their Riemannian approximation, the flat
//! connection and Lie brackets.
//!
//! A frame is a list of polynomial vector fields `X_1..X_m`. The matrix
//! `sigma(x)` stacks the fields as rows (m x N); the epsilon-completion appends
//! `eps * E_{m+1} .. eps * E_N` so that `sigma_eps(x)` is square and invertible.
//!
//! Covariant derivatives use the flat connection of R^N,
//! `nabla_X Y (x) = J_Y(x) X(x)`, with Jacobians taken symbolically.

use crate::error::{Error, Result};
use crate::linalg;
use crate::poly::{Monomial, Polynomial};
use nalgebra::{DMatrix, DVector};

/// Largest ambient dimension supported by the fixed-size kernels.
pub const MAX_DIM: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FrameKind {
    Heisenberg1,
    Euclidean,
    CustomPolynomial,
}

impl FrameKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FrameKind::Heisenberg1 => "heisenberg1",
            FrameKind::Euclidean => "euclidean",
            FrameKind::CustomPolynomial => "custom",
        }
    }
}

/// A polynomial vector field on R^N together with its symbolic Jacobian.
#[derive(Clone, Debug)]
pub struct VectorField {
    comps: Vec<Polynomial>,
    /// Row-major N x N, `jac[r * N + c] = d comp_r / d x_c`.
    jac: Vec<Polynomial>,
}

impl VectorField {
    pub fn new(comps: Vec<Polynomial>) -> Result<Self> {
        let n = comps.len();
        if n == 0 {
            return Err(Error::InvalidArgument(
                "vector field needs at least one component".into(),
            ));
        }
        if let Some(bad) = comps.iter().find(|p| p.nvars() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: bad.nvars(),
            });
        }
        let jac = comps
            .iter()
            .flat_map(|p| (0..n).map(move |c| p.derivative(c)))
            .collect();
        Ok(Self { comps, jac })
    }

    pub fn unit(dim: usize, axis: usize, scale: f64) -> Self {
        let comps = (0..dim)
            .map(|k| {
                if k == axis {
                    Polynomial::constant(dim, scale)
                } else {
                    Polynomial::zero(dim)
                }
            })
            .collect();
        Self::new(comps).expect("well-formed unit field")
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn components(&self) -> &[Polynomial] {
        &self.comps
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(Polynomial::is_zero)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(self.comps.iter().map(|p| p.scale(c)).collect()).expect("same shape")
    }

    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, p) in out.iter_mut().zip(&self.comps) {
            *o = p.eval(x);
        }
    }

    pub fn eval(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.comps.iter().map(|p| p.eval(x)))
    }

    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |r, c| self.jac[r * n + c].eval(x))
    }

    /// Symbolic `nabla_self other = J_other * self`.
    pub fn covariant_derivative_of(&self, other: &VectorField) -> Vec<Polynomial> {
        let n = self.dim();
        (0..n)
            .map(|r| {
                (0..n).fold(Polynomial::zero(n), |acc, c| {
                    acc.add(&other.jac[r * n + c].mul(&self.comps[c]))
                })
            })
            .collect()
    }

    /// Symbolic Lie bracket `[self, other] = J_other self - J_self other`.
    pub fn bracket(&self, other: &VectorField) -> VectorField {
        let a = self.covariant_derivative_of(other);
        let b = other.covariant_derivative_of(self);
        let comps = a.iter().zip(&b).map(|(p, q)| p.sub(q)).collect();
        VectorField::new(comps).expect("same shape")
    }

    pub fn depends_on(&self, var: usize) -> bool {
        self.comps.iter().any(|p| p.depends_on(var))
    }
}

/// Polynomial tables for `nabla_{X_i} X_j` and its symmetrisation.
#[derive(Clone, Debug)]
struct Connection {
    count: usize,
    dim: usize,
    /// `raw[i * count + j][k]`: component k of `nabla_{X_i} X_j`.
    raw: Vec<Vec<Polynomial>>,
    /// `sym[i * count + j][k]`: component k of `(nabla_{X_i} X_j + nabla_{X_j} X_i) / 2`.
    sym: Vec<Vec<Polynomial>>,
    vanishes: bool,
}

impl Connection {
    fn new(fields: &[VectorField]) -> Self {
        let count = fields.len();
        let dim = fields[0].dim();
        let mut raw = Vec::with_capacity(count * count);
        for xi in fields {
            for xj in fields {
                raw.push(xi.covariant_derivative_of(xj));
            }
        }
        let mut sym = Vec::with_capacity(count * count);
        for i in 0..count {
            for j in 0..count {
                let s: Vec<Polynomial> = raw[i * count + j]
                    .iter()
                    .zip(&raw[j * count + i])
                    .map(|(a, b)| a.add(b).scale(0.5))
                    .collect();
                sym.push(s);
            }
        }
        let vanishes = sym.iter().flatten().all(Polynomial::is_zero);
        Self {
            count,
            dim,
            raw,
            sym,
            vanishes,
        }
    }

    fn contract(table: &[Vec<Polynomial>], count: usize, x: &[f64], p: &[f64], out: &mut [f64]) {
        for idx in 0..count * count {
            out[idx] = table[idx]
                .iter()
                .zip(p)
                .filter(|(_, &pk)| pk != 0.0)
                .map(|(poly, &pk)| poly.eval(x) * pk)
                .sum();
        }
    }

    fn symmetric_into(&self, x: &[f64], p: &[f64], out: &mut [f64]) {
        if self.vanishes {
            out[..self.count * self.count].fill(0.0);
            return;
        }
        Self::contract(&self.sym, self.count, x, p, out);
    }

    fn raw_into(&self, x: &[f64], p: &[f64], out: &mut [f64]) {
        Self::contract(&self.raw, self.count, x, p, out);
    }

    fn depends_on(&self, var: usize) -> bool {
        self.sym.iter().flatten().any(|p| p.depends_on(var))
    }

    fn matrix(&self, x: &[f64], p: &[f64], symmetric: bool) -> DMatrix<f64> {
        assert_eq!(p.len(), self.dim);
        let mut buf = vec![0.0; self.count * self.count];
        if symmetric {
            self.symmetric_into(x, p, &mut buf);
        } else {
            self.raw_into(x, p, &mut buf);
        }
        DMatrix::from_row_slice(self.count, self.count, &buf)
    }
}

/// Outcome of a pointwise bracket-generation check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hormander {
    /// The span reached dimension N using brackets of length `step`.
    Satisfied { step: usize },
    /// After `max_step` levels the span only has dimension `rank`.
    NotSatisfied { rank: usize },
}

/// One vector-field component as `(coefficient, exponents)` terms.
pub type TermTable = Vec<(f64, Vec<u32>)>;

/// A family of `m` polynomial vector fields on R^N.
#[derive(Clone, Debug)]
pub struct Frame {
    kind: FrameKind,
    dim: usize,
    fields: Vec<VectorField>,
    connection: Connection,
}

impl Frame {
    /// First Heisenberg group: `X1 = (1, 0, -x2/2)`, `X2 = (0, 1, x1/2)`.
    pub fn heisenberg1() -> Self {
        let n = 3;
        let z = || Polynomial::zero(n);
        let one = || Polynomial::constant(n, 1.0);
        let x1 = Polynomial::var(n, 0);
        let x2 = Polynomial::var(n, 1);
        let f1 = VectorField::new(vec![one(), z(), x2.scale(-0.5)]).expect("shape");
        let f2 = VectorField::new(vec![z(), one(), x1.scale(0.5)]).expect("shape");
        Self::assemble(FrameKind::Heisenberg1, n, vec![f1, f2])
    }

    /// Standard basis of R^dim (m = N).
    pub fn euclidean(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "euclidean dimension must be in 1..={MAX_DIM}, got {dim}"
            )));
        }
        let fields = (0..dim).map(|k| VectorField::unit(dim, k, 1.0)).collect();
        Ok(Self::assemble(FrameKind::Euclidean, dim, fields))
    }

    /// Frame from polynomial coefficient tables: `fields[i][k]` is component
    /// `k` of `X_{i+1}`. Structural deviations from the Carnot-type form are
    /// reported by [`Frame::structure_warnings`], not rejected.
    pub fn custom(dim: usize, fields: Vec<Vec<Polynomial>>) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "frame dimension must be in 1..={MAX_DIM}, got {dim}"
            )));
        }
        if fields.is_empty() || fields.len() > dim {
            return Err(Error::InvalidArgument(format!(
                "frame rank must be in 1..={dim}, got {}",
                fields.len()
            )));
        }
        let mut out = Vec::with_capacity(fields.len());
        for comps in fields {
            if comps.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: comps.len(),
                });
            }
            out.push(VectorField::new(comps)?);
        }
        Ok(Self::assemble(FrameKind::CustomPolynomial, dim, out))
    }

    /// Convenience for coefficient tables given as `(coeff, exponents)` lists.
    pub fn from_tables(dim: usize, tables: &[Vec<TermTable>]) -> Result<Self> {
        let mut fields = Vec::with_capacity(tables.len());
        for field in tables {
            let mut comps = Vec::with_capacity(field.len());
            for comp in field {
                let terms = comp.iter().map(|(c, e)| Monomial::new(*c, e.clone())).collect();
                comps.push(Polynomial::from_terms(dim, terms)?);
            }
            fields.push(comps);
        }
        Self::custom(dim, fields)
    }

    fn assemble(kind: FrameKind, dim: usize, fields: Vec<VectorField>) -> Self {
        let connection = Connection::new(&fields);
        Self {
            kind,
            dim,
            fields,
            connection,
        }
    }

    pub fn kind(&self) -> FrameKind {
        self.kind
    }

    /// Ambient dimension N.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Horizontal rank m.
    pub fn rank(&self) -> usize {
        self.fields.len()
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    /// Human-readable notes where the frame departs from the Carnot-type form.
    pub fn structure_warnings(&self) -> Vec<String> {
        let m = self.rank();
        let mut notes = Vec::new();
        for (i, f) in self.fields.iter().enumerate() {
            for (j, comp) in f.components().iter().enumerate().take(m) {
                let want = if i == j { 1.0 } else { 0.0 };
                if comp.as_constant() != Some(want) {
                    notes.push(format!(
                        "X{} component {} is `{}`, Carnot-type form requires {}",
                        i + 1,
                        j + 1,
                        comp,
                        want
                    ));
                }
            }
            for comp in f.components().iter().skip(m) {
                if (m..self.dim).any(|v| comp.depends_on(v)) {
                    notes.push(format!(
                        "X{} polynomial block depends on coordinates beyond the first {m}",
                        i + 1
                    ));
                    break;
                }
            }
        }
        notes
    }

    /// The m x N matrix whose rows are `X_i(x)`.
    pub fn sigma(&self, x: &[f64]) -> DMatrix<f64> {
        assert_eq!(x.len(), self.dim, "point dimension");
        let m = self.rank();
        DMatrix::from_fn(m, self.dim, |i, k| self.fields[i].components()[k].eval(x))
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.rank() {
            return Err(Error::InvalidArgument(format!(
                "field index {} out of range 1..={}",
                i + 1,
                self.rank()
            )));
        }
        Ok(())
    }

    /// Coordinate expression of `[X_i, X_j](x)` (0-based indices).
    pub fn lie_bracket(&self, i: usize, j: usize, x: &[f64]) -> Result<DVector<f64>> {
        self.check_index(i)?;
        self.check_index(j)?;
        let xi = &self.fields[i];
        let xj = &self.fields[j];
        Ok(xj.jacobian(x) * xi.eval(x) - xi.jacobian(x) * xj.eval(x))
    }

    /// Closes the span of the frame under brackets `[L^(k-1), L^(1)]` level by
    /// level and reports the first level at which it fills R^N at `x`.
    pub fn hormander_check(&self, x: &[f64], max_step: usize) -> Result<Hormander> {
        if max_step == 0 {
            return Err(Error::InvalidArgument("max_step must be at least 1".into()));
        }
        const RANK_TOL: f64 = 1e-10;
        let mut span: Vec<DVector<f64>> = self.fields.iter().map(|f| f.eval(x)).collect();
        let mut r = linalg::rank(&span, RANK_TOL);
        if r == self.dim {
            return Ok(Hormander::Satisfied { step: 1 });
        }
        let mut level: Vec<VectorField> = self.fields.clone();
        for step in 2..=max_step {
            let mut next = Vec::new();
            for a in &level {
                for b in &self.fields {
                    let br = a.bracket(b);
                    if !br.is_zero() {
                        next.push(br);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            span.extend(next.iter().map(|f| f.eval(x)));
            r = linalg::rank(&span, RANK_TOL);
            if r == self.dim {
                return Ok(Hormander::Satisfied { step });
            }
            level = next;
        }
        Ok(Hormander::NotSatisfied { rank: r })
    }

    /// `A(x, p)_{ij} = 1/2 <nabla_{X_i} X_j + nabla_{X_j} X_i, p>`, m x m.
    pub fn covariant_matrix(&self, x: &[f64], p: &[f64]) -> DMatrix<f64> {
        self.connection.matrix(x, p, true)
    }

    /// `<nabla_{X_i} X_j, p>` without symmetrisation, m x m.
    pub fn connection_matrix(&self, x: &[f64], p: &[f64]) -> DMatrix<f64> {
        self.connection.matrix(x, p, false)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<EpsilonFrame> {
        EpsilonFrame::new(self.clone(), epsilon)
    }
}

/// Riemannian approximation of a frame: the base fields completed by
/// `eps * E_{m+1} .. eps * E_N`.
#[derive(Clone, Debug)]
pub struct EpsilonFrame {
    base: Frame,
    epsilon: f64,
    fields: Vec<VectorField>,
    connection: Connection,
    /// `coord_dependence[v]`: sigma_eps or the connection depends on `x_v`.
    coord_dependence: Vec<bool>,
}

impl EpsilonFrame {
    pub fn new(base: Frame, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidEpsilon(epsilon));
        }
        let n = base.dim();
        let m = base.rank();
        let mut fields = base.fields().to_vec();
        fields.extend((m..n).map(|k| VectorField::unit(n, k, epsilon)));
        let connection = Connection::new(&fields);
        let coord_dependence = (0..n)
            .map(|v| fields.iter().any(|f| f.depends_on(v)) || connection.depends_on(v))
            .collect();
        Ok(Self {
            base,
            epsilon,
            fields,
            connection,
            coord_dependence,
        })
    }

    pub fn base(&self) -> &Frame {
        &self.base
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn rank(&self) -> usize {
        self.base.rank()
    }

    /// The N fields `X_1..X_m, eps E_{m+1}..eps E_N`.
    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    /// True when every symmetrised connection coefficient is identically zero.
    pub fn connection_vanishes(&self) -> bool {
        self.connection.vanishes
    }

    /// Whether sigma_eps or the connection terms vary with coordinate `var`.
    pub fn depends_on(&self, var: usize) -> bool {
        self.coord_dependence[var]
    }

    /// Row-major N x N `sigma_eps(x)` into `out`.
    #[inline]
    pub fn sigma_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for (i, f) in self.fields.iter().enumerate() {
            f.eval_into(x, &mut out[i * n..(i + 1) * n]);
        }
    }

    pub fn sigma_eps(&self, x: &[f64]) -> DMatrix<f64> {
        assert_eq!(x.len(), self.dim(), "point dimension");
        let n = self.dim();
        let mut buf = vec![0.0; n * n];
        self.sigma_into(x, &mut buf);
        DMatrix::from_row_slice(n, n, &buf)
    }

    /// Row-major `A_eps(x, p)` into `out` (N x N, symmetric).
    #[inline]
    pub fn covariant_into(&self, x: &[f64], p: &[f64], out: &mut [f64]) {
        self.connection.symmetric_into(x, p, out);
    }

    /// `(A_eps)_{ij} = 1/2 <nabla_{X_i^eps} X_j^eps + nabla_{X_j^eps} X_i^eps, p>`.
    pub fn covariant_matrix_eps(&self, x: &[f64], p: &[f64]) -> DMatrix<f64> {
        self.connection.matrix(x, p, true)
    }

    /// `<nabla_{X_i^eps} X_j^eps, p>` without symmetrisation.
    pub fn connection_matrix(&self, x: &[f64], p: &[f64]) -> DMatrix<f64> {
        self.connection.matrix(x, p, false)
    }

    /// Squared spectral norm of `sigma_eps(x)`.
    pub fn sigma_norm_sq(&self, x: &[f64]) -> f64 {
        let s = self.sigma_eps(x);
        linalg::lambda_max(&(&s * s.transpose()))
    }
}
