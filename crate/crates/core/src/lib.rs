//! Numerical kernels for level-set curvature flow in Carnot-type geometries
//! and its stochastic-control representation.

// `!(x > 0.0)` rejects NaN along with non-positive values, and the kernels
// index several parallel arrays with one loop variable.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod directions;
pub mod error;
pub mod frames;
pub mod levelset;
pub mod linalg;
pub mod pde;
pub mod poly;
pub mod sde;
pub mod value;

pub use error::{Error, Result};
pub use frames::{EpsilonFrame, Frame, FrameKind, Hormander, TermTable, VectorField};
pub use levelset::{AnalyticField, FieldSource, HorizontalJet, ScalarField};
pub use pde::{Grid, LevelSetField};
pub use poly::{Monomial, Polynomial};
pub use sde::{ControlPolicy, Dynamics, Mode, PathEnsemble};
pub use value::{Exponent, TerminalCost, ValueEstimate};
