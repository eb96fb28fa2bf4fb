//! Level-set operators, the explicit grid scheme and zero-set extraction.

pub mod grid;
pub mod operators;
pub mod scheme;
pub mod zero_set;

pub use grid::{Grid, LevelSetField};
pub use operators::{
    evaluate_eps, f_eps, f_eps_envelopes, f_hmcf, f_hmcf_envelopes, reduced_hessian, reduced_hessian_eps, Branch,
    OperatorEval, BLEND_FACTOR,
};
pub use scheme::{
    cfl_limit, evolve, evolve_with, plan_steps, step_explicit, EvolveOptions, EvolveSummary, StepStats, Stepper,
    Trajectory, CFL_SAFETY,
};
pub use zero_set::{crossings, zero_set_radius, ZeroSetSummary};
