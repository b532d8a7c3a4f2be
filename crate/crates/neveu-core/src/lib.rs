//! Numerical toolkit for a continuous-state Neveu-type branching process
//! with state-dependent jump intensities: exact jump samplers and the
//! branching mechanism, a catalog of C^2 Lyapunov test functions, adaptive
//! quadrature of the generator Lg, interval certificates for Lg <= d g and
//! Lg >= d g with their implied first-passage bounds, a boundary classifier
//! over (beta, theta), a truncated-jump path simulator, and the Monte Carlo
//! experiment harness cross-validating bounds and classification.

// Validation guards use `!(x > 0.0)` on purpose: unlike `x <= 0.0`, the
// negated form also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod criteria;
pub mod error;
pub mod generator;
pub mod gridding;
pub mod harness;
pub mod model;
pub mod quad;
pub mod serde_util;
pub mod sim;
pub mod test_functions;

pub use criteria::{
    canonical_lambda0, certify, chain_extinction_bound, classify, explosion_integral,
    explosion_threshold_u0, passage_lower_bound_down, passage_lower_bound_up, power_gap_margin,
    power_gap_threshold, BoundCertificate, BoundaryClassification, Direction, GridSpec,
    ImpliedBound,
};
pub use error::CoreError;
pub use generator::{default_abs_tol, eval_generator, eval_generator_grid, GeneratorEvaluation};
pub use harness::{
    compare_bounds, config_hash, default_sweep_grid, estimate_passage, resolve_case, run_batch,
    sweep_phase_diagram, sweep_scheme, verify_case, wilson_interval, AnalyticBound, BatchCounts,
    BoundCase, CaseOverrides, CdiHeuristics, ComparisonReport, ComparisonRow, PassageDirection,
    PassageEstimate, SweepCell, Verdict, VerifyConfig, VerifyReport,
};
pub use model::{band_rate, branching_mechanism, sample_jump, JumpBand, ModelParams};
pub use sim::{
    martingale_residual, path_rng, run_path, run_path_traced, step, step_detailed, ExitReason,
    PathResult, ResidualEstimate, SimScheme, StepDetail,
};
pub use test_functions::{
    check_regularity, derivative_selfcheck, parse_tag, RegularityReport, TestFunction,
};
