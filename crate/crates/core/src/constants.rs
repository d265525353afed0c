//! Numerical defaults shared by every module.

/// Default stopping threshold on the (projected) gradient norm.
pub const GRAD_TOL: f64 = 1e-8;

/// Tolerance on `|sum(p) - 1|` when validating a probability distribution.
pub const DIST_SUM_TOL: f64 = 1e-9;

/// Default fixed step size for full-batch descent.
pub const STEP_SIZE: f64 = 0.5;

/// Default iteration cap for full-batch descent.
pub const MAX_ITERS: usize = 1000;

/// Central-difference step used by gradient checks.
pub const FD_STEP: f64 = 1e-5;

/// Maximum relative error accepted by gradient checks.
pub const GRAD_CHECK_THRESHOLD: f64 = 1e-4;

/// Floor on the denominator of the relative gradient error, so coordinates
/// whose true derivative is ~0 are compared absolutely.
pub const GRAD_CHECK_FLOOR: f64 = 1e-3;

/// Classification threshold on predicted probabilities. Ties resolve to class 1.
pub const DECISION_THRESHOLD: f64 = 0.5;

/// Warm-start refit budget per live feedback event.
pub const LIVE_REFIT_ITERS: usize = 50;
