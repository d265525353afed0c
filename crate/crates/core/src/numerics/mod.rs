//! Deterministic optimization and verification primitives.

mod descent;
mod finite_diff;
mod params;
mod prob;
mod rng;

pub use descent::{
    gradient_descent, minimize, project_box, project_l1_ball, project_l2_ball, projected_descent,
    DescentOptions, DescentOutcome, Objective, Projector,
};
pub use finite_diff::{finite_diff_gradient, grad_check, relative_error, GradCheckReport};
pub use params::{ParamVector, Segment};
pub use prob::{
    dot, kl_categorical, log_sigmoid, log_softmax, sigmoid, softmax, softplus, total_variation,
};
pub use rng::{derive_seed, mix64, stream_id, SplitMix64};
