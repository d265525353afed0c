//! Building blocks for human-algorithm centaurs.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: deterministic descent, projections, finite differences,
//!   probability helpers and the SplitMix64 generator.
//! * [`datasets`]: labeled data, human-signal data, synthetic generators and
//!   the simulated human oracle.
//! * [`models`]: linear and one-hidden-layer models, k-NN feedback, reward
//!   models and softmax policies.
//! * [`centaur`]: the supervised symbiotic techniques (augmented covariates,
//!   fine-tuning, ensembles, preference-constrained costs).
//! * [`rewards`]: reward fitting from preference triplets and KL-regularized
//!   policy optimization, plus the alternating feedback loop.
//! * [`baselines`]: human-in-the-loop comparators.
//! * [`evaluation`]: dual metrics, replication experiments and sweeps.
//! * [`gradcheck`]: the registry of analytic gradients verified against
//!   finite differences.

pub mod baselines;
pub mod centaur;
pub mod constants;
pub mod datasets;
mod error;
pub mod evaluation;
pub mod gradcheck;
pub mod models;
pub mod numerics;
pub mod rewards;

pub use error::{Error, Result};

pub use centaur::{CentaurModel, CentaurSpec};
pub use datasets::{
    GeneratorSpec, HumanProfile, HumanSignalDataset, LabeledDataset, PreferenceTriplet,
    SimulatedHuman, TaskKind,
};
pub use evaluation::{ExperimentReport, ExperimentSpec, MetricsReport};
pub use models::{FittedModel, ModelKind, RewardModel, SoftmaxPolicy};
pub use numerics::{DescentOptions, ParamVector, SplitMix64};
