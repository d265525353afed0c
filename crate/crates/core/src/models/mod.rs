mod arch;
mod knn;
mod policy;
mod reward;
mod scaler;
mod snapshot;
mod supervised;

pub use arch::{Architecture, ModelKind};
pub use knn::{knn_feedback, KnnIndex};
pub(crate) use policy::argmax;
pub use policy::{
    fit_behavior_policy, policy_distribution, ActionSet, CandidateEncoding, ImitationObjective, SoftmaxPolicy,
};
pub use reward::{reward_score, RewardModel};
pub use scaler::Standardizer;
pub use snapshot::ModelSnapshot;
pub(crate) use supervised::{add_l2, validate_labels};
pub use supervised::{
    fit_from, fit_supervised, prediction_from_output, fit_supervised_view, untrained_model, FitConfig, FittedModel, Loss, Prediction,
    SupervisedObjective,
};
