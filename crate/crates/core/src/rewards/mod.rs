//! Reward models fitted to preference triplets, KL-regularized policy
//! optimization, and the loop that alternates the two with a human in it.

mod fit;
mod learner;
mod policy_opt;
mod world;

pub use fit::{fit_reward, refit_reward, reward_loss, RewardFitOptions, TripletObjective};
pub use learner::{
    oracle_seed, preference_seeds, policy_metrics, rlhf_loop, simulated_choice, write_trace_jsonl, Choice, ContextSelection,
    PairSampling, PolicyMetrics, Query, RlhfConfig, RlhfLearner, RlhfOutcome, TraceRecord,
};
pub use policy_opt::{mean_kl, optimize_policy, optimize_policy_within, PolicyObjective, PolicyOutcome};
pub use world::{PreferenceWorld, WorldSettings, WorldSpec};
