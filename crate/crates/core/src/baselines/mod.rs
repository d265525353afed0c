//! Human-in-the-loop comparators: active learning, workload partitioning,
//! and the human-only and machine-only arms.

mod active;
mod partition;

pub use active::{active_learning, ActiveLearningOptions, ActiveLearningOutcome, ActiveStep, QueryStrategy};
pub use partition::{human_only, machine_only, workload_partition, workload_partition_with_decisions, RoutingReport};
