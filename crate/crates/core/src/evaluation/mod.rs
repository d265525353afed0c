//! Dual metrics, replication experiments, the ranking experiment and
//! frontier sweeps.

mod config;
mod experiment;
mod metrics;
mod report;
mod sweep;

pub use config::{OutputSettings, RunConfig, SessionSettings, SCHEMA_VERSION};
pub use experiment::{
    replication_seed, run_experiment, ArmKind, ArmResult, ArmSpec, ArmSummary, ExperimentReport, ExperimentSpec,
    FitSettings, MetricsReport, PairWins, ReplicationRecord, Stat,
};
pub use metrics::{auc, concordance, phi_b, phi_p, BehaviorKind, PerformanceKind};
pub use report::{frontier_csv, summary_csv, to_json_pretty};
pub use sweep::{
    frontier_sweep, ordering, ranking_experiment, FrontierPoint, FrontierReport, Knob, OrderingStat, RankingReport,
    CENTAUR_ARM, HUMAN_ARM, MACHINE_ARM,
};
