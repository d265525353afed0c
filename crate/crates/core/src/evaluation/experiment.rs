use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{phi_b, phi_p, BehaviorKind, PerformanceKind};
use crate::baselines::{active_learning, workload_partition_with_decisions, ActiveLearningOptions, QueryStrategy};
use crate::centaur::{
    augment_knn, augment_model, augment_raw, ensemble_stack, finetune, fit_constrained_cost, reward_ensemble,
    CentaurFitOptions, CentaurSpec, CostTarget, CostTransform,
};
use crate::datasets::{
    generate_dataset, split, GeneratorSpec, HumanProfile, HumanSignalDataset, LabeledDataset, SimulatedHuman,
    TaskKind,
};
use crate::models::{fit_supervised_view, FitConfig, FittedModel, ModelKind, Prediction};
use crate::numerics::{derive_seed, stream_id, DescentOptions};
use crate::rewards::{policy_metrics, preference_seeds, rlhf_loop, PreferenceWorld, RlhfConfig, WorldSettings, WorldSpec};
use crate::{Error, Result};

/// Model family and optimizer shared by every supervised fit in an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSettings {
    pub model_kind: ModelKind,
    pub l2_reg: f64,
    pub descent: DescentOptions,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            model_kind: ModelKind::Linear,
            l2_reg: 1e-3,
            descent: DescentOptions::default().with_iters(500),
        }
    }
}

impl FitSettings {
    pub fn config(&self, task: TaskKind, seed: u64) -> FitConfig {
        FitConfig::new(self.model_kind, task)
            .with_l2(self.l2_reg)
            .with_descent(self.descent.with_seed(seed))
    }
}

/// What an experiment arm fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", deny_unknown_fields)]
pub enum ArmKind {
    /// A model on the shared columns only.
    MachineOnly,
    /// The simulated human's own decisions.
    HumanOnly,
    Centaur {
        spec: CentaurSpec,
    },
    ActiveLearning {
        budget: usize,
        batch: usize,
        strategy: QueryStrategy,
    },
    WorkloadPartition {
        tau: f64,
    },
    /// The alternating preference loop on a preference world built from the
    /// experiment's generator and human.
    Rlhf {
        #[serde(default)]
        config: RlhfConfig,
        rounds: usize,
        pairs_per_round: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSpec {
    pub name: String,
    pub arm: ArmKind,
}

impl ArmSpec {
    pub fn new(name: &str, arm: ArmKind) -> Self {
        Self {
            name: name.to_string(),
            arm,
        }
    }
}

/// A replicated comparison of arms on identical data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub generator: GeneratorSpec,
    #[serde(default)]
    pub human: HumanProfile,
    pub arms: Vec<ArmSpec>,
    pub replications: usize,
    #[serde(default = "default_holdout")]
    pub holdout_fraction: f64,
    #[serde(default)]
    pub fit: FitSettings,
    /// Defaults to accuracy for binary tasks and negative MSE for regression.
    #[serde(default)]
    pub performance: Option<PerformanceKind>,
    #[serde(default = "default_behavior")]
    pub behavior: BehaviorKind,
    /// Used by preference-loop arms only.
    #[serde(default)]
    pub preference_world: WorldSettings,
}

fn default_holdout() -> f64 {
    0.3
}

fn default_behavior() -> BehaviorKind {
    BehaviorKind::Agreement
}

impl ExperimentSpec {
    pub fn new(generator: GeneratorSpec, human: HumanProfile, arms: Vec<ArmSpec>, replications: usize) -> Self {
        Self {
            generator,
            human,
            arms,
            replications,
            holdout_fraction: default_holdout(),
            fit: FitSettings::default(),
            performance: None,
            behavior: default_behavior(),
            preference_world: WorldSettings::default(),
        }
    }

    pub fn performance_kind(&self) -> PerformanceKind {
        self.performance.unwrap_or(match self.generator.task_kind {
            TaskKind::Binary => PerformanceKind::Accuracy,
            TaskKind::Regression => PerformanceKind::NegMse,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        if self.arms.is_empty() {
            return Err(Error::Config("arms must list at least one arm".into()));
        }
        for (i, arm) in self.arms.iter().enumerate() {
            if arm.name.is_empty() {
                return Err(Error::Config(format!("arms[{i}].name is empty")));
            }
            if self.arms[..i].iter().any(|a| a.name == arm.name) {
                return Err(Error::Config(format!("duplicate arm name {:?}", arm.name)));
            }
            self.validate_arm(arm)?;
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::Config(format!(
                "holdout_fraction must lie in (0, 1), got {}",
                self.holdout_fraction
            )));
        }
        if !(self.fit.l2_reg >= 0.0 && self.fit.l2_reg.is_finite()) {
            return Err(Error::Config("fit.l2_reg must be finite and nonnegative".into()));
        }
        self.fit.descent.validate()?;
        let task = self.generator.task_kind;
        match (task, self.performance_kind()) {
            (TaskKind::Binary, PerformanceKind::NegMse) | (TaskKind::Regression, PerformanceKind::Accuracy | PerformanceKind::Auc) => {
                return Err(Error::Config(format!(
                    "performance {:?} does not fit a {task:?} task",
                    self.performance_kind()
                )))
            }
            _ => {}
        }
        if self.arms.iter().any(|a| matches!(a.arm, ArmKind::Rlhf { .. })) {
            self.preference_world.validate()?;
        }
        Ok(())
    }

    fn validate_arm(&self, arm: &ArmSpec) -> Result<()> {
        let name = &arm.name;
        match &arm.arm {
            ArmKind::MachineOnly | ArmKind::HumanOnly => Ok(()),
            ArmKind::Centaur { spec } => spec
                .validate()
                .map_err(|e| Error::Config(format!("arm {name:?}: {e}"))),
            ArmKind::ActiveLearning { budget, batch, .. } => {
                if *budget == 0 || *batch == 0 {
                    return Err(Error::Config(format!("arm {name:?}: budget and batch must be positive")));
                }
                if self.generator.task_kind != TaskKind::Binary {
                    return Err(Error::Config(format!("arm {name:?}: active learning needs a binary task")));
                }
                Ok(())
            }
            ArmKind::WorkloadPartition { tau } => {
                if !(0.0..=1.0).contains(tau) {
                    return Err(Error::Config(format!("arm {name:?}: tau must lie in [0, 1], got {tau}")));
                }
                if self.generator.task_kind != TaskKind::Binary {
                    return Err(Error::Config(format!("arm {name:?}: workload partitioning needs a binary task")));
                }
                Ok(())
            }
            ArmKind::Rlhf {
                config,
                rounds,
                pairs_per_round,
            } => {
                if *rounds == 0 || *pairs_per_round == 0 {
                    return Err(Error::Config(format!(
                        "arm {name:?}: rounds and pairs_per_round must be positive"
                    )));
                }
                config.validate().map_err(|e| Error::Config(format!("arm {name:?}: {e}")))
            }
        }
    }
}

/// Scores of one arm in one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub phi_p: f64,
    pub phi_b: f64,
    pub n_records: usize,
    pub seed: u64,
    /// Mean KL divergence to the reference policy, for preference-loop arms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_kl: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub index: usize,
    pub seed: u64,
    /// Content hashes of the training and holdout records every arm saw.
    pub train_hash: String,
    pub holdout_hash: String,
    pub arms: Vec<ArmResult>,
}

impl ReplicationRecord {
    pub fn failed(&self) -> bool {
        self.arms.iter().any(|a| a.error.is_some())
    }

    pub fn metrics(&self, arm: &str) -> Option<&MetricsReport> {
        self.arms.iter().find(|a| a.name == arm).and_then(|a| a.metrics.as_ref())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation (0 for a single value).
    pub stdev: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                stdev: f64::NAN,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let stdev = if n > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, stdev, n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub name: String,
    pub phi_p: Stat,
    pub phi_b: Stat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_kl: Option<Stat>,
    pub failures: usize,
}

/// Head-to-head phi_p counts over replications where both arms succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairWins {
    pub first: String,
    pub second: String,
    pub first_wins: usize,
    pub second_wins: usize,
    pub ties: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub master_seed: u64,
    pub performance: PerformanceKind,
    pub behavior: BehaviorKind,
    pub replications: Vec<ReplicationRecord>,
    pub summary: Vec<ArmSummary>,
    pub wins: Vec<PairWins>,
}

impl ExperimentReport {
    pub fn arm(&self, name: &str) -> Option<&ArmSummary> {
        self.summary.iter().find(|a| a.name == name)
    }

    /// Successful `(first, second)` metric pairs, replication by replication.
    pub fn paired(&self, first: &str, second: &str) -> Vec<(MetricsReport, MetricsReport)> {
        self.replications
            .iter()
            .filter_map(|r| Some((r.metrics(first)?.clone(), r.metrics(second)?.clone())))
            .collect()
    }
}

/// The seed of replication `index`.
pub fn replication_seed(master_seed: u64, index: usize) -> u64 {
    derive_seed(derive_seed(master_seed, stream_id("replication")), index as u64)
}

/// Per-replication data shared by every supervised arm.
struct Replication {
    seed: u64,
    train: LabeledDataset,
    holdout: LabeledDataset,
    human: SimulatedHuman,
    /// Human decisions on the training and holdout records.
    human_train: Vec<f64>,
    human_holdout: Vec<f64>,
    /// The human's noise-free response on the holdout, for concordance.
    human_scores: Vec<f64>,
    fit: FitConfig,
    machine_columns: Vec<usize>,
    human_columns: Vec<usize>,
}

const HUMAN_COLUMN: &str = "__human_decision";

impl Replication {
    fn new(spec: &ExperimentSpec, seed: u64) -> Result<Self> {
        let g = &spec.generator;
        let data = generate_dataset(g, derive_seed(seed, stream_id("data")))?;
        let human = SimulatedHuman::from_profile(g, &spec.human, derive_seed(seed, stream_id("human")))?;
        // Decisions are drawn per original record, then carried through the split.
        let decisions = human.label_dataset(&data)?;
        let tagged = data.append_column(HUMAN_COLUMN, &decisions)?;
        let parts = split(
            &tagged,
            &[1.0 - spec.holdout_fraction, spec.holdout_fraction],
            derive_seed(seed, stream_id("holdout")),
        )?;
        let d = g.n_features();
        let untag = |ds: &LabeledDataset| -> Result<(LabeledDataset, Vec<f64>)> {
            let column = ds.rows().map(|r| r[d]).collect();
            Ok((ds.select_columns(&(0..d).collect::<Vec<_>>())?, column))
        };
        let (train, human_train) = untag(&parts[0])?;
        let (holdout, human_holdout) = untag(&parts[1])?;
        if train.is_empty() || holdout.is_empty() {
            return Err(Error::Config("n_records too small for the holdout split".into()));
        }
        let human_scores = holdout
            .rows()
            .map(|r| human.response_probability(r))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            seed,
            fit: spec.fit.config(g.task_kind, derive_seed(seed, stream_id("fit"))),
            machine_columns: g.shared_columns(),
            human_columns: human.visible_columns(),
            train,
            holdout,
            human,
            human_train,
            human_holdout,
            human_scores,
        })
    }

    fn d_human(&self) -> Result<HumanSignalDataset> {
        HumanSignalDataset::from_labels(self.train.with_labels(self.human_train.clone())?)
    }

    fn machine(&self) -> Result<FittedModel> {
        if self.machine_columns.is_empty() {
            return Err(Error::Config("the machine needs at least one shared column (d_shared = 0)".into()));
        }
        fit_supervised_view(&self.train, Some(&self.machine_columns), &self.fit)
    }

    fn preference_model(&self) -> Result<FittedModel> {
        let labeled = self.train.with_labels(self.human_train.clone())?;
        fit_supervised_view(&labeled, Some(&self.human_columns), &self.fit)
    }

    fn centaur_opts(&self) -> CentaurFitOptions {
        CentaurFitOptions::new(self.fit.clone())
            .with_machine_columns(self.machine_columns.clone())
            .with_human_columns(self.human_columns.clone())
    }

    /// Holdout predictions of one supervised arm.
    fn predict(&self, arm: &ArmKind) -> Result<Vec<Prediction>> {
        let task = self.fit.task;
        match arm {
            ArmKind::MachineOnly => self.machine()?.predict_dataset(&self.holdout),
            ArmKind::HumanOnly => Ok(self.human_holdout.iter().map(|v| decision_prediction(task, *v)).collect()),
            ArmKind::Centaur { spec } => self.centaur(spec),
            ArmKind::ActiveLearning { budget, batch, strategy } => {
                let opts = ActiveLearningOptions {
                    budget: *budget,
                    batch: *batch,
                    strategy: *strategy,
                    fit: self.fit.clone(),
                    columns: Some(self.machine_columns.clone()),
                    seed: self.seed,
                };
                let out = active_learning(&self.train, &self.human, &opts, Some(&self.holdout))?;
                out.model.predict_dataset(&self.holdout)
            }
            ArmKind::WorkloadPartition { tau } => {
                let report = workload_partition_with_decisions(&self.machine()?, &self.human_holdout, *tau, &self.holdout)?;
                Ok(report.predictions.iter().map(|v| decision_prediction(task, *v)).collect())
            }
            ArmKind::Rlhf { .. } => unreachable!("preference-loop arms are scored separately"),
        }
    }

    fn centaur(&self, spec: &CentaurSpec) -> Result<Vec<Prediction>> {
        let opts = self.centaur_opts();
        let model = match spec {
            CentaurSpec::AugmentRaw => augment_raw(&self.train, &self.d_human()?, &opts)?,
            CentaurSpec::AugmentKnn { k } => augment_knn(&self.train, &self.d_human()?, *k, &opts)?,
            CentaurSpec::AugmentModel { importance_cap } => {
                augment_model(&self.train, &self.preference_model()?, importance_cap, &opts)?
            }
            CentaurSpec::Finetune { tuning_mask, c1 } => {
                finetune(&self.machine()?, &self.d_human()?, tuning_mask, *c1, &self.fit)?
            }
            CentaurSpec::EnsembleStack { contribution_cap } => ensemble_stack(
                &[self.machine()?],
                &[self.preference_model()?],
                &self.train,
                *contribution_cap,
                &self.fit,
            )?,
            CentaurSpec::RewardEnsemble { extents, adapter_rank } => {
                let k = extents.len().max(1);
                let labeled = self.train.with_labels(self.human_train.clone())?;
                let parts = split(&labeled, &vec![1.0 / k as f64; k], derive_seed(self.seed, stream_id("human-parts")))?;
                let sets = parts
                    .into_iter()
                    .map(HumanSignalDataset::from_labels)
                    .collect::<Result<Vec<_>>>()?;
                reward_ensemble(&self.machine()?, &sets, extents, *adapter_rank, &self.fit)?
            }
            CentaurSpec::ConstrainedCost { lambda, f1, f2, l2 } => {
                let d_human = self.d_human()?;
                let importance;
                let target = match f2 {
                    CostTransform::Identity => CostTarget::Decisions(&d_human),
                    CostTransform::GradientImportance => {
                        importance = self.human_importance();
                        CostTarget::Importance(&importance)
                    }
                };
                fit_constrained_cost(&self.train, target, *lambda, *f1, *f2, *l2, &opts)?
            }
        };
        let signals = model.needs_human_signal().then_some(&self.human_holdout[..]);
        model.predict_dataset(&self.holdout, signals)
    }

    /// The human's normalized absolute weights on the machine's columns.
    fn human_importance(&self) -> Vec<f64> {
        let mut weights = vec![0.0; self.machine_columns.len()];
        for (col, w) in self.human.visible_columns().iter().zip(self.human.weights()) {
            if let Some(j) = self.machine_columns.iter().position(|c| c == col) {
                weights[j] = w.abs();
            }
        }
        let total: f64 = weights.iter().sum();
        if total > 0.0 {
            weights.iter().map(|w| w / total).collect()
        } else {
            vec![1.0 / weights.len() as f64; weights.len()]
        }
    }

    fn score(&self, predictions: &[Prediction], spec: &ExperimentSpec) -> Result<MetricsReport> {
        let decisions: Vec<f64> = predictions.iter().map(Prediction::decision).collect();
        let scores: Vec<f64> = predictions.iter().map(Prediction::score).collect();
        let performance = spec.performance_kind();
        let p = match performance {
            PerformanceKind::Accuracy => phi_p(&decisions, self.holdout.labels(), performance)?,
            PerformanceKind::Auc | PerformanceKind::NegMse => phi_p(&scores, self.holdout.labels(), performance)?,
        };
        let b = match spec.behavior {
            BehaviorKind::Agreement => phi_b(&decisions, &self.human_holdout, spec.behavior)?,
            BehaviorKind::Concordance => phi_b(&scores, &self.human_scores, spec.behavior)?,
        };
        Ok(MetricsReport {
            phi_p: p,
            phi_b: b,
            n_records: self.holdout.n_records(),
            seed: self.seed,
            mean_kl: None,
        })
    }
}

/// A decision reported as a prediction whose score is the decision itself.
fn decision_prediction(task: TaskKind, v: f64) -> Prediction {
    match task {
        TaskKind::Binary => Prediction::Binary {
            probability: v,
            class: u8::from(v >= 0.5),
        },
        TaskKind::Regression => Prediction::Regression { value: v },
    }
}

fn rlhf_arm(spec: &ExperimentSpec, seed: u64, config: &RlhfConfig, rounds: usize, pairs: usize) -> Result<MetricsReport> {
    let world_spec = WorldSpec {
        generator: spec.generator.clone(),
        human: spec.human.clone(),
        settings: spec.preference_world.clone(),
    };
    let (world_seed, loop_seed) = preference_seeds(seed);
    let world = PreferenceWorld::build(&world_spec, world_seed)?;
    let out = rlhf_loop(&world, config, rounds, pairs, loop_seed)?;
    let m = policy_metrics(&world, &out.policy, &out.reward)?;
    Ok(MetricsReport {
        phi_p: m.phi_p,
        phi_b: m.phi_b,
        n_records: world.eval.len(),
        seed,
        mean_kl: Some(m.mean_kl),
    })
}

fn run_replication(spec: &ExperimentSpec, master_seed: u64, index: usize) -> ReplicationRecord {
    let seed = replication_seed(master_seed, index);
    let data = Replication::new(spec, seed);
    let (train_hash, holdout_hash) = match &data {
        Ok(r) => (r.train.content_hash(), r.holdout.content_hash()),
        Err(_) => (String::new(), String::new()),
    };
    let arms = spec
        .arms
        .iter()
        .map(|arm| {
            let result = match (&arm.arm, &data) {
                (
                    ArmKind::Rlhf {
                        config,
                        rounds,
                        pairs_per_round,
                    },
                    _,
                ) => rlhf_arm(spec, seed, config, *rounds, *pairs_per_round),
                (kind, Ok(rep)) => rep.predict(kind).and_then(|p| rep.score(&p, spec)),
                (_, Err(e)) => Err(e.clone()),
            };
            match result {
                Ok(metrics) => ArmResult {
                    name: arm.name.clone(),
                    metrics: Some(metrics),
                    error: None,
                },
                Err(e) => ArmResult {
                    name: arm.name.clone(),
                    metrics: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    ReplicationRecord {
        index,
        seed,
        train_hash,
        holdout_hash,
        arms,
    }
}

/// Runs every arm on every replication. Replications run in parallel and are
/// reduced in index order, so the report depends only on `(spec, master_seed)`.
/// A failing arm is recorded in its replication; the experiment fails when
/// more than half of the replications have a failed arm.
pub fn run_experiment(spec: &ExperimentSpec, master_seed: u64) -> Result<ExperimentReport> {
    spec.validate()?;
    let replications: Vec<ReplicationRecord> = (0..spec.replications)
        .into_par_iter()
        .map(|i| run_replication(spec, master_seed, i))
        .collect();
    let failed = replications.iter().filter(|r| r.failed()).count();
    if 2 * failed > replications.len() {
        let first = replications
            .iter()
            .flat_map(|r| &r.arms)
            .find_map(|a| a.error.clone())
            .unwrap_or_default();
        return Err(Error::Experiment(format!(
            "{failed} of {} replications failed; first error: {first}",
            replications.len()
        )));
    }
    let summary = spec
        .arms
        .iter()
        .map(|arm| {
            let ok: Vec<&MetricsReport> = replications.iter().filter_map(|r| r.metrics(&arm.name)).collect();
            let kls: Vec<f64> = ok.iter().filter_map(|m| m.mean_kl).collect();
            ArmSummary {
                name: arm.name.clone(),
                phi_p: Stat::of(&ok.iter().map(|m| m.phi_p).collect::<Vec<_>>()),
                phi_b: Stat::of(&ok.iter().map(|m| m.phi_b).collect::<Vec<_>>()),
                mean_kl: (!kls.is_empty()).then(|| Stat::of(&kls)),
                failures: replications.len() - ok.len(),
            }
        })
        .collect();
    let mut wins = Vec::new();
    for (i, a) in spec.arms.iter().enumerate() {
        for b in &spec.arms[i + 1..] {
            let mut w = PairWins {
                first: a.name.clone(),
                second: b.name.clone(),
                first_wins: 0,
                second_wins: 0,
                ties: 0,
            };
            for r in &replications {
                if let (Some(x), Some(y)) = (r.metrics(&a.name), r.metrics(&b.name)) {
                    match x.phi_p.total_cmp(&y.phi_p) {
                        std::cmp::Ordering::Greater => w.first_wins += 1,
                        std::cmp::Ordering::Less => w.second_wins += 1,
                        std::cmp::Ordering::Equal => w.ties += 1,
                    }
                }
            }
            wins.push(w);
        }
    }
    Ok(ExperimentReport {
        master_seed,
        performance: spec.performance_kind(),
        behavior: spec.behavior,
        replications,
        summary,
        wins,
    })
}
