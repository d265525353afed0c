//! Symbiotic techniques that merge human signals into supervised models.
//!
//! Every technique returns a [`CentaurModel`] whose constraint residuals are
//! checked at return.

mod adapters;
mod augment;
mod cost;
mod ensemble;
mod finetune;

pub use adapters::reward_ensemble;
pub use augment::{augment_knn, augment_model, augment_raw, HUMAN_SIGNAL_COLUMN};
pub use cost::{fit_constrained_cost, importance_profile, AlignmentLoss, CostTarget, CostTransform, ImportanceObjective};
pub(crate) use cost::ConstrainedObjective;
pub use ensemble::{ensemble_stack, StackObjective};
pub use finetune::finetune;

use serde::{Deserialize, Serialize};

use crate::datasets::{sha256_hex, LabeledDataset, TaskKind};
use crate::models::{prediction_from_output, FitConfig, FittedModel, KnnIndex, ModelSnapshot, Prediction};
use crate::numerics::ParamVector;
use crate::{Error, Result};

/// Relative slack allowed when checking residuals against their caps.
const RESIDUAL_SLACK: f64 = 1e-9;

/// A cap on constraint magnitude; `None` is unbounded.
pub type Cap = Option<f64>;

/// How the importance cap of `augment_model` is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CapChoice {
    Fixed(Cap),
    /// Pick the grid value with the lowest validation loss (ties go to the
    /// smaller cap), then refit on all data.
    Validated {
        grid: Vec<Cap>,
        #[serde(default = "default_validation_fraction")]
        validation_fraction: f64,
    },
}

fn default_validation_fraction() -> f64 {
    0.25
}

/// Which technique to apply and its constraint settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CentaurSpec {
    AugmentRaw,
    AugmentKnn {
        k: usize,
    },
    AugmentModel {
        importance_cap: CapChoice,
    },
    Finetune {
        tuning_mask: Vec<String>,
        c1: Cap,
    },
    EnsembleStack {
        contribution_cap: Cap,
    },
    RewardEnsemble {
        extents: Vec<usize>,
        adapter_rank: usize,
    },
    ConstrainedCost {
        lambda: f64,
        #[serde(default)]
        f1: CostTransform,
        #[serde(default)]
        f2: CostTransform,
        #[serde(default)]
        l2: AlignmentLoss,
    },
}

pub(crate) fn check_cap(name: &str, cap: Cap) -> Result<()> {
    match cap {
        Some(c) if !(c >= 0.0) => Err(Error::Config(format!("{name} must be nonnegative, got {c}"))),
        _ => Ok(()),
    }
}

impl CentaurSpec {
    pub fn technique(&self) -> &'static str {
        match self {
            CentaurSpec::AugmentRaw => "augment_raw",
            CentaurSpec::AugmentKnn { .. } => "augment_knn",
            CentaurSpec::AugmentModel { .. } => "augment_model",
            CentaurSpec::Finetune { .. } => "finetune",
            CentaurSpec::EnsembleStack { .. } => "ensemble_stack",
            CentaurSpec::RewardEnsemble { .. } => "reward_ensemble",
            CentaurSpec::ConstrainedCost { .. } => "constrained_cost",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CentaurSpec::AugmentRaw => Ok(()),
            CentaurSpec::AugmentKnn { k } => {
                if *k == 0 {
                    return Err(Error::Config("k must be positive".into()));
                }
                Ok(())
            }
            CentaurSpec::AugmentModel { importance_cap } => match importance_cap {
                CapChoice::Fixed(cap) => check_cap("importance_cap", *cap),
                CapChoice::Validated {
                    grid,
                    validation_fraction,
                } => {
                    if grid.is_empty() {
                        return Err(Error::Config("importance_cap grid is empty".into()));
                    }
                    for cap in grid {
                        check_cap("importance_cap", *cap)?;
                    }
                    if !(*validation_fraction > 0.0 && *validation_fraction < 1.0) {
                        return Err(Error::Config("validation_fraction must be in (0, 1)".into()));
                    }
                    Ok(())
                }
            },
            CentaurSpec::Finetune { tuning_mask, c1 } => {
                if tuning_mask.is_empty() {
                    return Err(Error::Config("tuning_mask selects no segment".into()));
                }
                check_cap("c1", *c1)
            }
            CentaurSpec::EnsembleStack { contribution_cap } => check_cap("contribution_cap", *contribution_cap),
            CentaurSpec::RewardEnsemble { extents, adapter_rank } => {
                if extents.is_empty() {
                    return Err(Error::Config("reward_ensemble needs at least one member".into()));
                }
                if *adapter_rank == 0 {
                    return Err(Error::Config("adapter_rank must be positive".into()));
                }
                Ok(())
            }
            CentaurSpec::ConstrainedCost { lambda, f1, f2, l2 } => {
                if !(*lambda >= 0.0 && lambda.is_finite()) {
                    return Err(Error::Config(format!("lambda must be finite and nonnegative, got {lambda}")));
                }
                cost::check_kinds(*f1, *f2, *l2)
            }
        }
    }
}

/// Fitting inputs shared by the supervised techniques.
#[derive(Debug, Clone, PartialEq)]
pub struct CentaurFitOptions {
    pub fit: FitConfig,
    /// Columns of each row the machine side reads (all when `None`).
    pub machine_columns: Option<Vec<usize>>,
    /// Columns the human side reads, for k-NN lookups (all when `None`).
    pub human_columns: Option<Vec<usize>>,
}

impl CentaurFitOptions {
    pub fn new(fit: FitConfig) -> Self {
        Self {
            fit,
            machine_columns: None,
            human_columns: None,
        }
    }

    pub fn with_machine_columns(mut self, columns: Vec<usize>) -> Self {
        self.machine_columns = Some(columns);
        self
    }

    pub fn with_human_columns(mut self, columns: Vec<usize>) -> Self {
        self.human_columns = Some(columns);
        self
    }
}

/// One machine-checkable constraint `value <= cap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub name: String,
    pub value: f64,
    pub cap: Cap,
}

impl Residual {
    pub fn new(name: &str, value: f64, cap: Cap) -> Self {
        Self {
            name: name.to_string(),
            value,
            cap,
        }
    }

    pub fn satisfied(&self) -> bool {
        match self.cap {
            None => self.value.is_finite(),
            Some(cap) => self.value <= cap + RESIDUAL_SLACK * cap.max(1.0),
        }
    }
}

/// Where a centaur came from: hashes of the machine-side and human-side inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub technique: String,
    pub spec: CentaurSpec,
    /// Hash of the base model snapshot, or of d_data when no base model exists.
    pub base_hash: String,
    /// Hash of d_human, or of the human-preference model snapshot(s).
    pub human_data_hash: String,
}

/// The human-derived input column appended by augmentation techniques.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum HumanFeature {
    /// Supplied per record by the caller.
    Signal,
    Knn { index: KnnIndex },
    Model { model: FittedModel },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Predictor {
    /// `model` reads each row with the human feature appended as last column.
    Augmented { model: FittedModel, feature: HumanFeature },
    Single { model: FittedModel },
    /// Linear combiner over member raw outputs; weights live in the
    /// symbiotic parameters (`machine`, `human`, `intercept`).
    Stack {
        machine: Vec<FittedModel>,
        human: Vec<FittedModel>,
        task: TaskKind,
    },
    /// Adapted members sharing a frozen base; output is the mean raw score.
    Adapted { members: Vec<FittedModel> },
}

/// A fitted centaur: its symbiotic parameters, how to predict with them,
/// the constraints it satisfies, and where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentaurModel {
    pub symbiotic_params: ParamVector,
    pub predictor: Predictor,
    pub residuals: Vec<Residual>,
    pub provenance: Provenance,
}

impl CentaurModel {
    pub(crate) fn build(
        spec: &CentaurSpec,
        symbiotic_params: ParamVector,
        predictor: Predictor,
        residuals: Vec<Residual>,
        base_hash: String,
        human_data_hash: String,
    ) -> Result<Self> {
        let model = Self {
            symbiotic_params,
            predictor,
            residuals,
            provenance: Provenance {
                technique: spec.technique().to_string(),
                spec: spec.clone(),
                base_hash,
                human_data_hash,
            },
        };
        model.check_residuals()?;
        Ok(model)
    }

    pub fn spec(&self) -> &CentaurSpec {
        &self.provenance.spec
    }

    pub fn check_residuals(&self) -> Result<()> {
        match self.residuals.iter().find(|r| !r.satisfied()) {
            Some(r) => Err(Error::Invariant(format!(
                "constraint {} = {} exceeds cap {:?}",
                r.name, r.value, r.cap
            ))),
            None => Ok(()),
        }
    }

    pub fn residual(&self, name: &str) -> Option<&Residual> {
        self.residuals.iter().find(|r| r.name == name)
    }

    pub fn task(&self) -> TaskKind {
        match &self.predictor {
            Predictor::Augmented { model, .. } | Predictor::Single { model } => model.task(),
            Predictor::Stack { task, .. } => *task,
            Predictor::Adapted { members } => members[0].task(),
        }
    }

    /// Whether prediction needs a caller-supplied human signal per record.
    pub fn needs_human_signal(&self) -> bool {
        matches!(
            self.predictor,
            Predictor::Augmented {
                feature: HumanFeature::Signal,
                ..
            }
        )
    }

    /// Raw output (logit or value) for `row`.
    pub fn raw_score(&self, row: &[f64], human_signal: Option<f64>) -> Result<f64> {
        match &self.predictor {
            Predictor::Augmented { model, feature } => {
                let extra = match feature {
                    HumanFeature::Signal => human_signal.ok_or_else(|| {
                        Error::Coverage("augment_raw needs a human signal for every record".into())
                    })?,
                    HumanFeature::Knn { index } => index.feedback(row)?,
                    HumanFeature::Model { model } => model.predict(row)?.score(),
                };
                let mut augmented = row.to_vec();
                augmented.push(extra);
                model.raw_score(&augmented)
            }
            Predictor::Single { model } => model.raw_score(row),
            Predictor::Stack { machine, human, .. } => {
                let mut outputs = Vec::with_capacity(machine.len() + human.len());
                for m in machine.iter().chain(human) {
                    outputs.push(m.raw_score(row)?);
                }
                Ok(ensemble::combine(self.symbiotic_params.values(), &outputs))
            }
            Predictor::Adapted { members } => {
                let mut total = 0.0;
                for m in members {
                    total += m.raw_score(row)?;
                }
                Ok(total / members.len() as f64)
            }
        }
    }

    pub fn predict(&self, row: &[f64], human_signal: Option<f64>) -> Result<Prediction> {
        let out = self.raw_score(row, human_signal)?;
        Ok(prediction_from_output(self.task(), out))
    }

    pub fn predict_dataset(&self, ds: &LabeledDataset, human_signals: Option<&[f64]>) -> Result<Vec<Prediction>> {
        if let Some(s) = human_signals {
            if s.len() < ds.n_records() {
                return Err(Error::Coverage(format!(
                    "{} human signals for {} records",
                    s.len(),
                    ds.n_records()
                )));
            }
        }
        (0..ds.n_records())
            .map(|i| self.predict(ds.row(i), human_signals.map(|s| s[i])))
            .collect()
    }

    /// Snapshot schema `{kind, segments, values, metadata}` with the
    /// symbiotic parameters as values and a provenance block in metadata.
    pub fn snapshot(&self) -> Result<ModelSnapshot> {
        let metadata = serde_json::json!({
            "provenance": self.provenance,
            "residuals": self.residuals,
            "predictor": self.predictor,
        });
        Ok(ModelSnapshot::new("centaur", &self.symbiotic_params, metadata))
    }

    pub fn from_snapshot(snapshot: &ModelSnapshot) -> Result<Self> {
        snapshot.expect_kind("centaur")?;
        Ok(Self {
            symbiotic_params: snapshot.params()?,
            predictor: snapshot.field("predictor")?,
            residuals: snapshot.field("residuals")?,
            provenance: snapshot.field("provenance")?,
        })
    }
}

pub(crate) fn model_hash(model: &FittedModel) -> String {
    let json = serde_json::to_string(&model.snapshot()).unwrap_or_default();
    sha256_hex(json.as_bytes())
}
