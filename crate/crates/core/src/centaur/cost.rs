use serde::{Deserialize, Serialize};

use super::{CentaurFitOptions, CentaurModel, CentaurSpec, Predictor, Residual};
use crate::datasets::{sha256_hex, HumanSignalDataset, LabeledDataset};
use crate::models::{add_l2, untrained_model, validate_labels, Architecture, SupervisedObjective};
use crate::numerics::{minimize, Objective};
use crate::{Error, Result};

/// Smoothing in `|g| ~ sqrt(g^2 + eps^2)` so importance is differentiable
/// at zero gradients.
const ABS_EPS: f64 = 1e-6;

/// Transform applied to a signal before comparing human and model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostTransform {
    #[default]
    Identity,
    /// Normalized mean absolute input-gradient of the model output.
    GradientImportance,
}

/// Distance between the transformed human and model signals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentLoss {
    /// The task loss, with human decisions as targets.
    #[default]
    TaskLoss,
    SquaredDistance,
}

/// What the human side supplies to the alignment term.
#[derive(Debug, Clone, Copy)]
pub enum CostTarget<'a> {
    /// One human decision per d_data record, aligned by index.
    Decisions(&'a HumanSignalDataset),
    /// A nonnegative importance weight per model input column.
    Importance(&'a [f64]),
}

pub(crate) fn check_kinds(f1: CostTransform, f2: CostTransform, l2: AlignmentLoss) -> Result<()> {
    use AlignmentLoss::*;
    use CostTransform::*;
    match (f1, f2, l2) {
        (Identity, Identity, TaskLoss) | (Identity, GradientImportance, SquaredDistance) => Ok(()),
        _ => Err(Error::Unsupported(format!(
            "constrained cost with f1={f1:?}, f2={f2:?}, l2={l2:?}"
        ))),
    }
}

fn smooth_abs(g: f64) -> f64 {
    (g * g + ABS_EPS * ABS_EPS).sqrt()
}

/// Normalized mean absolute input-gradient of the output over prepared inputs.
pub fn importance_profile(arch: &Architecture, theta: &[f64], inputs: &[f64]) -> Vec<f64> {
    let d = arch.inputs();
    let mut m = vec![0.0; d];
    for x in inputs.chunks_exact(d.max(1)) {
        for (mj, g) in m.iter_mut().zip(arch.input_gradient(theta, x)) {
            *mj += smooth_abs(g);
        }
    }
    let total: f64 = m.iter().sum();
    m.iter().map(|v| v / total).collect()
}

/// `|importance(theta) - target|^2` over prepared inputs.
#[derive(Debug, Clone)]
pub struct ImportanceObjective {
    arch: Architecture,
    inputs: Vec<f64>,
    target: Vec<f64>,
}

impl ImportanceObjective {
    pub fn new(arch: Architecture, inputs: Vec<f64>, target: &[f64]) -> Result<Self> {
        let d = arch.inputs();
        if target.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: target.len(),
            });
        }
        let total: f64 = target.iter().sum();
        if target.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) || !(total > 0.0) {
            return Err(Error::InvalidArgument(
                "importance target must be nonnegative with positive sum".into(),
            ));
        }
        if inputs.is_empty() || !inputs.len().is_multiple_of(d.max(1)) {
            return Err(Error::EmptyDataset);
        }
        Ok(Self {
            arch,
            inputs,
            target: target.iter().map(|t| t / total).collect(),
        })
    }

    /// Adds `scale * d(value)/d(theta)` into `grad` and returns `scale * value`.
    pub fn accumulate(&self, theta: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
        let d = self.arch.inputs();
        let n = (self.inputs.len() / d) as f64;
        let grads: Vec<Vec<f64>> = self
            .inputs
            .chunks_exact(d)
            .map(|x| self.arch.input_gradient(theta, x))
            .collect();
        let mut m = vec![0.0; d];
        for g in &grads {
            for (mj, gj) in m.iter_mut().zip(g) {
                *mj += smooth_abs(*gj) / n;
            }
        }
        let s: f64 = m.iter().sum();
        let imp: Vec<f64> = m.iter().map(|v| v / s).collect();
        let r: Vec<f64> = imp.iter().zip(&self.target).map(|(i, t)| 2.0 * (i - t)).collect();
        let value: f64 = imp.iter().zip(&self.target).map(|(i, t)| (i - t) * (i - t)).sum();
        let ri: f64 = r.iter().zip(&imp).map(|(a, b)| a * b).sum();
        let c: Vec<f64> = r.iter().map(|rl| (rl - ri) / s).collect();
        let mut coeffs = vec![0.0; d];
        for (x, g) in self.inputs.chunks_exact(d).zip(&grads) {
            for l in 0..d {
                coeffs[l] = scale * c[l] * g[l] / smooth_abs(g[l]) / n;
            }
            self.arch.accumulate_input_gradient_jacobian(theta, x, &coeffs, grad);
        }
        scale * value
    }
}

impl Objective for ImportanceObjective {
    fn value_and_gradient(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        self.accumulate(theta, 1.0, grad)
    }
}

enum Alignment {
    Decisions(SupervisedObjective),
    Importance(ImportanceObjective),
}

/// `(l1 + lambda * l2) / (1 + lambda)` plus weight decay. Dividing by
/// `1 + lambda` keeps the minimizer and keeps the step size meaningful for
/// large lambda.
pub(crate) struct ConstrainedObjective {
    data: SupervisedObjective,
    alignment: Alignment,
    lambda: f64,
    l2_reg: f64,
}

impl ConstrainedObjective {
    pub(crate) fn with_decisions(data: SupervisedObjective, human: SupervisedObjective, lambda: f64, l2_reg: f64) -> Self {
        Self {
            data,
            alignment: Alignment::Decisions(human),
            lambda,
            l2_reg,
        }
    }

    pub(crate) fn with_importance(data: SupervisedObjective, target: ImportanceObjective, lambda: f64, l2_reg: f64) -> Self {
        Self {
            data,
            alignment: Alignment::Importance(target),
            lambda,
            l2_reg,
        }
    }

    fn alignment_value(&self, theta: &[f64]) -> f64 {
        match &self.alignment {
            Alignment::Decisions(h) => h.data_loss(theta),
            Alignment::Importance(i) => i.value(theta),
        }
    }
}

impl Objective for ConstrainedObjective {
    fn value_and_gradient(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let w1 = 1.0 / (1.0 + self.lambda);
        let w2 = self.lambda / (1.0 + self.lambda);
        let mut value = self.data.accumulate_data_term(theta, w1, grad);
        value += match &self.alignment {
            Alignment::Decisions(h) => h.accumulate_data_term(theta, w2, grad),
            Alignment::Importance(i) => i.accumulate(theta, w2, grad),
        };
        value + add_l2(&self.data.arch(), self.l2_reg, theta, grad)
    }
}

/// Minimizes `mean l1(y, h(x)) + lambda * l2(f1(human), f2(h))`, rescaled by
/// `1 / (1 + lambda)`.
///
/// Supported: identity transforms with the task loss against per-record
/// human decisions, and identity/gradient-importance with squared distance
/// between normalized importance profiles.
pub fn fit_constrained_cost(
    d_data: &LabeledDataset,
    target: CostTarget<'_>,
    lambda: f64,
    f1: CostTransform,
    f2: CostTransform,
    l2: AlignmentLoss,
    opts: &CentaurFitOptions,
) -> Result<CentaurModel> {
    let spec = CentaurSpec::ConstrainedCost { lambda, f1, f2, l2 };
    spec.validate()?;
    opts.fit.validate()?;
    let untrained = untrained_model(d_data, opts.machine_columns.as_deref(), &opts.fit)?;
    let data = untrained.objective(d_data, 0.0)?;
    let (alignment, human_hash) = match (target, f2) {
        (CostTarget::Decisions(d_human), CostTransform::Identity) => {
            let labeled = d_human.require_labeled("constrained_cost")?;
            if labeled.n_records() < d_data.n_records() {
                return Err(Error::Coverage(format!(
                    "{} human decisions for {} records",
                    labeled.n_records(),
                    d_data.n_records()
                )));
            }
            let human = d_data.with_labels(labeled.labels()[..d_data.n_records()].to_vec())?;
            validate_labels(&human, opts.fit.task)?;
            (
                Alignment::Decisions(untrained.objective(&human, 0.0)?),
                d_human.content_hash(),
            )
        }
        (CostTarget::Importance(profile), CostTransform::GradientImportance) => {
            let inputs = untrained.prepare_dataset(d_data)?;
            let bits: Vec<u8> = profile.iter().flat_map(|v| v.to_bits().to_le_bytes()).collect();
            (
                Alignment::Importance(ImportanceObjective::new(untrained.arch(), inputs, profile)?),
                sha256_hex(&bits),
            )
        }
        _ => {
            return Err(Error::Unsupported(
                "human target does not match the f2 transform".into(),
            ))
        }
    };
    let objective = ConstrainedObjective {
        data,
        alignment,
        lambda,
        l2_reg: opts.fit.l2_reg,
    };
    let outcome = minimize(&objective, untrained.params(), None, &opts.fit.descent)?;
    let model = untrained.with_params(outcome.params.into_values())?;
    let alignment_value = objective.alignment_value(model.params().values());
    CentaurModel::build(
        &spec,
        model.params().clone(),
        Predictor::Single { model },
        vec![Residual::new("alignment_loss", alignment_value, None)],
        d_data.content_hash(),
        human_hash,
    )
}
