use serde::{Deserialize, Serialize};

use crate::datasets::PreferenceTriplet;
use crate::models::{add_l2, Architecture, ModelKind, RewardModel};
use crate::numerics::{minimize, sigmoid, softplus, DescentOptions, Objective, Projector};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardFitOptions {
    #[serde(default = "default_kind")]
    pub model_kind: ModelKind,
    #[serde(default)]
    pub l2_reg: f64,
    #[serde(default)]
    pub descent: DescentOptions,
}

fn default_kind() -> ModelKind {
    ModelKind::Linear
}

impl Default for RewardFitOptions {
    fn default() -> Self {
        Self {
            model_kind: ModelKind::Linear,
            l2_reg: 0.0,
            descent: DescentOptions::default(),
        }
    }
}

impl RewardFitOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.l2_reg >= 0.0 && self.l2_reg.is_finite()) {
            return Err(Error::Config("reward l2_reg must be finite and nonnegative".into()));
        }
        if let ModelKind::Mlp { hidden: 0 } = self.model_kind {
            return Err(Error::Config("mlp hidden width must be positive".into()));
        }
        self.descent.validate()
    }
}

/// Mean Bradley-Terry loss `-ln sigmoid(r(x, y+) - r(x, y-))` over triplets,
/// plus `0.5 * l2 * |weights|^2`.
#[derive(Debug, Clone)]
pub struct TripletObjective {
    arch: Architecture,
    preferred: Vec<f64>,
    rejected: Vec<f64>,
    n: usize,
    l2_reg: f64,
}

impl TripletObjective {
    pub fn new(template: &RewardModel, triplets: &[PreferenceTriplet], l2_reg: f64) -> Result<Self> {
        if triplets.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut preferred = Vec::new();
        let mut rejected = Vec::new();
        for t in triplets {
            preferred.extend(template.encode(&t.context, &t.preferred)?);
            rejected.extend(template.encode(&t.context, &t.rejected)?);
        }
        Ok(Self {
            arch: template.arch(),
            preferred,
            rejected,
            n: triplets.len(),
            l2_reg,
        })
    }

    /// Mean loss without regularization.
    pub fn data_loss(&self, theta: &[f64]) -> f64 {
        let d = self.arch.inputs();
        self.preferred
            .chunks_exact(d)
            .zip(self.rejected.chunks_exact(d))
            .map(|(p, r)| softplus(-(self.arch.forward(theta, p) - self.arch.forward(theta, r))))
            .sum::<f64>()
            / self.n as f64
    }
}

impl Objective for TripletObjective {
    fn value_and_gradient(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let d = self.arch.inputs();
        let n = self.n as f64;
        let mut total = 0.0;
        for (p, r) in self.preferred.chunks_exact(d).zip(self.rejected.chunks_exact(d)) {
            let gap = self.arch.forward(theta, p) - self.arch.forward(theta, r);
            total += softplus(-gap);
            let dgap = -sigmoid(-gap) / n;
            self.arch.accumulate_gradient(theta, p, dgap, grad);
            self.arch.accumulate_gradient(theta, r, -dgap, grad);
        }
        total / n + add_l2(&self.arch, self.l2_reg, theta, grad)
    }
}

/// Fits a reward model to preference triplets from its default initialization
/// (all zeros for the linear kind).
pub fn fit_reward(triplets: &[PreferenceTriplet], opts: &RewardFitOptions) -> Result<RewardModel> {
    let first = triplets.first().ok_or(Error::EmptyDataset)?;
    let init = RewardModel::new(opts.model_kind, first.context.len(), first.preferred.len(), opts.descent.seed);
    refit_reward(&init, triplets, opts, None)
}

/// Continues fitting from `init`'s parameters, optionally projecting after
/// every step.
pub fn refit_reward(
    init: &RewardModel,
    triplets: &[PreferenceTriplet],
    opts: &RewardFitOptions,
    projector: Option<&dyn Projector>,
) -> Result<RewardModel> {
    opts.validate()?;
    let objective = TripletObjective::new(init, triplets, opts.l2_reg)?;
    let outcome = minimize(&objective, init.params(), projector, &opts.descent)?;
    init.with_params(outcome.params)
}

/// Mean unregularized triplet loss of `rm`.
pub fn reward_loss(rm: &RewardModel, triplets: &[PreferenceTriplet]) -> Result<f64> {
    Ok(TripletObjective::new(rm, triplets, 0.0)?.data_loss(rm.params().values()))
}
