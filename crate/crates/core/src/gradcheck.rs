//! Registry of every shipped differentiable objective, each checked against
//! central finite differences at seeded random points.

use serde::{Deserialize, Serialize};

use crate::centaur::{ConstrainedObjective, ImportanceObjective, StackObjective};
use crate::constants::{FD_STEP, GRAD_CHECK_THRESHOLD};
use crate::datasets::PreferenceTriplet;
use crate::models::{ActionSet, ImitationObjective, Loss, ModelKind, RewardModel, SoftmaxPolicy, SupervisedObjective};
use crate::numerics::{derive_seed, grad_check, stream_id, Objective, SplitMix64};
use crate::rewards::{PolicyObjective, TripletObjective};
use crate::{Error, Result};

/// Random evaluation points per objective.
pub const POINTS_PER_OBJECTIVE: usize = 10;

/// Master seed of the registry's fixed problems and evaluation points.
pub const GRADCHECK_SEED: u64 = 20_240_501;

const N_RECORDS: usize = 12;
const DIM: usize = 3;
const HIDDEN: usize = 4;

/// Builds an objective and its parameter dimension from a fixed problem seed.
pub type Builder = fn(u64) -> Result<(Box<dyn Objective>, usize)>;

#[derive(Clone, Copy)]
pub struct GradCheckCase {
    pub name: &'static str,
    pub build: Builder,
}

impl std::fmt::Debug for GradCheckCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GradCheckCase").field("name", &self.name).finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveCheck {
    pub name: String,
    pub n_params: usize,
    pub points: usize,
    pub max_rel_error: f64,
    /// Point index and coordinate of the worst error.
    pub worst_point: usize,
    pub worst_index: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckSummary {
    pub threshold: f64,
    pub checks: Vec<ObjectiveCheck>,
    pub passed: bool,
}

impl GradCheckSummary {
    pub fn worst(&self) -> Option<&ObjectiveCheck> {
        self.checks
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }
}

fn normals(rng: &mut SplitMix64, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.normal()).collect()
}

fn regression_data(seed: u64, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rng = SplitMix64::for_stream(seed, "gradcheck-data");
    let inputs = normals(&mut rng, N_RECORDS * dim);
    let targets = normals(&mut rng, N_RECORDS);
    (inputs, targets)
}

fn binary_data(seed: u64, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let (inputs, raw) = regression_data(seed, dim);
    (inputs, raw.iter().map(|t| if *t >= 0.0 { 1.0 } else { 0.0 }).collect())
}

fn supervised(kind: ModelKind, loss: Loss, seed: u64) -> Result<(Box<dyn Objective>, usize)> {
    let arch = kind.architecture(DIM);
    let (inputs, targets) = match loss {
        Loss::Logistic => binary_data(seed, DIM),
        Loss::Squared => regression_data(seed, DIM),
    };
    let obj = SupervisedObjective::new(arch, inputs, targets, loss, 0.05)?;
    Ok((Box::new(obj), arch.n_params()))
}

fn triplets(seed: u64, ctx: usize, cand: usize) -> Result<Vec<PreferenceTriplet>> {
    let mut rng = SplitMix64::for_stream(seed, "gradcheck-triplets");
    (0..N_RECORDS)
        .map(|_| PreferenceTriplet::new(normals(&mut rng, ctx), normals(&mut rng, cand), normals(&mut rng, cand)))
        .collect()
}

fn reward(kind: ModelKind, seed: u64) -> Result<(Box<dyn Objective>, usize)> {
    let template = RewardModel::new(kind, DIM, DIM, seed);
    let obj = TripletObjective::new(&template, &triplets(seed, DIM, DIM)?, 0.05)?;
    Ok((Box::new(obj), template.arch().n_params()))
}

fn policy(beta: f64, seed: u64) -> Result<(Box<dyn Objective>, usize)> {
    let actions = ActionSet::random_modulated(4, DIM, derive_seed(seed, stream_id("actions")))?;
    let mut rng = SplitMix64::for_stream(seed, "gradcheck-policy");
    let zeros = SoftmaxPolicy::zeros(actions, DIM)?;
    let n = zeros.params().len();
    let reference = zeros.with_values(normals(&mut rng, n))?;
    let contexts: Vec<Vec<f64>> = (0..N_RECORDS).map(|_| normals(&mut rng, DIM)).collect();
    let rewards: Vec<Vec<f64>> = (0..N_RECORDS).map(|_| normals(&mut rng, 4)).collect();
    let obj = PolicyObjective::from_rewards(&reference, beta, &contexts, rewards)?;
    Ok((Box::new(obj), n))
}

/// Owns the data the borrowing imitation objective points into.
struct OwnedImitation {
    template: SoftmaxPolicy,
    contexts: Vec<Vec<f64>>,
    taken: Vec<usize>,
}

impl Objective for OwnedImitation {
    fn value_and_gradient(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        ImitationObjective::new(&self.template, &self.contexts, &self.taken, 0.05)
            .expect("validated at construction")
            .value_and_gradient(theta, grad)
    }
}

fn imitation(seed: u64) -> Result<(Box<dyn Objective>, usize)> {
    let actions = ActionSet::random_modulated(4, DIM, derive_seed(seed, stream_id("actions")))?;
    let mut rng = SplitMix64::for_stream(seed, "gradcheck-imitation");
    let template = SoftmaxPolicy::zeros(actions, DIM)?;
    let contexts: Vec<Vec<f64>> = (0..N_RECORDS).map(|_| normals(&mut rng, DIM)).collect();
    let taken: Vec<usize> = (0..N_RECORDS).map(|_| rng.below(4)).collect();
    ImitationObjective::new(&template, &contexts, &taken, 0.05)?;
    let n = template.params().len();
    Ok((Box::new(OwnedImitation { template, contexts, taken }), n))
}

fn importance(kind: ModelKind, seed: u64) -> Result<ImportanceObjective> {
    let arch = kind.architecture(DIM);
    let (inputs, _) = regression_data(seed, DIM);
    ImportanceObjective::new(arch, inputs, &[0.5, 0.3, 0.2])
}

fn constrained_decisions(seed: u64) -> Result<(Box<dyn Objective>, usize)> {
    let kind = ModelKind::Mlp { hidden: HIDDEN };
    let arch = kind.architecture(DIM);
    let (inputs, targets) = binary_data(seed, DIM);
    let (_, human) = binary_data(derive_seed(seed, 1), DIM);
    let data = SupervisedObjective::new(arch, inputs.clone(), targets, Loss::Logistic, 0.0)?;
    let human = SupervisedObjective::new(arch, inputs, human, Loss::Logistic, 0.0)?;
    let obj = ConstrainedObjective::with_decisions(data, human, 2.0, 0.05);
    Ok((Box::new(obj), arch.n_params()))
}

fn constrained_importance(seed: u64) -> Result<(Box<dyn Objective>, usize)> {
    let kind = ModelKind::Mlp { hidden: HIDDEN };
    let arch = kind.architecture(DIM);
    let (inputs, targets) = binary_data(seed, DIM);
    let data = SupervisedObjective::new(arch, inputs, targets, Loss::Logistic, 0.0)?;
    let obj = ConstrainedObjective::with_importance(data, importance(kind, seed)?, 2.0, 0.05);
    Ok((Box::new(obj), arch.n_params()))
}

fn stack(seed: u64) -> Result<(Box<dyn Objective>, usize)> {
    let members = 3;
    let (outputs, targets) = binary_data(seed, members);
    let obj = StackObjective::new(outputs, members, targets, Loss::Logistic)?;
    Ok((Box::new(obj), members + 1))
}

/// Every analytic gradient shipped by the crate.
pub fn registry() -> Vec<GradCheckCase> {
    const MLP: ModelKind = ModelKind::Mlp { hidden: HIDDEN };
    vec![
        GradCheckCase { name: "logistic_linear", build: |s| supervised(ModelKind::Linear, Loss::Logistic, s) },
        GradCheckCase { name: "squared_linear", build: |s| supervised(ModelKind::Linear, Loss::Squared, s) },
        GradCheckCase { name: "logistic_mlp", build: |s| supervised(MLP, Loss::Logistic, s) },
        GradCheckCase { name: "squared_mlp", build: |s| supervised(MLP, Loss::Squared, s) },
        GradCheckCase { name: "reward_triplet_linear", build: |s| reward(ModelKind::Linear, s) },
        GradCheckCase { name: "reward_triplet_mlp", build: |s| reward(MLP, s) },
        GradCheckCase { name: "policy_kl_regularized", build: |s| policy(0.5, s) },
        GradCheckCase { name: "policy_reward_only", build: |s| policy(0.0, s) },
        GradCheckCase { name: "behavior_imitation", build: imitation },
        GradCheckCase {
            name: "importance_linear",
            build: |s| Ok((Box::new(importance(ModelKind::Linear, s)?), ModelKind::Linear.architecture(DIM).n_params())),
        },
        GradCheckCase {
            name: "importance_mlp",
            build: |s| Ok((Box::new(importance(MLP, s)?), MLP.architecture(DIM).n_params())),
        },
        GradCheckCase { name: "constrained_decisions", build: constrained_decisions },
        GradCheckCase { name: "constrained_importance", build: constrained_importance },
        GradCheckCase { name: "ensemble_stack", build: stack },
    ]
}

/// Checks one objective at `points` seeded random parameter vectors.
pub fn check_case(case: &GradCheckCase, seed: u64, points: usize, threshold: f64) -> Result<ObjectiveCheck> {
    if points == 0 {
        return Err(Error::InvalidArgument("at least one point is required".into()));
    }
    let base = derive_seed(seed, stream_id(case.name));
    let (objective, n_params) = (case.build)(base)?;
    let mut worst = (f64::NEG_INFINITY, 0, 0);
    for p in 0..points {
        let mut rng = SplitMix64::new(derive_seed(base, p as u64 + 1));
        let at: Vec<f64> = (0..n_params).map(|_| 0.7 * rng.normal()).collect();
        let report = grad_check(objective.as_ref(), &at, FD_STEP, threshold)?;
        if !(report.max_rel_error <= worst.0) {
            worst = (report.max_rel_error, p, report.worst_index);
        }
    }
    Ok(ObjectiveCheck {
        name: case.name.to_string(),
        n_params,
        points,
        max_rel_error: worst.0,
        worst_point: worst.1,
        worst_index: worst.2,
        passed: worst.0 <= threshold,
    })
}

pub fn run_cases(cases: &[GradCheckCase], seed: u64, points: usize, threshold: f64) -> Result<GradCheckSummary> {
    let checks = cases
        .iter()
        .map(|c| check_case(c, seed, points, threshold))
        .collect::<Result<Vec<_>>>()?;
    let passed = checks.iter().all(|c| c.passed);
    Ok(GradCheckSummary {
        threshold,
        checks,
        passed,
    })
}

/// The full registry at the default seed, point count and threshold.
pub fn run_registry() -> Result<GradCheckSummary> {
    run_cases(&registry(), GRADCHECK_SEED, POINTS_PER_OBJECTIVE, GRAD_CHECK_THRESHOLD)
}
