use crate::centaur::Cap;
use crate::models::{RewardModel, SoftmaxPolicy};
use crate::numerics::{kl_categorical, log_softmax, minimize, project_l2_ball, DescentOptions, Objective, Projector};
use crate::{Error, Result};

/// The KL-regularized policy objective, with the expectation over actions
/// computed by exact enumeration:
///
/// `J(pi) = mean_x [ sum_a pi(a|x) * s * r(x, a) - beta * KL(pi(.|x) || ref(.|x)) ]`
///
/// where `s` is the reward scale (1 unless set).
#[derive(Debug, Clone)]
pub struct PolicyObjective {
    reference: SoftmaxPolicy,
    contexts: Vec<Vec<f64>>,
    rewards: Vec<Vec<f64>>,
    ref_log: Vec<Vec<f64>>,
    beta: f64,
    reward_scale: f64,
}

impl PolicyObjective {
    /// Scores every action in every context with `reward_model`.
    pub fn new(
        reward_model: &RewardModel,
        reference: &SoftmaxPolicy,
        beta: f64,
        contexts: &[Vec<f64>],
    ) -> Result<Self> {
        let actions = reference.actions();
        let mut rewards = Vec::with_capacity(contexts.len());
        for x in contexts {
            let row = (0..actions.len())
                .map(|a| reward_model.score(x, &actions.encode(x, a)?))
                .collect::<Result<Vec<_>>>()?;
            rewards.push(row);
        }
        Self::from_rewards(reference, beta, contexts, rewards)
    }

    /// Uses an explicit `contexts x actions` reward table.
    pub fn from_rewards(
        reference: &SoftmaxPolicy,
        beta: f64,
        contexts: &[Vec<f64>],
        rewards: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::Config(format!("beta must be finite and nonnegative, got {beta}")));
        }
        if contexts.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if rewards.len() != contexts.len() {
            return Err(Error::Dimension {
                expected: contexts.len(),
                got: rewards.len(),
            });
        }
        let m = reference.n_actions();
        for row in &rewards {
            if row.len() != m {
                return Err(Error::Dimension {
                    expected: m,
                    got: row.len(),
                });
            }
            if row.iter().any(|r| !r.is_finite()) {
                return Err(Error::InvalidArgument("non-finite reward".into()));
            }
        }
        let ref_log = contexts
            .iter()
            .map(|x| Ok(log_softmax(&reference.scores(x)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            reference: reference.clone(),
            contexts: contexts.to_vec(),
            rewards,
            ref_log,
            beta,
            reward_scale: 1.0,
        })
    }

    pub fn with_reward_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::Config(format!("reward scale must be finite and nonnegative, got {scale}")));
        }
        self.reward_scale = scale;
        Ok(self)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn contexts(&self) -> &[Vec<f64>] {
        &self.contexts
    }

    pub fn reference(&self) -> &SoftmaxPolicy {
        &self.reference
    }

    pub fn rewards(&self) -> &[Vec<f64>] {
        &self.rewards
    }

    /// The minimized form is `-J / max(1, beta)`; the rescaling keeps the
    /// maximizer and a usable step size for large beta.
    fn scale(&self) -> f64 {
        self.beta.max(1.0)
    }

    /// `J` at raw policy parameters, adding `dscale * dJ/dtheta` into `grad`.
    fn accumulate(&self, theta: &[f64], dscale: f64, grad: &mut [f64]) -> f64 {
        let n = self.contexts.len() as f64;
        let mut total = 0.0;
        for ((x, r), lr) in self.contexts.iter().zip(&self.rewards).zip(&self.ref_log) {
            let lp = log_softmax(&self.reference.scores_with(theta, x));
            let pi: Vec<f64> = lp.iter().map(|v| v.exp()).collect();
            let f: Vec<f64> = (0..pi.len())
                .map(|a| self.reward_scale * r[a] - self.beta * (lp[a] - lr[a]))
                .collect();
            let jx: f64 = pi.iter().zip(&f).map(|(p, v)| p * v).sum();
            total += jx;
            let ds: Vec<f64> = pi.iter().zip(&f).map(|(p, v)| dscale * p * (v - jx) / n).collect();
            self.reference.accumulate_score_gradient(x, &ds, grad);
        }
        total / n
    }

    /// The objective value `J` of `policy`.
    pub fn value_of(&self, policy: &SoftmaxPolicy) -> f64 {
        let mut scratch = vec![0.0; policy.params().len()];
        self.accumulate(policy.params().values(), 0.0, &mut scratch)
    }
}

impl Objective for PolicyObjective {
    fn value_and_gradient(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let s = self.scale();
        -self.accumulate(theta, -1.0 / s, grad) / s
    }
}

/// Result of [`optimize_policy`].
#[derive(Debug, Clone)]
pub struct PolicyOutcome {
    pub policy: SoftmaxPolicy,
    /// `J` at the returned policy.
    pub objective: f64,
    /// `J` at every accepted iterate; non-decreasing.
    pub history: Vec<f64>,
}

/// Maximizes the policy objective from `init`.
pub fn optimize_policy(obj: &PolicyObjective, init: &SoftmaxPolicy, opts: &DescentOptions) -> Result<PolicyOutcome> {
    optimize_policy_within(obj, init, None, opts)
}

/// Like [`optimize_policy`], keeping the parameters inside an L2 ball of
/// radius `c1` around the reference policy's parameters.
pub fn optimize_policy_within(
    obj: &PolicyObjective,
    init: &SoftmaxPolicy,
    c1: Cap,
    opts: &DescentOptions,
) -> Result<PolicyOutcome> {
    if init.actions() != obj.reference.actions() || init.context_dim() != obj.reference.context_dim() {
        return Err(Error::InvalidArgument(
            "policy and reference have mismatched action sets".into(),
        ));
    }
    crate::centaur::check_cap("c1", c1)?;
    let center = obj.reference.params().values().to_vec();
    let radius = c1.unwrap_or(f64::INFINITY);
    let ball = |theta: &mut [f64]| project_l2_ball(theta, &center, radius);
    let projector: Option<&dyn Projector> = if c1.is_some() { Some(&ball) } else { None };
    let outcome = minimize(obj, init.params(), projector, opts)?;
    let s = obj.scale();
    let policy = init.with_params(outcome.params)?;
    Ok(PolicyOutcome {
        objective: obj.value_of(&policy),
        history: outcome.history.iter().map(|v| -v * s).collect(),
        policy,
    })
}

/// Mean `KL(policy || reference)` over `contexts`.
pub fn mean_kl(policy: &SoftmaxPolicy, reference: &SoftmaxPolicy, contexts: &[Vec<f64>]) -> Result<f64> {
    if contexts.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for x in contexts {
        total += kl_categorical(&policy.distribution(x)?, &reference.distribution(x)?)?;
    }
    Ok(total / contexts.len() as f64)
}
