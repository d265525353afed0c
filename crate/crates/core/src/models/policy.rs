use serde::{Deserialize, Serialize};

use super::ModelSnapshot;
use crate::numerics::{dot, gradient_descent, softmax, DescentOptions, Objective, ParamVector, SplitMix64};
use crate::{Error, Result};

/// How an action becomes the candidate vector a reward model scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateEncoding {
    /// The action's profile vector, independent of context.
    Profile,
    /// Elementwise product of context and profile, so an action's effect
    /// depends on the situation it is taken in.
    Modulated,
}

/// A finite, named set of discrete outputs with their candidate encodings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSet {
    names: Vec<String>,
    profiles: Vec<Vec<f64>>,
    encoding: CandidateEncoding,
}

impl ActionSet {
    pub fn new(names: Vec<String>, profiles: Vec<Vec<f64>>, encoding: CandidateEncoding) -> Result<Self> {
        if profiles.is_empty() {
            return Err(Error::InvalidArgument("action set is empty".into()));
        }
        if names.len() != profiles.len() {
            return Err(Error::Dimension {
                expected: profiles.len(),
                got: names.len(),
            });
        }
        let dim = profiles[0].len();
        if let Some(p) = profiles.iter().find(|p| p.len() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: p.len(),
            });
        }
        if profiles.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("action profiles must be finite".into()));
        }
        for i in 0..profiles.len() {
            for j in 0..i {
                if profiles[i] == profiles[j] {
                    return Err(Error::InvalidArgument(format!(
                        "actions {j} and {i} have identical profiles"
                    )));
                }
            }
        }
        Ok(Self {
            names,
            profiles,
            encoding,
        })
    }

    /// `m` actions encoded as one-hot vectors.
    pub fn one_hot(m: usize) -> Result<Self> {
        let profiles = (0..m)
            .map(|a| (0..m).map(|b| if a == b { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(default_names(m), profiles, CandidateEncoding::Profile)
    }

    /// `m` context-modulated actions whose effect profiles are standard
    /// normal draws of length `dim`.
    pub fn random_modulated(m: usize, dim: usize, seed: u64) -> Result<Self> {
        let mut rng = SplitMix64::for_stream(seed, "action-profiles");
        let profiles = (0..m).map(|_| (0..dim).map(|_| rng.normal()).collect()).collect();
        Self::new(default_names(m), profiles, CandidateEncoding::Modulated)
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn profiles(&self) -> &[Vec<f64>] {
        &self.profiles
    }

    pub fn encoding(&self) -> CandidateEncoding {
        self.encoding
    }

    pub fn candidate_dim(&self) -> usize {
        self.profiles[0].len()
    }

    /// Candidate vector of action `a` in context `x`.
    pub fn encode(&self, x: &[f64], a: usize) -> Result<Vec<f64>> {
        let p = self
            .profiles
            .get(a)
            .ok_or_else(|| Error::InvalidArgument(format!("action {a} out of range")))?;
        Ok(match self.encoding {
            CandidateEncoding::Profile => p.clone(),
            CandidateEncoding::Modulated => {
                if x.len() != p.len() {
                    return Err(Error::Dimension {
                        expected: p.len(),
                        got: x.len(),
                    });
                }
                x.iter().zip(p).map(|(a, b)| a * b).collect()
            }
        })
    }
}

fn default_names(m: usize) -> Vec<String> {
    (0..m).map(|a| format!("action_{a}")).collect()
}

/// `pi(a | x) = softmax_a(weights[a] . x + bias[a])`.
///
/// Segments: `weights` (row-major, `m x context_dim`) and `bias` (`m`).
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxPolicy {
    actions: ActionSet,
    context_dim: usize,
    params: ParamVector,
}

impl SoftmaxPolicy {
    pub fn layout(m: usize, context_dim: usize) -> [(&'static str, usize); 2] {
        [("weights", m * context_dim), ("bias", m)]
    }

    /// The uniform policy.
    pub fn zeros(actions: ActionSet, context_dim: usize) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::InvalidArgument("action set is empty".into()));
        }
        let params = ParamVector::zeros(&Self::layout(actions.len(), context_dim));
        Ok(Self {
            actions,
            context_dim,
            params,
        })
    }

    pub fn with_params(&self, params: ParamVector) -> Result<Self> {
        if params.segments() != self.params.segments() {
            return Err(Error::InvalidArgument("policy parameter layout mismatch".into()));
        }
        Ok(Self {
            actions: self.actions.clone(),
            context_dim: self.context_dim,
            params,
        })
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.params.len() {
            return Err(Error::Dimension {
                expected: self.params.len(),
                got: values.len(),
            });
        }
        self.with_params(self.params.with_values(values))
    }

    pub fn actions(&self) -> &ActionSet {
        &self.actions
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn context_dim(&self) -> usize {
        self.context_dim
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.context_dim {
            return Err(Error::Dimension {
                expected: self.context_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Action scores under raw parameter values of this policy's layout.
    pub fn scores_with(&self, theta: &[f64], x: &[f64]) -> Vec<f64> {
        let d = self.context_dim;
        let m = self.actions.len();
        (0..m)
            .map(|a| dot(&theta[a * d..(a + 1) * d], x) + theta[m * d + a])
            .collect()
    }

    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(self.scores_with(self.params.values(), x))
    }

    pub fn distribution(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.scores(x)?))
    }

    /// Most probable action; ties go to the lower index.
    pub fn argmax(&self, x: &[f64]) -> Result<usize> {
        let s = self.scores(x)?;
        Ok(argmax(&s))
    }

    /// `grad += sum_a dscores[a] * d(score_a)/d(theta)` at context `x`.
    pub fn accumulate_score_gradient(&self, x: &[f64], dscores: &[f64], grad: &mut [f64]) {
        let d = self.context_dim;
        let m = self.actions.len();
        for (a, &ds) in dscores.iter().enumerate() {
            for (g, xi) in grad[a * d..(a + 1) * d].iter_mut().zip(x) {
                *g += ds * xi;
            }
            grad[m * d + a] += ds;
        }
    }

    pub fn snapshot(&self) -> ModelSnapshot {
        let metadata = serde_json::json!({
            "actions": self.actions,
            "context_dim": self.context_dim,
        });
        ModelSnapshot::new("softmax_policy", &self.params, metadata)
    }

    pub fn from_snapshot(snapshot: &ModelSnapshot) -> Result<Self> {
        snapshot.expect_kind("softmax_policy")?;
        let policy = Self::zeros(snapshot.field("actions")?, snapshot.field("context_dim")?)?;
        policy.with_params(snapshot.params()?)
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn policy_distribution(policy: &SoftmaxPolicy, x: &[f64]) -> Result<Vec<f64>> {
    policy.distribution(x)
}

/// Mean negative log-likelihood of logged actions plus `0.5 * l2 * |weights|^2`.
pub struct ImitationObjective<'a> {
    template: &'a SoftmaxPolicy,
    contexts: &'a [Vec<f64>],
    taken: &'a [usize],
    l2_reg: f64,
}

impl<'a> ImitationObjective<'a> {
    pub fn new(template: &'a SoftmaxPolicy, contexts: &'a [Vec<f64>], taken: &'a [usize], l2_reg: f64) -> Result<Self> {
        if contexts.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if contexts.len() != taken.len() {
            return Err(Error::Dimension {
                expected: contexts.len(),
                got: taken.len(),
            });
        }
        for x in contexts {
            template.check(x)?;
        }
        if let Some(&a) = taken.iter().find(|&&a| a >= template.n_actions()) {
            return Err(Error::InvalidArgument(format!("logged action {a} out of range")));
        }
        Ok(Self {
            template,
            contexts,
            taken,
            l2_reg,
        })
    }
}

impl Objective for ImitationObjective<'_> {
    fn value_and_gradient(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let n = self.contexts.len() as f64;
        let mut total = 0.0;
        for (x, &a) in self.contexts.iter().zip(self.taken) {
            let mut pi = softmax(&self.template.scores_with(theta, x));
            total -= pi[a].ln();
            pi[a] -= 1.0;
            for p in &mut pi {
                *p /= n;
            }
            self.template.accumulate_score_gradient(x, &pi, grad);
        }
        let w = self.template.n_actions() * self.template.context_dim;
        let mut penalty = 0.0;
        for i in 0..w {
            penalty += theta[i] * theta[i];
            grad[i] += self.l2_reg * theta[i];
        }
        total / n + 0.5 * self.l2_reg * penalty
    }
}

/// Softmax regression of logged actions on their contexts.
pub fn fit_behavior_policy(
    actions: ActionSet,
    contexts: &[Vec<f64>],
    taken: &[usize],
    l2_reg: f64,
    opts: &DescentOptions,
) -> Result<SoftmaxPolicy> {
    let dim = contexts.first().map(Vec::len).ok_or(Error::EmptyDataset)?;
    let template = SoftmaxPolicy::zeros(actions, dim)?;
    let objective = ImitationObjective::new(&template, contexts, taken, l2_reg)?;
    let params = gradient_descent(&objective, template.params(), opts)?;
    template.with_params(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_gradient, relative_error};

    #[test]
    fn zero_policy_is_uniform() {
        let p = SoftmaxPolicy::zeros(ActionSet::one_hot(4).unwrap(), 3).unwrap();
        assert_eq!(p.distribution(&[1.0, -2.0, 0.5]).unwrap(), vec![0.25; 4]);
        assert!(ActionSet::one_hot(0).is_err());
    }

    #[test]
    fn bias_shift_leaves_distribution_unchanged() {
        let p = SoftmaxPolicy::zeros(ActionSet::one_hot(3).unwrap(), 2).unwrap();
        let p = p.with_values(vec![0.3, -0.1, 1.2, 0.4, -0.7, 0.2, 0.1, 0.2, 0.3]).unwrap();
        let mut shifted = p.params().values().to_vec();
        for b in &mut shifted[6..] {
            *b += 17.0;
        }
        let q = p.with_values(shifted).unwrap();
        let x = [0.4, -1.1];
        let (a, b) = (p.distribution(&x).unwrap(), q.distribution(&x).unwrap());
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() <= 1e-12);
        }
    }

    #[test]
    fn modulated_encoding_multiplies_context() {
        let set = ActionSet::new(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 2.0], vec![0.0, -1.0]],
            CandidateEncoding::Modulated,
        )
        .unwrap();
        assert_eq!(set.encode(&[3.0, 4.0], 0).unwrap(), vec![3.0, 8.0]);
        assert_eq!(set.encode(&[3.0, 4.0], 1).unwrap(), vec![0.0, -4.0]);
    }

    #[test]
    fn imitation_gradient_matches_finite_differences() {
        let mut rng = SplitMix64::new(3);
        let template = SoftmaxPolicy::zeros(ActionSet::one_hot(3).unwrap(), 2).unwrap();
        let contexts: Vec<Vec<f64>> = (0..8).map(|_| vec![rng.normal(), rng.normal()]).collect();
        let taken: Vec<usize> = (0..8).map(|i| i % 3).collect();
        let obj = ImitationObjective::new(&template, &contexts, &taken, 0.2).unwrap();
        for _ in 0..10 {
            let theta: Vec<f64> = (0..template.params().len()).map(|_| rng.normal()).collect();
            let mut grad = vec![0.0; theta.len()];
            obj.value_and_gradient(&theta, &mut grad);
            let fd = finite_diff_gradient(&|t| obj.value(t), &theta, 1e-5).unwrap();
            for (a, n) in grad.iter().zip(&fd) {
                assert!(relative_error(*a, *n) <= 1e-4);
            }
        }
    }

    #[test]
    fn behavior_cloning_recovers_logged_argmax() {
        let mut rng = SplitMix64::new(8);
        let contexts: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.normal(), rng.normal()]).collect();
        let taken: Vec<usize> = contexts.iter().map(|x| usize::from(x[0] > 0.0)).collect();
        let p = fit_behavior_policy(ActionSet::one_hot(2).unwrap(), &contexts, &taken, 0.01, &DescentOptions::default())
            .unwrap();
        let agree = contexts.iter().zip(&taken).filter(|(x, a)| p.argmax(x).unwrap() == **a).count();
        assert!(agree >= 190, "{agree}");
    }
}
