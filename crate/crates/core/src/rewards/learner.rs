use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{
    mean_kl, optimize_policy_within, refit_reward, PolicyObjective, PreferenceWorld, RewardFitOptions,
};
use crate::centaur::{check_cap, Cap};
use crate::constants::LIVE_REFIT_ITERS;
use crate::datasets::{PreferenceTriplet, SimulatedHuman};
use crate::evaluation::concordance;
use crate::models::{argmax, RewardModel, SoftmaxPolicy};
use crate::numerics::{derive_seed, project_l1_ball, stream_id, DescentOptions, Projector, SplitMix64};
use crate::{Error, Result};

/// Which two actions a query compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PairSampling {
    /// The two most probable actions under the current policy.
    #[default]
    TopTwo,
    /// Two distinct actions drawn uniformly.
    Uniform,
}

/// Which pool contexts are queried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ContextSelection {
    /// Contexts whose compared pair has the smallest learned reward gap;
    /// ties go to the lower pool index.
    #[default]
    MinGap,
    /// Uniform draws without replacement.
    Random,
}

/// Knobs of the alternating reward/policy loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RlhfConfig {
    /// KL penalty weight.
    pub beta: f64,
    /// Scale on the learned reward inside the policy objective.
    pub human_weight: f64,
    /// L2 radius around the reference parameters; `None` is unconstrained.
    pub c1: Cap,
    /// L1 radius on the reward model's weights; `None` is unconstrained.
    pub importance_cap: Cap,
    pub reward: RewardFitOptions,
    pub policy_descent: DescentOptions,
    pub pair_sampling: PairSampling,
    pub context_selection: ContextSelection,
}

impl Default for RlhfConfig {
    fn default() -> Self {
        Self {
            beta: 0.1,
            human_weight: 1.0,
            c1: None,
            importance_cap: None,
            reward: RewardFitOptions {
                descent: DescentOptions::default().with_iters(LIVE_REFIT_ITERS),
                ..RewardFitOptions::default()
            },
            policy_descent: DescentOptions::default().with_iters(200),
            pair_sampling: PairSampling::TopTwo,
            context_selection: ContextSelection::MinGap,
        }
    }
}

impl RlhfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be finite and nonnegative, got {}", self.beta)));
        }
        if !(self.human_weight >= 0.0 && self.human_weight.is_finite()) {
            return Err(Error::Config(format!(
                "human_weight must be finite and nonnegative, got {}",
                self.human_weight
            )));
        }
        check_cap("c1", self.c1)?;
        check_cap("importance_cap", self.importance_cap)?;
        self.reward.validate()?;
        self.policy_descent.validate()
    }
}

/// One comparison put to the human.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub context_index: usize,
    pub first: usize,
    pub second: usize,
}

/// The human's answer to a [`Query`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    First,
    Second,
    Skip,
}

/// One line of the loop trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub round: usize,
    pub mean_reward: f64,
    pub mean_kl: f64,
    pub phi_b: f64,
    pub seed: u64,
}

/// Policy quality on a set of contexts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyMetrics {
    /// Fraction of contexts whose most probable action is the best one under
    /// the generator's full-information utility.
    pub phi_p: f64,
    /// Mean rank concordance between action probabilities and the human's
    /// utilities.
    pub phi_b: f64,
    pub mean_kl: f64,
    /// Mean learned reward under the policy.
    pub mean_reward: f64,
}

/// Scores `policy` on the world's evaluation contexts.
pub fn policy_metrics(
    world: &PreferenceWorld,
    policy: &SoftmaxPolicy,
    reward: &RewardModel,
) -> Result<PolicyMetrics> {
    let n = world.eval.len() as f64;
    let (mut hits, mut phi_b, mut mean_reward) = (0.0, 0.0, 0.0);
    for x in &world.eval {
        let pi = policy.distribution(x)?;
        if argmax(&pi) == argmax(&world.true_utilities(x)?) {
            hits += 1.0;
        }
        phi_b += concordance(&pi, &world.human_utilities(x)?)?;
        for (a, p) in pi.iter().enumerate() {
            mean_reward += p * reward.score(x, &world.actions.encode(x, a)?)?;
        }
    }
    Ok(PolicyMetrics {
        phi_p: hits / n,
        phi_b: phi_b / n,
        mean_kl: mean_kl(policy, &world.reference, &world.eval)?,
        mean_reward: mean_reward / n,
    })
}

/// World and loop seeds derived from a master seed.
pub fn preference_seeds(master: u64) -> (u64, u64) {
    (
        derive_seed(master, stream_id("preference-world")),
        derive_seed(master, stream_id("rlhf")),
    )
}

/// Seed for the simulated answer to query `j` of `round`.
pub fn oracle_seed(seed: u64, round: usize, j: usize) -> u64 {
    derive_seed(derive_seed(seed, stream_id("oracle")), ((round as u64) << 16) + j as u64)
}

/// The simulated human's answer to a query.
pub fn simulated_choice(
    human: &SimulatedHuman,
    world: &PreferenceWorld,
    query: &Query,
    seed: u64,
) -> Result<Choice> {
    let x = &world.pool[query.context_index];
    let first = world.actions.encode(x, query.first)?;
    let second = world.actions.encode(x, query.second)?;
    let mut rng = SplitMix64::new(seed);
    Ok(if human.prefers_first(&first, &second, &mut rng)? {
        Choice::First
    } else {
        Choice::Second
    })
}

/// State of the alternating loop: the reward is refitted on every triplet so
/// far (warm-started), then the policy is re-optimized from its current
/// parameters against the frozen reference.
#[derive(Debug, Clone)]
pub struct RlhfLearner {
    world: PreferenceWorld,
    config: RlhfConfig,
    reward: RewardModel,
    policy: SoftmaxPolicy,
    triplets: Vec<PreferenceTriplet>,
    round: usize,
    seed: u64,
    trace: Vec<TraceRecord>,
}

impl RlhfLearner {
    pub fn new(world: PreferenceWorld, config: RlhfConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        if world.actions.len() < 2 {
            return Err(Error::InvalidArgument("preference loop needs at least two actions".into()));
        }
        let d = world.reference.context_dim();
        let reward = RewardModel::new(
            config.reward.model_kind,
            d,
            world.actions.candidate_dim(),
            config.reward.descent.seed,
        );
        let policy = world.reference.clone();
        Ok(Self {
            world,
            config,
            reward,
            policy,
            triplets: Vec::new(),
            round: 0,
            seed,
            trace: Vec::new(),
        })
    }

    pub fn world(&self) -> &PreferenceWorld {
        &self.world
    }

    pub fn config(&self) -> &RlhfConfig {
        &self.config
    }

    /// Replaces the knobs; takes effect from the next round.
    pub fn set_config(&mut self, config: RlhfConfig) -> Result<()> {
        config.validate()?;
        if config.reward.model_kind != self.config.reward.model_kind {
            return Err(Error::Config("the reward model kind cannot change mid-loop".into()));
        }
        self.config = config;
        Ok(())
    }

    pub fn reward(&self) -> &RewardModel {
        &self.reward
    }

    pub fn policy(&self) -> &SoftmaxPolicy {
        &self.policy
    }

    pub fn triplets(&self) -> &[PreferenceTriplet] {
        &self.triplets
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn metrics(&self) -> Result<PolicyMetrics> {
        policy_metrics(&self.world, &self.policy, &self.reward)
    }

    fn pair_for(&self, index: usize, rng: &mut SplitMix64) -> Result<(usize, usize)> {
        match self.config.pair_sampling {
            PairSampling::TopTwo => {
                let pi = self.policy.distribution(&self.world.pool[index])?;
                let first = argmax(&pi);
                let mut rest = pi.clone();
                rest[first] = f64::NEG_INFINITY;
                Ok((first, argmax(&rest)))
            }
            PairSampling::Uniform => {
                let m = self.world.actions.len();
                let first = rng.below(m);
                let second = (first + 1 + rng.below(m - 1)) % m;
                Ok((first, second))
            }
        }
    }

    /// The absolute learned-reward gap between two actions in pool context `index`.
    pub fn reward_gap(&self, index: usize, first: usize, second: usize) -> Result<f64> {
        let x = &self.world.pool[index];
        let a = self.reward.score(x, &self.world.actions.encode(x, first)?)?;
        let b = self.reward.score(x, &self.world.actions.encode(x, second)?)?;
        Ok((a - b).abs())
    }

    /// The next `k` queries. Deterministic given the learner state.
    pub fn select_queries(&self, k: usize) -> Result<Vec<Query>> {
        let n = self.world.pool.len();
        if k == 0 || k > n {
            return Err(Error::InvalidArgument(format!(
                "cannot select {k} queries from a pool of {n} contexts"
            )));
        }
        let mut rng = SplitMix64::new(derive_seed(derive_seed(self.seed, stream_id("queries")), self.round as u64));
        let indices: Vec<usize> = match self.config.context_selection {
            ContextSelection::Random => {
                let mut all: Vec<usize> = (0..n).collect();
                rng.shuffle(&mut all);
                all.truncate(k);
                all
            }
            ContextSelection::MinGap => {
                let mut gaps = Vec::with_capacity(n);
                for i in 0..n {
                    let (a, b) = self.pair_for(i, &mut SplitMix64::new(0))?;
                    gaps.push((self.reward_gap(i, a, b)?, i));
                }
                gaps.sort_by(|u, v| u.0.total_cmp(&v.0).then(u.1.cmp(&v.1)));
                gaps.into_iter().take(k).map(|(_, i)| i).collect()
            }
        };
        indices
            .into_iter()
            .map(|i| {
                let (first, second) = self.pair_for(i, &mut rng)?;
                Ok(Query {
                    context_index: i,
                    first,
                    second,
                })
            })
            .collect()
    }

    /// Adds the answered queries as triplets and completes one round.
    pub fn incorporate(&mut self, answers: &[(Query, Choice)]) -> Result<TraceRecord> {
        let mut added = 0;
        for (q, choice) in answers {
            let x = self
                .world
                .pool
                .get(q.context_index)
                .ok_or_else(|| Error::InvalidArgument(format!("context {} out of range", q.context_index)))?;
            let (win, lose) = match choice {
                Choice::First => (q.first, q.second),
                Choice::Second => (q.second, q.first),
                Choice::Skip => continue,
            };
            let triplet = PreferenceTriplet::new(
                x.clone(),
                self.world.actions.encode(x, win)?,
                self.world.actions.encode(x, lose)?,
            )?;
            self.triplets.push(triplet);
            added += 1;
        }
        if added > 0 {
            self.refit()?;
        }
        let m = self.metrics()?;
        let record = TraceRecord {
            round: self.round,
            mean_reward: m.mean_reward,
            mean_kl: m.mean_kl,
            phi_b: m.phi_b,
            seed: oracle_seed(self.seed, self.round, 0),
        };
        self.round += 1;
        self.trace.push(record.clone());
        Ok(record)
    }

    fn refit(&mut self) -> Result<()> {
        let weights = self.reward.arch().weight_ranges();
        let cap = self.config.importance_cap;
        let l1 = |theta: &mut [f64]| {
            if let Some(radius) = cap {
                let mut flat: Vec<f64> = weights.iter().flat_map(|r| theta[r.clone()].to_vec()).collect();
                project_l1_ball(&mut flat, radius);
                let mut it = flat.into_iter();
                for r in &weights {
                    for v in &mut theta[r.clone()] {
                        *v = it.next().expect("same length");
                    }
                }
            }
        };
        let projector: Option<&dyn Projector> = if cap.is_some() { Some(&l1) } else { None };
        self.reward = refit_reward(&self.reward, &self.triplets, &self.config.reward, projector)?;
        let objective = PolicyObjective::new(&self.reward, &self.world.reference, self.config.beta, &self.world.pool)?
            .with_reward_scale(self.config.human_weight)?;
        self.policy =
            optimize_policy_within(&objective, &self.policy, self.config.c1, &self.config.policy_descent)?.policy;
        Ok(())
    }

    /// Runs one round against a simulated human.
    pub fn simulated_round(&mut self, human: &SimulatedHuman, pairs: usize) -> Result<TraceRecord> {
        let queries = self.select_queries(pairs)?;
        let answers = queries
            .into_iter()
            .enumerate()
            .map(|(j, q)| {
                let c = simulated_choice(human, &self.world, &q, oracle_seed(self.seed, self.round, j))?;
                Ok((q, c))
            })
            .collect::<Result<Vec<_>>>()?;
        self.incorporate(&answers)
    }
}

/// Output of [`rlhf_loop`].
#[derive(Debug, Clone)]
pub struct RlhfOutcome {
    pub policy: SoftmaxPolicy,
    pub reward: RewardModel,
    pub trace: Vec<TraceRecord>,
}

/// Alternates query selection, simulated answers, reward refits and policy
/// re-optimization for `rounds` rounds.
pub fn rlhf_loop(
    world: &PreferenceWorld,
    config: &RlhfConfig,
    rounds: usize,
    pairs_per_round: usize,
    seed: u64,
) -> Result<RlhfOutcome> {
    if rounds == 0 {
        return Err(Error::InvalidArgument("rounds must be at least 1".into()));
    }
    if pairs_per_round == 0 {
        return Err(Error::InvalidArgument("pairs_per_round must be at least 1".into()));
    }
    let mut learner = RlhfLearner::new(world.clone(), config.clone(), seed)?;
    let human = world.human.clone();
    for _ in 0..rounds {
        learner.simulated_round(&human, pairs_per_round)?;
    }
    Ok(RlhfOutcome {
        policy: learner.policy,
        reward: learner.reward,
        trace: learner.trace,
    })
}

/// Writes one JSON object per trace record.
pub fn write_trace_jsonl(trace: &[TraceRecord], mut out: impl Write) -> Result<()> {
    for record in trace {
        let line = serde_json::to_string(record).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}
