use serde::{Deserialize, Serialize};

use crate::datasets::{generate_dataset, GeneratorSpec, HumanProfile, SimulatedHuman};
use crate::models::{argmax, fit_behavior_policy, ActionSet, SoftmaxPolicy};
use crate::numerics::{derive_seed, dot, stream_id, DescentOptions};
use crate::{Error, Result};

/// Sizes and behavior-policy settings of a preference world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldSettings {
    pub n_actions: usize,
    /// Contexts the policy objective averages over and queries come from.
    pub n_pool: usize,
    /// Held-out contexts for metrics.
    pub n_eval: usize,
    /// Contexts with logged machine decisions for the reference policy.
    pub n_logged: usize,
    pub behavior_l2: f64,
    pub behavior_descent: DescentOptions,
}

impl Default for WorldSettings {
    fn default() -> Self {
        Self {
            n_actions: 4,
            n_pool: 200,
            n_eval: 100,
            n_logged: 200,
            behavior_l2: 0.1,
            behavior_descent: DescentOptions::default().with_iters(300),
        }
    }
}

impl WorldSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_actions < 2 {
            return Err(Error::Config(format!(
                "n_actions must be at least 2, got {}",
                self.n_actions
            )));
        }
        for (name, n) in [("n_pool", self.n_pool), ("n_eval", self.n_eval), ("n_logged", self.n_logged)] {
            if n == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.behavior_l2 >= 0.0 && self.behavior_l2.is_finite()) {
            return Err(Error::Config("behavior_l2 must be finite and nonnegative".into()));
        }
        self.behavior_descent.validate()
    }
}

/// A contextual preference world: the context population and human come from
/// a generator, `n_records` of which is ignored in favour of the settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    pub generator: GeneratorSpec,
    #[serde(default)]
    pub human: HumanProfile,
    #[serde(default)]
    pub settings: WorldSettings,
}

impl WorldSpec {
    pub fn new(generator: GeneratorSpec, human: HumanProfile) -> Self {
        Self {
            generator,
            human,
            settings: WorldSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut generator = self.generator.clone();
        generator.n_records = 1;
        generator.validate()?;
        self.settings.validate()
    }
}

/// Contexts, actions, a simulated human and the reference policy fitted to
/// logged machine decisions.
///
/// The logged decisions maximize the generator's utility over the shared
/// columns only, so the reference policy is competent but blind to what the
/// human perceives privately.
#[derive(Debug, Clone)]
pub struct PreferenceWorld {
    pub spec: WorldSpec,
    pub seed: u64,
    pub actions: ActionSet,
    /// Contexts the policy objective averages over and queries are drawn from.
    pub pool: Vec<Vec<f64>>,
    /// Held-out contexts for metrics.
    pub eval: Vec<Vec<f64>>,
    pub reference: SoftmaxPolicy,
    pub human: SimulatedHuman,
}

impl PreferenceWorld {
    pub fn build(spec: &WorldSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let s = &spec.settings;
        let mut generator = spec.generator.clone();
        generator.n_records = s.n_pool + s.n_eval + s.n_logged;
        let rows: Vec<Vec<f64>> = generate_dataset(&generator, derive_seed(seed, stream_id("contexts")))?
            .rows()
            .map(<[f64]>::to_vec)
            .collect();
        let pool = rows[..s.n_pool].to_vec();
        let eval = rows[s.n_pool..s.n_pool + s.n_eval].to_vec();
        let logged = &rows[s.n_pool + s.n_eval..];

        let d = generator.n_features();
        let actions = ActionSet::random_modulated(s.n_actions, d, derive_seed(seed, stream_id("actions")))?;
        let shared_weights: Vec<f64> = generator
            .true_weights
            .iter()
            .enumerate()
            .map(|(j, w)| if j < generator.d_shared { *w } else { 0.0 })
            .collect();
        let taken = logged
            .iter()
            .map(|x| {
                let utilities = (0..actions.len())
                    .map(|a| Ok(dot(&shared_weights, &actions.encode(x, a)?)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(argmax(&utilities))
            })
            .collect::<Result<Vec<_>>>()?;
        let reference = fit_behavior_policy(
            actions.clone(),
            logged,
            &taken,
            s.behavior_l2,
            &s.behavior_descent,
        )?;
        let human = SimulatedHuman::from_profile(&generator, &spec.human, derive_seed(seed, stream_id("human")))?;
        Ok(Self {
            spec: spec.clone(),
            seed,
            actions,
            pool,
            eval,
            reference,
            human,
        })
    }

    /// The human's noise-free utility of every action in context `x`.
    pub fn human_utilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        (0..self.actions.len())
            .map(|a| self.human.utility(&self.actions.encode(x, a)?))
            .collect()
    }

    /// The generator's utility of every action in `x`, over all columns.
    pub fn true_utilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        (0..self.actions.len())
            .map(|a| Ok(dot(&self.spec.generator.true_weights, &self.actions.encode(x, a)?)))
            .collect()
    }
}
