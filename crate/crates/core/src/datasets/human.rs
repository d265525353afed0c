use serde::{Deserialize, Serialize};

use super::{GeneratorSpec, LabeledDataset, PreferenceTriplet, TaskKind};
use crate::constants::DECISION_THRESHOLD;
use crate::numerics::{derive_seed, sigmoid, SplitMix64};
use crate::{Error, Result};

/// Which generator columns a simulated human perceives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HumanView {
    Full,
    PrivateOnly,
    SharedOnly,
}

/// Parameters for building a [`SimulatedHuman`] over a generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HumanProfile {
    pub view: HumanView,
    /// Multiplies the generator's weights on the visible columns.
    pub weight_scale: f64,
    pub bias_anchor: f64,
    pub anchor_strength: f64,
    pub noise_rate: f64,
}

impl Default for HumanProfile {
    fn default() -> Self {
        Self {
            view: HumanView::Full,
            weight_scale: 1.0,
            bias_anchor: 0.5,
            anchor_strength: 0.0,
            noise_rate: 0.0,
        }
    }
}

/// Intuition as a noisy pattern response over a private view of the features.
///
/// For a row `x` the response probability is
/// `q = (1 - anchor_strength) * sigmoid(weights . x_visible) + anchor_strength * bias_anchor`.
/// Binary responses are `1[q >= 0.5]` (ties go to class 1), then flipped with
/// probability `noise_rate`. Regression responses are `q`, replaced by a
/// uniform draw with probability `noise_rate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedHuman {
    visible_mask: Vec<bool>,
    weights: Vec<f64>,
    bias_anchor: f64,
    anchor_strength: f64,
    noise_rate: f64,
    task_kind: TaskKind,
    seed: u64,
}

fn unit_interval(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
    }
}

impl SimulatedHuman {
    pub fn new(
        visible_mask: Vec<bool>,
        weights: Vec<f64>,
        bias_anchor: f64,
        anchor_strength: f64,
        noise_rate: f64,
        task_kind: TaskKind,
        seed: u64,
    ) -> Result<Self> {
        let visible = visible_mask.iter().filter(|v| **v).count();
        if weights.len() != visible {
            return Err(Error::Config(format!(
                "{} weights for {visible} visible features",
                weights.len()
            )));
        }
        unit_interval("bias_anchor", bias_anchor)?;
        unit_interval("anchor_strength", anchor_strength)?;
        unit_interval("noise_rate", noise_rate)?;
        Ok(Self {
            visible_mask,
            weights,
            bias_anchor,
            anchor_strength,
            noise_rate,
            task_kind,
            seed,
        })
    }

    pub fn from_profile(spec: &GeneratorSpec, profile: &HumanProfile, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mask: Vec<bool> = (0..spec.n_features())
            .map(|c| match profile.view {
                HumanView::Full => true,
                HumanView::PrivateOnly => c >= spec.d_shared,
                HumanView::SharedOnly => c < spec.d_shared,
            })
            .collect();
        if !mask.iter().any(|v| *v) {
            return Err(Error::Config(format!(
                "human view {:?} leaves no visible features",
                profile.view
            )));
        }
        let weights = spec
            .true_weights
            .iter()
            .zip(&mask)
            .filter(|(_, v)| **v)
            .map(|(w, _)| w * profile.weight_scale)
            .collect();
        Self::new(
            mask,
            weights,
            profile.bias_anchor,
            profile.anchor_strength,
            profile.noise_rate,
            spec.task_kind,
            derive_seed(seed, 0x4855_4d41_4e),
        )
    }

    pub fn visible_mask(&self) -> &[bool] {
        &self.visible_mask
    }

    /// Indices of the visible columns.
    pub fn visible_columns(&self) -> Vec<usize> {
        self.visible_mask
            .iter()
            .enumerate()
            .filter(|(_, v)| **v)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn noise_rate(&self) -> f64 {
        self.noise_rate
    }

    pub fn task_kind(&self) -> TaskKind {
        self.task_kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_noise_rate(mut self, noise_rate: f64) -> Result<Self> {
        unit_interval("noise_rate", noise_rate)?;
        self.noise_rate = noise_rate;
        Ok(self)
    }

    /// `weights . x_visible`.
    pub fn visible_signal(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.visible_mask.len() {
            return Err(Error::Dimension {
                expected: self.visible_mask.len(),
                got: x.len(),
            });
        }
        Ok(x.iter()
            .zip(&self.visible_mask)
            .filter(|(_, v)| **v)
            .zip(&self.weights)
            .map(|((xi, _), w)| xi * w)
            .sum())
    }

    fn anchor_blend(&self, p: f64) -> f64 {
        (1.0 - self.anchor_strength) * p + self.anchor_strength * self.bias_anchor
    }

    /// The anchored response probability before noise.
    pub fn response_probability(&self, x: &[f64]) -> Result<f64> {
        Ok(self.anchor_blend(sigmoid(self.visible_signal(x)?)))
    }

    /// The noise-free decision the human would make for `x`.
    pub fn clean_label(&self, x: &[f64]) -> Result<f64> {
        let q = self.response_probability(x)?;
        Ok(match self.task_kind {
            TaskKind::Binary => class_of(q),
            TaskKind::Regression => q,
        })
    }

    /// One human response. Consumes one uniform draw, plus one more for a
    /// perturbed regression response.
    pub fn human_label(&self, x: &[f64], rng: &mut SplitMix64) -> Result<f64> {
        let clean = self.clean_label(x)?;
        let perturbed = rng.bernoulli(self.noise_rate);
        Ok(match (self.task_kind, perturbed) {
            (_, false) => clean,
            (TaskKind::Binary, true) => 1.0 - clean,
            (TaskKind::Regression, true) => rng.next_f64(),
        })
    }

    /// The response to record `index`, seeded by `(self.seed, index)` so it does
    /// not depend on which other records were labeled.
    pub fn label_record(&self, x: &[f64], index: usize) -> Result<f64> {
        let mut rng = SplitMix64::new(derive_seed(self.seed, index as u64));
        self.human_label(x, &mut rng)
    }

    /// Labels every row of a full-column dataset with [`Self::label_record`].
    pub fn label_dataset(&self, ds: &LabeledDataset) -> Result<Vec<f64>> {
        ds.rows().enumerate().map(|(i, row)| self.label_record(row, i)).collect()
    }

    /// Noise-free utility of a candidate output encoding.
    pub fn utility(&self, candidate: &[f64]) -> Result<f64> {
        self.visible_signal(candidate)
    }

    /// Whether the human prefers `first` over `second`. Consumes one draw.
    pub fn prefers_first(&self, first: &[f64], second: &[f64], rng: &mut SplitMix64) -> Result<bool> {
        let gap = self.utility(first)? - self.utility(second)?;
        let clean = self.anchor_blend(sigmoid(gap)) >= DECISION_THRESHOLD;
        Ok(clean != rng.bernoulli(self.noise_rate))
    }
}

fn class_of(p: f64) -> f64 {
    if p >= DECISION_THRESHOLD {
        1.0
    } else {
        0.0
    }
}

/// Asks the simulated human to compare one candidate pair per context.
pub fn elicit_preferences(
    sim: &SimulatedHuman,
    contexts: &[Vec<f64>],
    candidates: &[(Vec<f64>, Vec<f64>)],
    seed: u64,
) -> Result<Vec<PreferenceTriplet>> {
    if contexts.len() != candidates.len() {
        return Err(Error::Dimension {
            expected: contexts.len(),
            got: candidates.len(),
        });
    }
    let mut rng = SplitMix64::new(seed);
    contexts
        .iter()
        .zip(candidates)
        .map(|(x, (a, b))| {
            if a.is_empty() || b.is_empty() {
                return Err(Error::InvalidArgument("empty candidate in pair".into()));
            }
            if a == b {
                return Err(Error::Invariant(
                    "candidate pair is identical; preferred must differ from rejected".into(),
                ));
            }
            let (preferred, rejected) = if sim.prefers_first(a, b, &mut rng)? {
                (a.clone(), b.clone())
            } else {
                (b.clone(), a.clone())
            };
            PreferenceTriplet::new(x.clone(), preferred, rejected)
        })
        .collect()
}
