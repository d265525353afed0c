use serde::{Deserialize, Serialize};

use super::{HumanProfile, LabeledDataset, SimulatedHuman, TaskKind};
use crate::numerics::{dot, SplitMix64};
use crate::{Error, Result};

/// Synthetic population: standard-normal features split into columns the
/// machine sees (`shared`) and columns only a human perceives (`private`).
///
/// Binary labels are `1[w . x >= 0]`, each flipped with probability
/// `label_noise`; regression labels are `w . x + label_noise * N(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub n_records: usize,
    pub d_shared: usize,
    pub d_private: usize,
    pub true_weights: Vec<f64>,
    #[serde(default)]
    pub label_noise: f64,
    #[serde(default = "default_task")]
    pub task_kind: TaskKind,
}

fn default_task() -> TaskKind {
    TaskKind::Binary
}

impl GeneratorSpec {
    pub fn n_features(&self) -> usize {
        self.d_shared + self.d_private
    }

    pub fn shared_columns(&self) -> Vec<usize> {
        (0..self.d_shared).collect()
    }

    pub fn private_columns(&self) -> Vec<usize> {
        (self.d_shared..self.n_features()).collect()
    }

    pub fn feature_names(&self) -> Vec<String> {
        (0..self.d_shared)
            .map(|i| format!("shared_{i}"))
            .chain((0..self.d_private).map(|i| format!("private_{i}")))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_records == 0 {
            return Err(Error::Config("n_records must be positive".into()));
        }
        if self.n_features() == 0 {
            return Err(Error::Config("d_shared + d_private must be at least 1".into()));
        }
        if self.true_weights.len() != self.n_features() {
            return Err(Error::Config(format!(
                "true_weights has {} entries for {} features",
                self.true_weights.len(),
                self.n_features()
            )));
        }
        if self.true_weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Config("true_weights must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return Err(Error::Config(format!(
                "label_noise must lie in [0, 1], got {}",
                self.label_noise
            )));
        }
        Ok(())
    }

    /// The noise-free signal `w . x` for a full feature row.
    pub fn signal(&self, row: &[f64]) -> f64 {
        dot(&self.true_weights, row)
    }
}

/// Draws `spec.n_records` records with all `d_shared + d_private` columns.
pub fn generate_dataset(spec: &GeneratorSpec, seed: u64) -> Result<LabeledDataset> {
    spec.validate()?;
    let d = spec.n_features();
    let mut rng = SplitMix64::for_stream(seed, "generator");
    let mut features = Vec::with_capacity(spec.n_records * d);
    let mut labels = Vec::with_capacity(spec.n_records);
    for _ in 0..spec.n_records {
        let start = features.len();
        features.extend((0..d).map(|_| rng.normal()));
        let signal = spec.signal(&features[start..]);
        let label = match spec.task_kind {
            TaskKind::Binary => {
                let clean = if signal >= 0.0 { 1.0 } else { 0.0 };
                if rng.bernoulli(spec.label_noise) {
                    1.0 - clean
                } else {
                    clean
                }
            }
            TaskKind::Regression => signal + spec.label_noise * rng.normal(),
        };
        labels.push(label);
    }
    LabeledDataset::from_flat(features, d, labels, spec.feature_names())
}

/// A generated population plus the default simulated human for it.
#[derive(Debug, Clone)]
pub struct ComplementaryWorld {
    /// All columns, shared first then private.
    pub full: LabeledDataset,
    /// Only the shared columns.
    pub machine: LabeledDataset,
    /// Full-view human using the generator's own weights, no anchoring, no noise.
    pub human: SimulatedHuman,
}

/// Generates data where the machine sees only the shared columns while the
/// returned human perceives every column, private ones included.
pub fn generate_complementary(spec: &GeneratorSpec, seed: u64) -> Result<ComplementaryWorld> {
    if spec.d_private == 0 {
        return Err(Error::Config(
            "complementary data needs at least one private feature (d_private = 0)".into(),
        ));
    }
    let full = generate_dataset(spec, seed)?;
    let machine = full.select_columns(&spec.shared_columns())?;
    let human = SimulatedHuman::from_profile(spec, &HumanProfile::default(), seed)?;
    Ok(ComplementaryWorld {
        full,
        machine,
        human,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn spec(d_shared: usize, d_private: usize, noise: f64) -> GeneratorSpec {
        GeneratorSpec {
            n_records: 500,
            d_shared,
            d_private,
            true_weights: vec![1.0; d_shared + d_private],
            label_noise: noise,
            task_kind: TaskKind::Binary,
        }
    }

    #[test]
    fn machine_view_has_only_shared_columns() {
        let world = generate_complementary(&spec(2, 1, 0.0), 5).unwrap();
        assert_eq!(world.machine.n_features(), 2);
        assert_eq!(world.full.n_features(), 3);
        assert!(world.human.visible_mask().iter().all(|v| *v));
    }

    #[test]
    fn private_signal_is_withheld_from_the_machine() {
        // Bayes-optimal machine accuracy < 1: some records share the same sign
        // of the shared signal but have different labels.
        let world = generate_complementary(&spec(2, 1, 0.0), 5).unwrap();
        let disagreements = world
            .full
            .rows()
            .zip(world.full.labels())
            .filter(|(row, y)| ((row[0] + row[1] >= 0.0) as u8 as f64) != **y)
            .count();
        assert!(disagreements > 0);
    }

    #[test]
    fn requires_private_columns() {
        assert!(matches!(generate_complementary(&spec(2, 0, 0.0), 1), Err(Error::Config(_))));
        assert!(generate_dataset(&spec(2, 0, 0.0), 1).is_ok());
    }

    #[test]
    fn same_seed_same_data() {
        let a = generate_dataset(&spec(2, 2, 0.1), 77).unwrap();
        let b = generate_dataset(&spec(2, 2, 0.1), 77).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        let c = generate_dataset(&spec(2, 2, 0.1), 78).unwrap();
        assert_ne!(a.content_hash(), c.content_hash());
    }

    #[test]
    fn validation_errors() {
        let mut s = spec(1, 1, 0.0);
        s.true_weights.pop();
        assert!(generate_dataset(&s, 0).is_err());
        let mut s = spec(0, 0, 0.0);
        s.true_weights.clear();
        assert!(generate_dataset(&s, 0).is_err());
        assert!(generate_dataset(&spec(1, 1, 1.5), 0).is_err());
    }
}
