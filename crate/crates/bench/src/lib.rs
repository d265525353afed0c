//! Shared fixtures for the benchmarks.

use centaur_core::centaur::{CapChoice, CentaurSpec};
use centaur_core::datasets::HumanView;
use centaur_core::evaluation::{ArmKind, ArmSpec, CENTAUR_ARM, HUMAN_ARM, MACHINE_ARM};
use centaur_core::rewards::{PreferenceWorld, WorldSpec};
use centaur_core::{ExperimentSpec, GeneratorSpec, HumanProfile, TaskKind};

/// Shared columns for the machine, private columns for the human.
pub fn generator(n_records: usize) -> GeneratorSpec {
    GeneratorSpec {
        n_records,
        d_shared: 3,
        d_private: 2,
        true_weights: vec![2.0, -1.5, 1.0, 1.2, -1.0],
        label_noise: 0.0,
        task_kind: TaskKind::Binary,
    }
}

/// Sees only the private columns and leans toward a fixed decision.
pub fn biased_human() -> HumanProfile {
    HumanProfile {
        view: HumanView::PrivateOnly,
        weight_scale: 1.0,
        bias_anchor: 0.8,
        anchor_strength: 0.3,
        noise_rate: 0.1,
    }
}

/// Human, machine and a validated augment_model centaur.
pub fn ranking_spec(n_records: usize, replications: usize) -> ExperimentSpec {
    let centaur = CentaurSpec::AugmentModel {
        importance_cap: CapChoice::Validated {
            grid: vec![Some(0.0), Some(0.5), Some(1.0), None],
            validation_fraction: 0.25,
        },
    };
    ExperimentSpec::new(
        generator(n_records),
        biased_human(),
        vec![
            ArmSpec::new(HUMAN_ARM, ArmKind::HumanOnly),
            ArmSpec::new(MACHINE_ARM, ArmKind::MachineOnly),
            ArmSpec::new(CENTAUR_ARM, ArmKind::Centaur { spec: centaur }),
        ],
        replications,
    )
}

pub fn world(seed: u64) -> PreferenceWorld {
    PreferenceWorld::build(&WorldSpec::new(generator(1), HumanProfile::default()), seed).expect("valid world")
}
