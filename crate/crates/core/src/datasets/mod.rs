//! Machine-facing data, human-signal data, synthetic generators and the
//! simulated human oracle.

mod csv_io;
mod generator;
mod human;
mod labeled;

pub use csv_io::{load_csv, save_csv};
pub use generator::{generate_complementary, generate_dataset, ComplementaryWorld, GeneratorSpec};
pub use human::{elicit_preferences, HumanProfile, HumanView, SimulatedHuman};
pub use labeled::{split, HumanSignalDataset, LabeledDataset, PreferenceTriplet, SignalKind, TaskKind};
pub use labeled::sha256_hex;
