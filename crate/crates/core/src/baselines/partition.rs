use serde::{Deserialize, Serialize};

use crate::datasets::{LabeledDataset, SimulatedHuman, TaskKind};
use crate::models::{FittedModel, Prediction};
use crate::{Error, Result};

/// How a dataset was split between the model and the human.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingReport {
    pub n_to_human: usize,
    pub n_to_machine: usize,
    /// `true` where the record went to the human.
    pub to_human: Vec<bool>,
    /// Combined decisions, from whichever side handled each record.
    pub predictions: Vec<f64>,
    /// Accuracy of the combined decisions against the dataset labels.
    pub accuracy: f64,
}

/// Routes records whose model confidence `max(p, 1 - p)` is below `tau` to
/// the human; the rest keep the model's decision. `tau = 1` sends every record
/// to the human, including those the model scores with certainty. The human
/// decides without seeing the model's output.
pub fn workload_partition(
    model: &FittedModel,
    sim: &SimulatedHuman,
    tau: f64,
    ds: &LabeledDataset,
) -> Result<RoutingReport> {
    partition(model, tau, ds, |i, row| sim.label_record(row, i))
}

/// [`workload_partition`] with the human's decisions supplied per record.
pub fn workload_partition_with_decisions(
    model: &FittedModel,
    human_decisions: &[f64],
    tau: f64,
    ds: &LabeledDataset,
) -> Result<RoutingReport> {
    if human_decisions.len() != ds.n_records() {
        return Err(Error::Dimension {
            expected: ds.n_records(),
            got: human_decisions.len(),
        });
    }
    partition(model, tau, ds, |i, _| Ok(human_decisions[i]))
}

fn partition(
    model: &FittedModel,
    tau: f64,
    ds: &LabeledDataset,
    human: impl Fn(usize, &[f64]) -> Result<f64>,
) -> Result<RoutingReport> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Config(format!("tau must lie in [0, 1], got {tau}")));
    }
    if model.task() != TaskKind::Binary {
        return Err(Error::Unsupported("workload partitioning needs a binary classifier".into()));
    }
    let n = ds.n_records();
    let mut to_human = Vec::with_capacity(n);
    let mut predictions = Vec::with_capacity(n);
    for (i, row) in ds.rows().enumerate() {
        let prediction = model.predict(row)?;
        let p = prediction.score();
        let route = tau >= 1.0 || p.max(1.0 - p) < tau;
        to_human.push(route);
        predictions.push(if route { human(i, row)? } else { prediction.decision() });
    }
    let n_to_human = to_human.iter().filter(|h| **h).count();
    let hits = predictions.iter().zip(ds.labels()).filter(|(p, y)| p == y).count();
    Ok(RoutingReport {
        n_to_human,
        n_to_machine: n - n_to_human,
        to_human,
        predictions,
        accuracy: if n == 0 { 0.0 } else { hits as f64 / n as f64 },
    })
}

/// The human's decision for every record.
pub fn human_only(sim: &SimulatedHuman, ds: &LabeledDataset) -> Result<Vec<f64>> {
    sim.label_dataset(ds)
}

/// The model's prediction for every record.
pub fn machine_only(model: &FittedModel, ds: &LabeledDataset) -> Result<Vec<Prediction>> {
    model.predict_dataset(ds)
}
