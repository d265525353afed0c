use serde::{Deserialize, Serialize};

use crate::datasets::{LabeledDataset, SimulatedHuman};
use crate::models::{fit_supervised_view, FitConfig, FittedModel};
use crate::numerics::{stream_id, derive_seed, SplitMix64};
use crate::{Error, Result};

/// How the next batch of pool records is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryStrategy {
    /// Records whose predicted probability is closest to 0.5; ties go to the
    /// lower pool index.
    Uncertainty,
    /// A seeded uniform draw from the unlabeled records.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveLearningOptions {
    pub budget: usize,
    pub batch: usize,
    pub strategy: QueryStrategy,
    pub fit: FitConfig,
    /// Columns the model reads; `None` is every column.
    pub columns: Option<Vec<usize>>,
    pub seed: u64,
}

/// One annotate-and-refit step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveStep {
    pub round: usize,
    pub n_labeled: usize,
    /// Fraction of the pool annotated so far.
    pub coverage: f64,
    /// Accuracy against the evaluation truth.
    pub accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct ActiveLearningOutcome {
    pub model: FittedModel,
    pub trace: Vec<ActiveStep>,
    /// Pool indices in the order they were annotated.
    pub queried: Vec<usize>,
}

fn accuracy(model: &FittedModel, ds: &LabeledDataset) -> Result<f64> {
    let predictions = model.predict_dataset(ds)?;
    let hits = predictions
        .iter()
        .zip(ds.labels())
        .filter(|(p, y)| p.decision() == **y)
        .count();
    Ok(hits as f64 / ds.n_records() as f64)
}

/// Pool-based active learning with the simulated human as annotator.
///
/// The first batch is a seeded uniform draw for both strategies, since no
/// model exists yet. Every round refits from scratch on all annotations, in
/// pool order, so exhausting the pool reproduces fitting on the fully
/// annotated pool. Accuracy is measured on `eval` (the pool itself, with its
/// ground-truth labels, when `eval` is `None`).
pub fn active_learning(
    pool: &LabeledDataset,
    sim: &SimulatedHuman,
    opts: &ActiveLearningOptions,
    eval: Option<&LabeledDataset>,
) -> Result<ActiveLearningOutcome> {
    let n = pool.n_records();
    if opts.budget == 0 {
        return Err(Error::Config("active learning budget must be positive".into()));
    }
    if opts.batch == 0 {
        return Err(Error::Config("active learning batch must be positive".into()));
    }
    if opts.budget > n {
        return Err(Error::Config(format!(
            "budget {} exceeds the pool size {n}",
            opts.budget
        )));
    }
    let eval = eval.unwrap_or(pool);
    let columns = opts.columns.as_deref();
    let mut rng = SplitMix64::new(derive_seed(opts.seed, stream_id("active-learning")));
    let mut labeled = vec![false; n];
    let mut human_labels = vec![0.0; n];
    let mut queried = Vec::with_capacity(opts.budget);
    let mut trace = Vec::new();
    let mut model: Option<FittedModel> = None;
    while queried.len() < opts.budget {
        let take = opts.batch.min(opts.budget - queried.len());
        let unlabeled: Vec<usize> = (0..n).filter(|&i| !labeled[i]).collect();
        let picks: Vec<usize> = match (&model, opts.strategy) {
            (Some(m), QueryStrategy::Uncertainty) => {
                let mut scored = unlabeled
                    .iter()
                    .map(|&i| Ok(((m.predict(pool.row(i))?.score() - 0.5).abs(), i)))
                    .collect::<Result<Vec<_>>>()?;
                scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                scored.into_iter().take(take).map(|(_, i)| i).collect()
            }
            _ => {
                let mut shuffled = unlabeled;
                rng.shuffle(&mut shuffled);
                shuffled.truncate(take);
                shuffled
            }
        };
        for &i in &picks {
            labeled[i] = true;
            human_labels[i] = sim.label_record(pool.row(i), i)?;
        }
        queried.extend(&picks);
        let indices: Vec<usize> = (0..n).filter(|&i| labeled[i]).collect();
        let train = pool
            .subset(&indices)
            .with_labels(indices.iter().map(|&i| human_labels[i]).collect())?;
        let fitted = fit_supervised_view(&train, columns, &opts.fit)?;
        trace.push(ActiveStep {
            round: trace.len(),
            n_labeled: indices.len(),
            coverage: indices.len() as f64 / n as f64,
            accuracy: accuracy(&fitted, eval)?,
        });
        model = Some(fitted);
    }
    Ok(ActiveLearningOutcome {
        model: model.expect("budget is positive"),
        trace,
        queried,
    })
}
