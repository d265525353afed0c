use super::{model_hash, CapChoice, CentaurFitOptions, CentaurModel, CentaurSpec, HumanFeature, Predictor, Residual};
use crate::centaur::Cap;
use crate::datasets::{split, HumanSignalDataset, LabeledDataset};
use crate::models::{fit_from, untrained_model, FittedModel};
use crate::numerics::{derive_seed, project_l1_ball, stream_id};
use crate::{Error, Result};

/// Name of the appended human-derived column.
pub const HUMAN_SIGNAL_COLUMN: &str = "human_signal";

/// Trains on `d_data` rows extended by the aligned human signal.
///
/// Requires one human-labeled record per d_data record, aligned by index.
pub fn augment_raw(d_data: &LabeledDataset, d_human: &HumanSignalDataset, opts: &CentaurFitOptions) -> Result<CentaurModel> {
    let spec = CentaurSpec::AugmentRaw;
    let labeled = d_human.require_labeled("augment_raw")?;
    if labeled.n_records() < d_data.n_records() {
        return Err(Error::Coverage(format!(
            "\"must hold |d_human| >= |d_data|\": {} human signals for {} records",
            labeled.n_records(),
            d_data.n_records()
        )));
    }
    let signals = &labeled.labels()[..d_data.n_records()];
    let (model, _) = fit_augmented(d_data, signals, None, opts)?;
    CentaurModel::build(
        &spec,
        model.params().clone(),
        Predictor::Augmented {
            model,
            feature: HumanFeature::Signal,
        },
        Vec::new(),
        d_data.content_hash(),
        d_human.content_hash(),
    )
}

/// Augments each record with the k-nearest-neighbour vote of d_human.
pub fn augment_knn(
    d_data: &LabeledDataset,
    d_human: &HumanSignalDataset,
    k: usize,
    opts: &CentaurFitOptions,
) -> Result<CentaurModel> {
    let spec = CentaurSpec::AugmentKnn { k };
    spec.validate()?;
    let index = crate::models::KnnIndex::new(d_human, k, opts.fit.task, opts.human_columns.clone())?;
    let signals = d_data.rows().map(|row| index.feedback(row)).collect::<Result<Vec<_>>>()?;
    let (model, _) = fit_augmented(d_data, &signals, None, opts)?;
    CentaurModel::build(
        &spec,
        model.params().clone(),
        Predictor::Augmented {
            model,
            feature: HumanFeature::Knn { index },
        },
        Vec::new(),
        d_data.content_hash(),
        d_human.content_hash(),
    )
}

/// Augments each record with the preference model's output, with the
/// first-layer weights on that input held inside an L1 ball of radius cap.
pub fn augment_model(
    d_data: &LabeledDataset,
    preference_model: &FittedModel,
    importance_cap: &CapChoice,
    opts: &CentaurFitOptions,
) -> Result<CentaurModel> {
    let spec = CentaurSpec::AugmentModel {
        importance_cap: importance_cap.clone(),
    };
    spec.validate()?;
    let signals = d_data
        .rows()
        .map(|row| Ok(preference_model.predict(row)?.score()))
        .collect::<Result<Vec<_>>>()?;
    let cap = match importance_cap {
        CapChoice::Fixed(cap) => *cap,
        CapChoice::Validated {
            grid,
            validation_fraction,
        } => select_cap(d_data, &signals, grid, *validation_fraction, opts)?,
    };
    let (model, l1) = fit_augmented(d_data, &signals, cap, opts)?;
    CentaurModel::build(
        &spec,
        model.params().clone(),
        Predictor::Augmented {
            model,
            feature: HumanFeature::Model {
                model: preference_model.clone(),
            },
        },
        vec![Residual::new("human_feature_l1", l1, cap)],
        d_data.content_hash(),
        model_hash(preference_model),
    )
}

fn select_cap(
    d_data: &LabeledDataset,
    signals: &[f64],
    grid: &[Cap],
    validation_fraction: f64,
    opts: &CentaurFitOptions,
) -> Result<Cap> {
    let mut caps = grid.to_vec();
    caps.sort_by(|a, b| a.unwrap_or(f64::INFINITY).total_cmp(&b.unwrap_or(f64::INFINITY)));
    let augmented = d_data.append_column(HUMAN_SIGNAL_COLUMN, signals)?;
    let seed = derive_seed(opts.fit.descent.seed, stream_id("cap-validation"));
    let parts = split(&augmented, &[1.0 - validation_fraction, validation_fraction], seed)?;
    let (train, valid) = (&parts[0], &parts[1]);
    if train.is_empty() || valid.is_empty() {
        return Err(Error::InvalidArgument("too few records to validate the importance cap".into()));
    }
    let base = d_data.feature_names();
    let mut best: Option<(f64, Cap)> = None;
    for cap in caps {
        let model = fit_augmented_on(train, base.len(), cap, opts)?.0;
        let loss = model.mean_loss(valid)?;
        if best.is_none_or(|(b, _)| loss < b) {
            best = Some((loss, cap));
        }
    }
    Ok(best.map(|(_, cap)| cap).expect("grid is nonempty"))
}

fn fit_augmented(d_data: &LabeledDataset, signals: &[f64], cap: Cap, opts: &CentaurFitOptions) -> Result<(FittedModel, f64)> {
    if signals.len() != d_data.n_records() {
        return Err(Error::Coverage(format!(
            "{} human signals for {} records",
            signals.len(),
            d_data.n_records()
        )));
    }
    let augmented = d_data.append_column(HUMAN_SIGNAL_COLUMN, signals)?;
    fit_augmented_on(&augmented, d_data.n_features(), cap, opts)
}

/// Fits on an already augmented dataset whose last column (index
/// `base_dim`) is the human feature. Returns the model and the L1 norm of
/// the first-layer weights reading that feature.
fn fit_augmented_on(augmented: &LabeledDataset, base_dim: usize, cap: Cap, opts: &CentaurFitOptions) -> Result<(FittedModel, f64)> {
    let mut columns = opts.machine_columns.clone().unwrap_or_else(|| (0..base_dim).collect());
    columns.push(base_dim);
    let base = untrained_model(augmented, Some(&columns), &opts.fit)?;
    // The human column is centered but not rescaled so the cap is in natural units and a weak signal is not amplified.
    let scaler = base.scaler().clone().with_unit_scale(columns.len() - 1);
    let untrained = FittedModel::from_parts(
        base.arch(),
        base.params().clone(),
        base.task(),
        Some(columns.clone()),
        base.source_dim(),
        scaler,
    )?;
    let human_weights = untrained.arch().input_weight_indices(columns.len() - 1);
    let projector = cap.map(|radius| {
        let idx = human_weights.clone();
        move |theta: &mut [f64]| {
            let mut w: Vec<f64> = idx.iter().map(|&i| theta[i]).collect();
            project_l1_ball(&mut w, radius);
            for (&i, v) in idx.iter().zip(w) {
                theta[i] = v;
            }
        }
    });
    let init = untrained.params().clone();
    let model = fit_from(
        &untrained,
        augmented,
        &init,
        projector.as_ref().map(|p| p as &dyn crate::numerics::Projector),
        &opts.fit,
    )?;
    let l1 = human_weights.iter().map(|&i| model.params().values()[i].abs()).sum();
    Ok((model, l1))
}
