use super::{model_hash, Cap, CentaurModel, CentaurSpec, Predictor, Residual};
use crate::datasets::HumanSignalDataset;
use crate::models::{fit_from, FitConfig, FittedModel};
use crate::numerics::project_l2_ball;
use crate::{Error, Result};

/// Continues training `base` on human labels, moving only the segments in
/// `tuning_mask` and keeping them within an L2 ball of radius `c1` around
/// their base values. Every other parameter stays bit-identical to base.
///
/// The base model's column view and standardization are kept; `cfg`
/// supplies the regularization and descent options.
pub fn finetune(
    base: &FittedModel,
    d_human: &HumanSignalDataset,
    tuning_mask: &[String],
    c1: Cap,
    cfg: &FitConfig,
) -> Result<CentaurModel> {
    let spec = CentaurSpec::Finetune {
        tuning_mask: tuning_mask.to_vec(),
        c1,
    };
    spec.validate()?;
    let labeled = d_human.require_labeled("finetune")?;
    let base_values = base.params().values().to_vec();
    let mut tuned = Vec::new();
    for name in tuning_mask {
        let range = base
            .params()
            .range(name)
            .ok_or_else(|| Error::Config(format!("tuning_mask names unknown segment {name:?}")))?;
        tuned.extend(range);
    }
    tuned.sort_unstable();
    tuned.dedup();
    let mut frozen_mask = vec![true; base_values.len()];
    for &i in &tuned {
        frozen_mask[i] = false;
    }
    let center: Vec<f64> = tuned.iter().map(|&i| base_values[i]).collect();
    let radius = c1.unwrap_or(f64::INFINITY);

    let projector = |theta: &mut [f64]| {
        for (i, v) in theta.iter_mut().enumerate() {
            if frozen_mask[i] {
                *v = base_values[i];
            }
        }
        let mut gamma: Vec<f64> = tuned.iter().map(|&i| theta[i]).collect();
        project_l2_ball(&mut gamma, &center, radius);
        for (&i, v) in tuned.iter().zip(gamma) {
            theta[i] = v;
        }
    };
    let model = fit_from(base, labeled, base.params(), Some(&projector), cfg)?;

    let values = model.params().values();
    let drift = tuned
        .iter()
        .zip(&center)
        .map(|(&i, c)| (values[i] - c) * (values[i] - c))
        .sum::<f64>()
        .sqrt();
    let frozen_change = values
        .iter()
        .zip(&base_values)
        .zip(&frozen_mask)
        .filter(|(_, &f)| f)
        .map(|((a, b), _)| (a - b).abs())
        .fold(0.0, f64::max);
    CentaurModel::build(
        &spec,
        model.params().clone(),
        Predictor::Single { model: model.clone() },
        vec![
            Residual::new("tuned_l2_drift", drift, c1),
            Residual::new("frozen_max_change", frozen_change, Some(0.0)),
        ],
        model_hash(base),
        d_human.content_hash(),
    )
}
