use std::ops::Range;

use super::{model_hash, CentaurModel, CentaurSpec, Predictor, Residual};
use crate::datasets::{sha256_hex, HumanSignalDataset};
use crate::models::{FitConfig, FittedModel, SupervisedObjective};
use crate::numerics::{derive_seed, minimize, DescentOptions, Objective, ParamVector, SplitMix64};
use crate::{Error, Result};

/// Shape of a low-rank delta `B A` on the first-layer weight matrix.
#[derive(Debug, Clone)]
struct AdapterShape {
    range: Range<usize>,
    rows: usize,
    cols: usize,
    rank: usize,
}

impl AdapterShape {
    fn b_len(&self) -> usize {
        self.rows * self.rank
    }

    /// Base parameters with `B A` added to the weight matrix.
    fn merge(&self, base: &[f64], phi: &[f64]) -> Vec<f64> {
        let (b, a) = phi.split_at(self.b_len());
        let mut theta = base.to_vec();
        let w = &mut theta[self.range.clone()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                let mut delta = 0.0;
                for r in 0..self.rank {
                    delta += b[i * self.rank + r] * a[r * self.cols + j];
                }
                w[i * self.cols + j] += delta;
            }
        }
        theta
    }
}

/// The member training loss as a function of its adapter `(B, A)`.
struct AdapterObjective<'a> {
    inner: &'a SupervisedObjective,
    base: &'a [f64],
    shape: &'a AdapterShape,
}

impl Objective for AdapterObjective<'_> {
    fn value_and_gradient(&self, phi: &[f64], grad: &mut [f64]) -> f64 {
        let s = self.shape;
        let theta = s.merge(self.base, phi);
        let mut full = vec![0.0; theta.len()];
        let value = self.inner.value_and_gradient(&theta, &mut full);
        let g = &full[s.range.clone()];
        let (b, a) = phi.split_at(s.b_len());
        let (gb, ga) = grad.split_at_mut(s.b_len());
        gb.fill(0.0);
        ga.fill(0.0);
        for i in 0..s.rows {
            for j in 0..s.cols {
                let gij = g[i * s.cols + j];
                for r in 0..s.rank {
                    gb[i * s.rank + r] += gij * a[r * s.cols + j];
                    ga[r * s.cols + j] += b[i * s.rank + r] * gij;
                }
            }
        }
        value
    }
}

/// Builds K members that share `base` and differ by rank-limited deltas on
/// its first-layer weights. Member k trains its adapter for `extents[k]`
/// iterations on `human_datasets[k]`; the ensemble output is the mean
/// member raw score. `B` starts at zero, so an extent of 0 leaves a member
/// equal to base.
pub fn reward_ensemble(
    base: &FittedModel,
    human_datasets: &[HumanSignalDataset],
    extents: &[usize],
    adapter_rank: usize,
    cfg: &FitConfig,
) -> Result<CentaurModel> {
    let spec = CentaurSpec::RewardEnsemble {
        extents: extents.to_vec(),
        adapter_rank,
    };
    spec.validate()?;
    if human_datasets.len() != extents.len() {
        return Err(Error::Config(format!(
            "{} human datasets for {} extents",
            human_datasets.len(),
            extents.len()
        )));
    }
    let (range, rows, cols) = base.arch().weight_matrix();
    if adapter_rank > rows.min(cols) {
        return Err(Error::InvalidArgument(format!(
            "adapter_rank {adapter_rank} exceeds weight matrix dimension {}x{}",
            rows, cols
        )));
    }
    let shape = AdapterShape {
        range,
        rows,
        cols,
        rank: adapter_rank,
    };
    let base_values = base.params().values();

    let mut members = Vec::with_capacity(extents.len());
    let mut adapter_values = Vec::new();
    let mut layout = Vec::new();
    for (k, (d_human, &extent)) in human_datasets.iter().zip(extents).enumerate() {
        let labeled = d_human.require_labeled("reward_ensemble")?;
        let objective = base.objective(labeled, cfg.l2_reg)?;
        let mut rng = SplitMix64::for_stream(derive_seed(cfg.descent.seed, k as u64), "adapter");
        let a_scale = 1.0 / (cols as f64).sqrt();
        let mut phi = vec![0.0; shape.b_len()];
        phi.extend((0..adapter_rank * cols).map(|_| rng.normal() * a_scale));
        if extent > 0 {
            let adapter = AdapterObjective {
                inner: &objective,
                base: base_values,
                shape: &shape,
            };
            let opts = DescentOptions {
                max_iters: extent,
                ..cfg.descent
            };
            phi = minimize(&adapter, &ParamVector::flat(phi), None, &opts)?.params.into_values();
        }
        members.push(base.with_params(shape.merge(base_values, &phi))?);
        adapter_values.extend_from_slice(&phi);
        layout.push((format!("member{k}_b"), shape.b_len()));
        layout.push((format!("member{k}_a"), adapter_rank * cols));
    }

    let layout_refs: Vec<(&str, usize)> = layout.iter().map(|(n, l)| (n.as_str(), *l)).collect();
    let symbiotic = ParamVector::zeros(&layout_refs).with_values(adapter_values);
    let frozen_change = members
        .iter()
        .flat_map(|m| {
            m.params()
                .values()
                .iter()
                .zip(base_values)
                .enumerate()
                .filter(|(i, _)| !shape.range.contains(i))
                .map(|(_, (a, b))| (a - b).abs())
        })
        .fold(0.0, f64::max);
    let human_hashes: Vec<String> = human_datasets.iter().map(HumanSignalDataset::content_hash).collect();
    CentaurModel::build(
        &spec,
        symbiotic,
        Predictor::Adapted { members },
        vec![
            Residual::new("adapter_rank", adapter_rank as f64, Some(adapter_rank as f64)),
            Residual::new("frozen_max_change", frozen_change, Some(0.0)),
        ],
        model_hash(base),
        sha256_hex(human_hashes.join(",").as_bytes()),
    )
}
