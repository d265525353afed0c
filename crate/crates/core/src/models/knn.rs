use serde::{Deserialize, Serialize};

use super::Standardizer;
use crate::datasets::{HumanSignalDataset, TaskKind};
use crate::{Error, Result};

/// k-nearest-neighbour lookup over human-labeled reference records.
///
/// Distances are Euclidean on columns z-scored with the reference set's own
/// statistics. Equal distances resolve to the lower record index; binary
/// vote ties resolve to class 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnIndex {
    reference: Vec<f64>,
    signals: Vec<f64>,
    dim: usize,
    k: usize,
    task: TaskKind,
    columns: Option<Vec<usize>>,
    source_dim: usize,
    scaler: Standardizer,
}

impl KnnIndex {
    /// Builds an index over `reference`, reading only `columns` of each row
    /// when given.
    pub fn new(
        reference: &HumanSignalDataset,
        k: usize,
        task: TaskKind,
        columns: Option<Vec<usize>>,
    ) -> Result<Self> {
        let labeled = reference.require_labeled("k-nearest-neighbour feedback")?;
        if labeled.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if k == 0 || k > labeled.n_records() {
            return Err(Error::InvalidArgument(format!(
                "k = {k} must be in 1..={}",
                labeled.n_records()
            )));
        }
        let view = match &columns {
            Some(cols) => labeled.select_columns(cols)?,
            None => labeled.clone(),
        };
        let dim = view.n_features();
        let scaler = Standardizer::fit(view.features_flat(), dim);
        let mut rows = Vec::with_capacity(view.n_records() * dim);
        for row in view.rows() {
            scaler.apply_into(row, &mut rows);
        }
        Ok(Self {
            reference: rows,
            signals: labeled.labels().to_vec(),
            dim,
            k,
            task,
            columns,
            source_dim: labeled.n_features(),
            scaler,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    fn query(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.source_dim {
            return Err(Error::Dimension {
                expected: self.source_dim,
                got: x.len(),
            });
        }
        Ok(match &self.columns {
            Some(cols) => {
                let picked: Vec<f64> = cols.iter().map(|&c| x[c]).collect();
                self.scaler.apply(&picked)
            }
            None => self.scaler.apply(x),
        })
    }

    /// Indices of the `k` nearest reference records, nearest first.
    pub fn neighbors(&self, x: &[f64]) -> Result<Vec<usize>> {
        let q = self.query(x)?;
        let mut dist: Vec<(f64, usize)> = self
            .reference
            .chunks_exact(self.dim.max(1))
            .take(self.signals.len())
            .enumerate()
            .map(|(i, r)| {
                let d2 = if self.dim == 0 {
                    0.0
                } else {
                    r.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum()
                };
                (d2, i)
            })
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, order);
            dist.truncate(self.k);
        }
        dist.sort_by(order);
        Ok(dist.into_iter().map(|(_, i)| i).collect())
    }

    /// Majority vote (binary) or mean (regression) of the neighbours' signals.
    pub fn feedback(&self, x: &[f64]) -> Result<f64> {
        let nn = self.neighbors(x)?;
        Ok(match self.task {
            TaskKind::Binary => {
                let ones = nn.iter().filter(|&&i| self.signals[i] >= 0.5).count();
                if 2 * ones >= nn.len() {
                    1.0
                } else {
                    0.0
                }
            }
            TaskKind::Regression => nn.iter().map(|&i| self.signals[i]).sum::<f64>() / nn.len() as f64,
        })
    }
}

pub fn knn_feedback(index: &KnnIndex, x: &[f64]) -> Result<f64> {
    index.feedback(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::LabeledDataset;
    use proptest::prelude::*;

    fn reference(rows: Vec<Vec<f64>>, labels: Vec<f64>) -> HumanSignalDataset {
        let d = rows[0].len();
        HumanSignalDataset::from_labels(LabeledDataset::new(rows, labels, LabeledDataset::default_names(d)).unwrap())
            .unwrap()
    }

    #[test]
    fn nearest_record_wins() {
        let idx = KnnIndex::new(
            &reference(vec![vec![0.0, 0.0], vec![5.0, 5.0]], vec![1.0, 0.0]),
            1,
            TaskKind::Binary,
            None,
        )
        .unwrap();
        assert_eq!(idx.feedback(&[0.1, 0.1]).unwrap(), 1.0);
        assert_eq!(idx.feedback(&[4.0, 4.5]).unwrap(), 0.0);
    }

    #[test]
    fn equidistant_tie_goes_to_lower_index() {
        let idx = KnnIndex::new(
            &reference(vec![vec![-1.0], vec![1.0]], vec![0.0, 1.0]),
            1,
            TaskKind::Binary,
            None,
        )
        .unwrap();
        assert_eq!(idx.neighbors(&[0.0]).unwrap(), vec![0]);
        assert_eq!(idx.feedback(&[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn full_k_is_global_vote_and_vote_ties_go_to_one() {
        let r = reference(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]], vec![0.0, 1.0, 0.0, 1.0]);
        let idx = KnnIndex::new(&r, 4, TaskKind::Binary, None).unwrap();
        for x in [-10.0, 0.5, 40.0] {
            assert_eq!(idx.feedback(&[x]).unwrap(), 1.0);
        }
        let idx = KnnIndex::new(&r, 4, TaskKind::Regression, None).unwrap();
        assert_eq!(idx.feedback(&[7.0]).unwrap(), 0.5);
        assert!(KnnIndex::new(&r, 5, TaskKind::Binary, None).is_err());
    }

    proptest! {
        #[test]
        fn agrees_with_exhaustive_scan(
            pts in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0, 0u8..2), 3..30),
            q in (-3.0f64..3.0, -3.0f64..3.0),
            k in 1usize..4,
        ) {
            let rows: Vec<Vec<f64>> = pts.iter().map(|p| vec![p.0, p.1]).collect();
            let labels: Vec<f64> = pts.iter().map(|p| p.2 as f64).collect();
            let r = reference(rows.clone(), labels.clone());
            let idx = KnnIndex::new(&r, k, TaskKind::Binary, None).unwrap();
            // Oracle: z-score, scan every record, stable sort by distance.
            let n = rows.len() as f64;
            let stats: Vec<(f64, f64)> = (0..2).map(|c| {
                let m = rows.iter().map(|r| r[c]).sum::<f64>() / n;
                let sd = (rows.iter().map(|r| (r[c] - m).powi(2)).sum::<f64>() / n).sqrt();
                (m, if sd > 1e-12 { sd } else { 1.0 })
            }).collect();
            let z = |v: &[f64]| -> Vec<f64> { v.iter().zip(&stats).map(|(x, (m, s))| (x - m) / s).collect() };
            let zq = z(&[q.0, q.1]);
            let mut all: Vec<(f64, usize)> = rows.iter().enumerate().map(|(i, r)| {
                let zr = z(r);
                ((zr[0] - zq[0]).powi(2) + (zr[1] - zq[1]).powi(2), i)
            }).collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0));
            let nn: Vec<usize> = all.iter().take(k).map(|p| p.1).collect();
            let ones = nn.iter().filter(|&&i| labels[i] == 1.0).count();
            let expected = if 2 * ones >= k { 1.0 } else { 0.0 };
            prop_assert_eq!(idx.neighbors(&[q.0, q.1]).unwrap(), nn);
            prop_assert_eq!(idx.feedback(&[q.0, q.1]).unwrap(), expected);
        }
    }
}
