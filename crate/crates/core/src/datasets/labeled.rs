use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::numerics::SplitMix64;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Binary,
    Regression,
}

/// Feature rows with one label per row. Binary labels are `0.0` / `1.0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<f64>,
    feature_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        let n_features = feature_names.len();
        let mut features = Vec::with_capacity(rows.len() * n_features);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_features {
                return Err(Error::Invariant(format!(
                    "row {i} has {} features, expected {n_features}",
                    row.len()
                )));
            }
            features.extend_from_slice(row);
        }
        Self::from_flat(features, n_features, labels, feature_names)
    }

    pub fn from_flat(
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<f64>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if feature_names.len() != n_features {
            return Err(Error::Invariant(format!(
                "{} feature names for {n_features} features",
                feature_names.len()
            )));
        }
        if features.len() != labels.len() * n_features {
            return Err(Error::Invariant(format!(
                "{} feature values do not form {} rows of {n_features}",
                features.len(),
                labels.len()
            )));
        }
        if features.iter().chain(&labels).any(|v| !v.is_finite()) {
            return Err(Error::Invariant("dataset contains non-finite values".into()));
        }
        Ok(Self {
            features,
            n_features,
            labels,
            feature_names,
        })
    }

    /// Names `x0, x1, ...` for `n` columns.
    pub fn default_names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("x{i}")).collect()
    }

    pub fn n_records(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_records()).map(move |i| self.row(i))
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn features_flat(&self) -> &[f64] {
        &self.features
    }

    /// Same rows, different labels.
    pub fn with_labels(&self, labels: Vec<f64>) -> Result<Self> {
        Self::from_flat(
            self.features.clone(),
            self.n_features,
            labels,
            self.feature_names.clone(),
        )
    }

    /// Keeps only `columns`, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&c) = columns.iter().find(|&&c| c >= self.n_features) {
            return Err(Error::Dimension {
                expected: self.n_features,
                got: c + 1,
            });
        }
        let mut features = Vec::with_capacity(self.n_records() * columns.len());
        for row in self.rows() {
            features.extend(columns.iter().map(|&c| row[c]));
        }
        let names = columns.iter().map(|&c| self.feature_names[c].clone()).collect();
        Self::from_flat(features, columns.len(), self.labels.clone(), names)
    }

    /// Keeps only the records at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self {
            features,
            n_features: self.n_features,
            labels,
            feature_names: self.feature_names.clone(),
        }
    }

    /// Appends a named column as the last feature.
    pub fn append_column(&self, name: &str, values: &[f64]) -> Result<Self> {
        if values.len() != self.n_records() {
            return Err(Error::Dimension {
                expected: self.n_records(),
                got: values.len(),
            });
        }
        let mut features = Vec::with_capacity(self.n_records() * (self.n_features + 1));
        for (row, v) in self.rows().zip(values) {
            features.extend_from_slice(row);
            features.push(*v);
        }
        let mut names = self.feature_names.clone();
        names.push(name.to_string());
        Self::from_flat(features, self.n_features + 1, self.labels.clone(), names)
    }

    /// Hex SHA-256 over shape, feature bits and label bits.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.n_features as u64).to_le_bytes());
        hasher.update((self.n_records() as u64).to_le_bytes());
        for v in self.features.iter().chain(&self.labels) {
            hasher.update(v.to_bits().to_le_bytes());
        }
        hex(&hasher.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Lowercase hex SHA-256 digest.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

/// Partitions `ds` by `fractions` after a seeded shuffle.
///
/// Part sizes are `floor(f_i * n)`; the leftover records go one each to the
/// parts with the largest fractional remainders (lower index first on ties).
/// Each part keeps the records' original relative order.
pub fn split(ds: &LabeledDataset, fractions: &[f64], seed: u64) -> Result<Vec<LabeledDataset>> {
    if fractions.is_empty() || fractions.iter().any(|f| !(*f > 0.0)) {
        return Err(Error::InvalidArgument("fractions must be positive".into()));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("fractions sum to {total}, not 1")));
    }
    let n = ds.n_records();
    let mut sizes: Vec<usize> = fractions.iter().map(|f| (f * n as f64).floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = fractions[a] * n as f64 - sizes[a] as f64;
        let rb = fractions[b] * n as f64 - sizes[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &part in order.iter().cycle().take(n.saturating_sub(assigned)) {
        sizes[part] += 1;
    }

    let mut indices: Vec<usize> = (0..n).collect();
    SplitMix64::new(seed).shuffle(&mut indices);
    let mut parts = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for size in sizes {
        let mut chunk = indices[start..start + size].to_vec();
        chunk.sort_unstable();
        parts.push(ds.subset(&chunk));
        start += size;
    }
    Ok(parts)
}

/// One human comparison: in `context`, `preferred` beat `rejected`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceTriplet {
    pub context: Vec<f64>,
    pub preferred: Vec<f64>,
    pub rejected: Vec<f64>,
}

impl PreferenceTriplet {
    pub fn new(context: Vec<f64>, preferred: Vec<f64>, rejected: Vec<f64>) -> Result<Self> {
        if preferred == rejected {
            return Err(Error::Invariant("preferred and rejected outputs are identical".into()));
        }
        if preferred.len() != rejected.len() {
            return Err(Error::Dimension {
                expected: preferred.len(),
                got: rejected.len(),
            });
        }
        Ok(Self {
            context,
            preferred,
            rejected,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    Labels,
    Preferences,
    Both,
}

/// Human-intuition data: human-labeled records, preference triplets, or both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanSignalDataset {
    labeled: Option<LabeledDataset>,
    triplets: Vec<PreferenceTriplet>,
}

impl HumanSignalDataset {
    pub fn new(labeled: Option<LabeledDataset>, triplets: Vec<PreferenceTriplet>) -> Result<Self> {
        let labeled = labeled.filter(|l| !l.is_empty());
        if labeled.is_none() && triplets.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self { labeled, triplets })
    }

    pub fn from_labels(labeled: LabeledDataset) -> Result<Self> {
        Self::new(Some(labeled), Vec::new())
    }

    pub fn from_triplets(triplets: Vec<PreferenceTriplet>) -> Result<Self> {
        Self::new(None, triplets)
    }

    pub fn kind(&self) -> SignalKind {
        match (self.labeled.is_some(), self.triplets.is_empty()) {
            (true, true) => SignalKind::Labels,
            (false, false) => SignalKind::Preferences,
            _ => SignalKind::Both,
        }
    }

    pub fn labeled(&self) -> Option<&LabeledDataset> {
        self.labeled.as_ref()
    }

    /// The labeled part, or an error naming the technique that needs it.
    pub fn require_labeled(&self, technique: &str) -> Result<&LabeledDataset> {
        self.labeled
            .as_ref()
            .ok_or_else(|| Error::Config(format!("{technique} needs human-labeled records")))
    }

    pub fn triplets(&self) -> &[PreferenceTriplet] {
        &self.triplets
    }

    /// Hex SHA-256 over the labeled part's hash and every triplet's bits.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        if let Some(l) = &self.labeled {
            hasher.update(l.content_hash().as_bytes());
        }
        hasher.update((self.triplets.len() as u64).to_le_bytes());
        for t in &self.triplets {
            for part in [&t.context, &t.preferred, &t.rejected] {
                hasher.update((part.len() as u64).to_le_bytes());
                for v in part {
                    hasher.update(v.to_bits().to_le_bytes());
                }
            }
        }
        hex(&hasher.finalize())
    }
}
