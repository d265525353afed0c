use serde::{Deserialize, Serialize};

/// Per-column z-scoring. Constant columns keep scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Fits column statistics on a row-major block with `dim` columns.
    pub fn fit(flat: &[f64], dim: usize) -> Self {
        let n = if dim == 0 { 0 } else { flat.len() / dim };
        if n == 0 {
            return Self::identity(dim);
        }
        let mut mean = vec![0.0; dim];
        for row in flat.chunks_exact(dim) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut var = vec![0.0; dim];
        for row in flat.chunks_exact(dim) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n as f64).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    /// Centers column `j` but keeps its natural units.
    pub fn with_unit_scale(mut self, j: usize) -> Self {
        self.scale[j] = 1.0;
        self
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn apply_into(&self, row: &[f64], out: &mut Vec<f64>) {
        out.extend(
            row.iter()
                .zip(&self.mean)
                .zip(&self.scale)
                .map(|((v, m), s)| (v - m) / s),
        );
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(row.len());
        self.apply_into(row, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardized_columns_have_zero_mean_unit_variance() {
        let flat = [1.0, 10.0, 2.0, 10.0, 3.0, 10.0, 6.0, 10.0];
        let s = Standardizer::fit(&flat, 2);
        assert_eq!(s.scale()[1], 1.0);
        let z: Vec<f64> = flat.chunks(2).map(|r| s.apply(r)[0]).collect();
        let mean = z.iter().sum::<f64>() / 4.0;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
        assert_eq!(s.apply(&[3.0, 10.0])[1], 0.0);
    }
}
