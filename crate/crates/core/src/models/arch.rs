use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::numerics::{ParamVector, SplitMix64};

/// Model family selector used in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelKind {
    Linear,
    Mlp { hidden: usize },
}

impl ModelKind {
    pub fn architecture(&self, inputs: usize) -> Architecture {
        match *self {
            ModelKind::Linear => Architecture::Linear { inputs },
            ModelKind::Mlp { hidden } => Architecture::Mlp { inputs, hidden },
        }
    }
}

/// A scalar-output network over a fixed number of inputs.
///
/// * `Linear`: `out = weights . x + intercept`, segments `weights`, `intercept`.
/// * `Mlp`: `out = w2 . tanh(W1 x + b1) + b2`, segments `w1` (row-major,
///   `hidden x inputs`), `b1`, `w2`, `b2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Architecture {
    Linear { inputs: usize },
    Mlp { inputs: usize, hidden: usize },
}

impl Architecture {
    pub fn inputs(&self) -> usize {
        match *self {
            Architecture::Linear { inputs } | Architecture::Mlp { inputs, .. } => inputs,
        }
    }

    pub fn kind(&self) -> ModelKind {
        match *self {
            Architecture::Linear { .. } => ModelKind::Linear,
            Architecture::Mlp { hidden, .. } => ModelKind::Mlp { hidden },
        }
    }

    pub fn layout(&self) -> Vec<(&'static str, usize)> {
        match *self {
            Architecture::Linear { inputs } => vec![("weights", inputs), ("intercept", 1)],
            Architecture::Mlp { inputs, hidden } => {
                vec![("w1", hidden * inputs), ("b1", hidden), ("w2", hidden), ("b2", 1)]
            }
        }
    }

    pub fn n_params(&self) -> usize {
        self.layout().iter().map(|(_, n)| n).sum()
    }

    pub fn zeros(&self) -> ParamVector {
        ParamVector::zeros(&self.layout())
    }

    /// Linear models start at zero. Networks draw `W1 ~ N(0, 1/4)` column by
    /// column and `w2 ~ N(0, 1/hidden)` from separate streams, with zero
    /// biases, so appending an input column leaves the other draws unchanged.
    pub fn init(&self, seed: u64) -> ParamVector {
        let mut params = self.zeros();
        if let Architecture::Mlp { inputs, hidden } = *self {
            let values = params.values_mut();
            let mut rng = SplitMix64::for_stream(seed, "mlp-init-w1");
            for j in 0..inputs {
                for k in 0..hidden {
                    values[k * inputs + j] = 0.5 * rng.normal();
                }
            }
            let mut rng = SplitMix64::for_stream(seed, "mlp-init-w2");
            let w2 = hidden * inputs + hidden;
            let w2_scale = 1.0 / (hidden as f64).sqrt();
            for v in &mut values[w2..w2 + hidden] {
                *v = rng.normal() * w2_scale;
            }
        }
        params
    }

    /// Parameter ranges subject to L2 regularization (biases excluded).
    pub fn weight_ranges(&self) -> Vec<Range<usize>> {
        match *self {
            Architecture::Linear { inputs } => vec![0..inputs],
            Architecture::Mlp { inputs, hidden } => {
                let w1 = hidden * inputs;
                vec![0..w1, w1 + hidden..w1 + 2 * hidden]
            }
        }
    }

    /// Parameter indices of the first-layer weights fed by input `j`.
    pub fn input_weight_indices(&self, j: usize) -> Vec<usize> {
        match *self {
            Architecture::Linear { .. } => vec![j],
            Architecture::Mlp { inputs, hidden } => (0..hidden).map(|k| k * inputs + j).collect(),
        }
    }

    /// The first-layer weight matrix as `(range, rows, cols)`, row-major.
    pub fn weight_matrix(&self) -> (Range<usize>, usize, usize) {
        match *self {
            Architecture::Linear { inputs } => (0..inputs, 1, inputs),
            Architecture::Mlp { inputs, hidden } => (0..hidden * inputs, hidden, inputs),
        }
    }

    pub fn forward(&self, params: &[f64], x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.inputs());
        match *self {
            Architecture::Linear { inputs } => {
                let w = &params[..inputs];
                w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + params[inputs]
            }
            Architecture::Mlp { inputs, hidden } => {
                let (w1, rest) = params.split_at(hidden * inputs);
                let (b1, rest) = rest.split_at(hidden);
                let (w2, b2) = rest.split_at(hidden);
                let mut out = b2[0];
                for k in 0..hidden {
                    let row = &w1[k * inputs..(k + 1) * inputs];
                    let z = row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b1[k];
                    out += w2[k] * z.tanh();
                }
                out
            }
        }
    }

    /// `grad += dout * d(out)/d(params)`.
    pub fn accumulate_gradient(&self, params: &[f64], x: &[f64], dout: f64, grad: &mut [f64]) {
        match *self {
            Architecture::Linear { inputs } => {
                for (g, xi) in grad[..inputs].iter_mut().zip(x) {
                    *g += dout * xi;
                }
                grad[inputs] += dout;
            }
            Architecture::Mlp { inputs, hidden } => {
                let w1_len = hidden * inputs;
                let b1_at = w1_len;
                let w2_at = w1_len + hidden;
                let b2_at = w2_at + hidden;
                for k in 0..hidden {
                    let row = &params[k * inputs..(k + 1) * inputs];
                    let z = row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + params[b1_at + k];
                    let a = z.tanh();
                    grad[w2_at + k] += dout * a;
                    let dz = dout * params[w2_at + k] * (1.0 - a * a);
                    grad[b1_at + k] += dz;
                    for (g, xi) in grad[k * inputs..(k + 1) * inputs].iter_mut().zip(x) {
                        *g += dz * xi;
                    }
                }
                grad[b2_at] += dout;
            }
        }
    }

    /// `d(out)/d(x)`.
    pub fn input_gradient(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        match *self {
            Architecture::Linear { inputs } => params[..inputs].to_vec(),
            Architecture::Mlp { inputs, hidden } => {
                let w2_at = hidden * inputs + hidden;
                let mut g = vec![0.0; inputs];
                for k in 0..hidden {
                    let row = &params[k * inputs..(k + 1) * inputs];
                    let z = row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                        + params[hidden * inputs + k];
                    let a = z.tanh();
                    let scale = params[w2_at + k] * (1.0 - a * a);
                    for (gj, wkj) in g.iter_mut().zip(row) {
                        *gj += scale * wkj;
                    }
                }
                g
            }
        }
    }

    /// `grad += sum_j coeffs[j] * d(input_gradient_j)/d(params)`.
    pub fn accumulate_input_gradient_jacobian(
        &self,
        params: &[f64],
        x: &[f64],
        coeffs: &[f64],
        grad: &mut [f64],
    ) {
        match *self {
            Architecture::Linear { inputs } => {
                for (g, c) in grad[..inputs].iter_mut().zip(coeffs) {
                    *g += c;
                }
            }
            Architecture::Mlp { inputs, hidden } => {
                let b1_at = hidden * inputs;
                let w2_at = b1_at + hidden;
                for k in 0..hidden {
                    let row = &params[k * inputs..(k + 1) * inputs];
                    let z = row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + params[b1_at + k];
                    let a = z.tanh();
                    let s = 1.0 - a * a;
                    let ds = -2.0 * a * s;
                    let w2k = params[w2_at + k];
                    let m: f64 = coeffs.iter().zip(row).map(|(c, w)| c * w).sum();
                    grad[w2_at + k] += s * m;
                    grad[b1_at + k] += w2k * m * ds;
                    for l in 0..inputs {
                        grad[k * inputs + l] += w2k * (s * coeffs[l] + m * ds * x[l]);
                    }
                }
            }
        }
    }
}
