use super::{Architecture, ModelKind, ModelSnapshot};
use crate::numerics::ParamVector;
use crate::{Error, Result};

/// Scalar scorer of `(context, candidate)` pairs over their concatenation.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardModel {
    arch: Architecture,
    params: ParamVector,
    context_dim: usize,
    candidate_dim: usize,
}

impl RewardModel {
    /// A freshly initialized reward model (all zeros for the linear kind).
    pub fn new(kind: ModelKind, context_dim: usize, candidate_dim: usize, seed: u64) -> Self {
        let arch = kind.architecture(context_dim + candidate_dim);
        Self {
            arch,
            params: arch.init(seed),
            context_dim,
            candidate_dim,
        }
    }

    pub fn from_parts(arch: Architecture, params: ParamVector, context_dim: usize, candidate_dim: usize) -> Result<Self> {
        if arch.inputs() != context_dim + candidate_dim {
            return Err(Error::Dimension {
                expected: context_dim + candidate_dim,
                got: arch.inputs(),
            });
        }
        if params.len() != arch.n_params() {
            return Err(Error::Dimension {
                expected: arch.n_params(),
                got: params.len(),
            });
        }
        Ok(Self {
            arch,
            params,
            context_dim,
            candidate_dim,
        })
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn context_dim(&self) -> usize {
        self.context_dim
    }

    pub fn candidate_dim(&self) -> usize {
        self.candidate_dim
    }

    pub fn with_params(&self, params: ParamVector) -> Result<Self> {
        Self::from_parts(self.arch, params, self.context_dim, self.candidate_dim)
    }

    pub fn encode(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.context_dim {
            return Err(Error::Dimension {
                expected: self.context_dim,
                got: x.len(),
            });
        }
        if y.len() != self.candidate_dim {
            return Err(Error::Dimension {
                expected: self.candidate_dim,
                got: y.len(),
            });
        }
        let mut v = Vec::with_capacity(x.len() + y.len());
        v.extend_from_slice(x);
        v.extend_from_slice(y);
        Ok(v)
    }

    pub fn score(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let input = self.encode(x, y)?;
        Ok(self.arch.forward(self.params.values(), &input))
    }

    pub fn snapshot(&self) -> ModelSnapshot {
        let metadata = serde_json::json!({
            "architecture": self.arch,
            "context_dim": self.context_dim,
            "candidate_dim": self.candidate_dim,
        });
        ModelSnapshot::new("reward", &self.params, metadata)
    }

    pub fn from_snapshot(snapshot: &ModelSnapshot) -> Result<Self> {
        snapshot.expect_kind("reward")?;
        Self::from_parts(
            snapshot.field("architecture")?,
            snapshot.params()?,
            snapshot.field("context_dim")?,
            snapshot.field("candidate_dim")?,
        )
    }
}

pub fn reward_score(rm: &RewardModel, x: &[f64], y: &[f64]) -> Result<f64> {
    rm.score(x, y)
}
