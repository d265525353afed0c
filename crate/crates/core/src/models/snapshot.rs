use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::numerics::{ParamVector, Segment};
use crate::{Error, Result};

/// Serialized model: `{kind, segments, values, metadata}`.
///
/// Values are written in shortest round-trip form, so a snapshot reloads to
/// bit-identical parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSnapshot {
    pub kind: String,
    pub segments: Vec<Segment>,
    pub values: Vec<f64>,
    pub metadata: Value,
}

impl ModelSnapshot {
    pub fn new(kind: &str, params: &ParamVector, metadata: Value) -> Self {
        Self {
            kind: kind.to_string(),
            segments: params.segments().to_vec(),
            values: params.values().to_vec(),
            metadata,
        }
    }

    pub fn params(&self) -> Result<ParamVector> {
        ParamVector::from_parts(self.values.clone(), self.segments.clone())
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind != kind {
            return Err(Error::InvalidArgument(format!(
                "snapshot kind is {:?}, expected {kind:?}",
                self.kind
            )));
        }
        Ok(())
    }

    /// Deserializes `metadata[name]`.
    pub fn field<T: DeserializeOwned>(&self, name: &str) -> Result<T> {
        let value = self
            .metadata
            .get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("snapshot metadata lacks {name:?}")))?;
        serde_json::from_value(value.clone())
            .map_err(|e| Error::InvalidArgument(format!("snapshot metadata {name:?}: {e}")))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Invariant(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("snapshot: {e}")))
    }
}
