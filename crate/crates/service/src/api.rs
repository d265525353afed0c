//! Request and response bodies.

use centaur_core::models::ModelSnapshot;
use centaur_core::rewards::{Choice, RlhfConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{ServiceError, ServiceResult};

/// Body of `201 POST /sessions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub initial: MetricsPoint,
}

/// A named scalar, for rendering feature rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub action: usize,
    pub name: String,
    pub features: Vec<NamedValue>,
    pub description: String,
}

/// A pending comparison: one context and exactly two candidate actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryItem {
    pub query_id: String,
    pub round: usize,
    pub context_index: usize,
    pub context: Vec<NamedValue>,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackRequest {
    pub query_id: String,
    pub choice: Choice,
}

/// Policy quality after `rounds` completed feedback rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsPoint {
    pub rounds: usize,
    pub phi_p: f64,
    pub phi_b: f64,
    pub mean_kl: f64,
    pub mean_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintChange {
    /// Completed rounds when the change was acknowledged.
    pub after_round: usize,
    pub values: ConstraintValues,
}

/// Body of `GET /sessions/{id}/metrics`. `series` has one point per
/// completed feedback round; `initial` is the state before any feedback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSeries {
    pub session_id: String,
    pub initial: MetricsPoint,
    pub series: Vec<MetricsPoint>,
    pub constraint_changes: Vec<ConstraintChange>,
}

/// The live constraint knobs. `lambda` scales the learned human reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintValues {
    pub lambda: f64,
    pub beta: f64,
    pub c1: Option<f64>,
    pub importance_cap: Option<f64>,
}

impl ConstraintValues {
    pub fn of(config: &RlhfConfig) -> Self {
        Self {
            lambda: config.human_weight,
            beta: config.beta,
            c1: config.c1,
            importance_cap: config.importance_cap,
        }
    }

    pub fn apply(&self, config: &mut RlhfConfig) {
        config.human_weight = self.lambda;
        config.beta = self.beta;
        config.c1 = self.c1;
        config.importance_cap = self.importance_cap;
    }
}

/// Body of `PATCH /sessions/{id}/constraints`. Absent keys are unchanged;
/// `null` removes a cap.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintUpdate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, deserialize_with = "present", skip_serializing_if = "Option::is_none")]
    pub c1: Option<Option<f64>>,
    #[serde(default, deserialize_with = "present", skip_serializing_if = "Option::is_none")]
    pub importance_cap: Option<Option<f64>>,
}

fn present<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Option<f64>>, D::Error> {
    Option::<f64>::deserialize(d).map(Some)
}

impl ConstraintUpdate {
    /// Applies the update to `current`; negative values are rejected by key.
    pub fn merge(&self, current: ConstraintValues) -> ServiceResult<ConstraintValues> {
        let check = |key: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(ServiceError::Unprocessable(format!(
                    "{key}: must be finite and nonnegative, got {v}"
                )))
            }
        };
        let mut next = current;
        if let Some(v) = self.lambda {
            next.lambda = check("lambda", v)?;
        }
        if let Some(v) = self.beta {
            next.beta = check("beta", v)?;
        }
        if let Some(v) = self.c1 {
            next.c1 = v.map(|r| check("c1", r)).transpose()?;
        }
        if let Some(v) = self.importance_cap {
            next.importance_cap = v.map(|r| check("importance_cap", r)).transpose()?;
        }
        Ok(next)
    }
}

/// Body of `GET /sessions/{id}/model`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub session_id: String,
    pub rounds: usize,
    pub n_triplets: usize,
    pub constraints: ConstraintValues,
    pub policy: ModelSnapshot,
    pub reference: ModelSnapshot,
    pub reward: ModelSnapshot,
    /// SHA-256 over the session's full mutable state.
    pub state_hash: String,
}

/// Parses a JSON body; errors name the offending key.
pub fn parse_body<T: DeserializeOwned>(body: &[u8]) -> ServiceResult<T> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." || path.is_empty() {
            ServiceError::Unprocessable(inner.to_string())
        } else {
            ServiceError::Unprocessable(format!("{path}: {inner}"))
        }
    })
}
