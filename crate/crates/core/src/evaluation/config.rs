use serde::{Deserialize, Serialize};

use super::ExperimentSpec;
use crate::datasets::sha256_hex;
use crate::rewards::{RlhfConfig, WorldSettings, WorldSpec};
use crate::{Error, Result};

/// The config schema version this build reads.
pub const SCHEMA_VERSION: u32 = 1;

/// Settings for a live preference session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct SessionSettings {
    pub world: WorldSettings,
    pub rlhf: RlhfConfig,
}


#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSettings {
    /// Output directory when the command line gives none.
    pub dir: Option<String>,
    /// Write summary.csv (and frontier.csv for sweeps) next to the JSON.
    pub csv: Option<bool>,
}

/// The JSON document read by the command line and the session service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub master_seed: u64,
    pub experiment: ExperimentSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<SessionSettings>,
    #[serde(default)]
    pub output: OutputSettings,
}

impl RunConfig {
    /// Parses and validates; errors name the offending key.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." || path.is_empty() {
                Error::Config(inner.to_string())
            } else {
                Error::Config(format!("{path}: {inner}"))
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                self.schema_version
            )));
        }
        self.experiment
            .validate()
            .map_err(|e| Error::Config(format!("experiment: {}", strip(&e))))?;
        if let Some(s) = &self.session {
            s.world.validate().map_err(|e| Error::Config(format!("session.world: {}", strip(&e))))?;
            s.rlhf.validate().map_err(|e| Error::Config(format!("session.rlhf: {}", strip(&e))))?;
        }
        Ok(())
    }

    /// The preference world of a live session, if the config has a session block.
    pub fn session_world(&self) -> Option<WorldSpec> {
        self.session.as_ref().map(|s| WorldSpec {
            generator: self.experiment.generator.clone(),
            human: self.experiment.human.clone(),
            settings: s.world.clone(),
        })
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).unwrap_or_default().as_bytes())
    }
}

fn strip(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}
