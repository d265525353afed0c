use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use centaur_core::datasets::sha256_hex;
use centaur_core::evaluation::RunConfig;
use centaur_core::rewards::{preference_seeds, Choice, PreferenceWorld, Query, RlhfLearner};
use serde::{Deserialize, Serialize};

use crate::api::{
    Candidate, ConstraintChange, ConstraintValues, MetricsPoint, MetricsSeries, ModelResponse, NamedValue, QueryItem,
};
use crate::error::{ServiceError, ServiceResult};

/// One line of a session's append-only log. A session's state is the fold
/// of its events, so replaying the log reproduces it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Created {
        session_id: String,
        config: RunConfig,
        at_ms: u64,
    },
    Query {
        query_id: String,
        query: Query,
        at_ms: u64,
    },
    Feedback {
        query_id: String,
        choice: Choice,
        received_at_ms: u64,
    },
    Constraints {
        values: ConstraintValues,
        at_ms: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Pending {
    query_id: String,
    query: Query,
}

/// A live preference session backed by an [`RlhfLearner`].
#[derive(Debug)]
pub struct Session {
    id: String,
    config: RunConfig,
    learner: RlhfLearner,
    feature_names: Vec<String>,
    pending: Option<Pending>,
    initial: MetricsPoint,
    series: Vec<MetricsPoint>,
    history: Vec<Event>,
    changes: Vec<ConstraintChange>,
    log: Option<File>,
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// Builds the learner a session config describes. The batch loop with the
/// same config and master seed starts from the identical state.
pub fn learner_for(config: &RunConfig) -> centaur_core::Result<RlhfLearner> {
    let settings = config.session.clone().unwrap_or_default();
    let mut config = config.clone();
    config.session = Some(settings.clone());
    let spec = config.session_world().expect("session block set above");
    let (world_seed, loop_seed) = preference_seeds(config.master_seed);
    let world = PreferenceWorld::build(&spec, world_seed)?;
    RlhfLearner::new(world, settings.rlhf, loop_seed)
}

fn point(learner: &RlhfLearner) -> ServiceResult<MetricsPoint> {
    let m = learner.metrics()?;
    Ok(MetricsPoint {
        rounds: learner.round(),
        phi_p: m.phi_p,
        phi_b: m.phi_b,
        mean_kl: m.mean_kl,
        mean_reward: m.mean_reward,
    })
}

fn named(names: &[String], values: &[f64]) -> Vec<NamedValue> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| NamedValue {
            name: names.get(i).cloned().unwrap_or_else(|| format!("c{i}")),
            value: *v,
        })
        .collect()
}

/// Names the two largest-magnitude features of a candidate.
fn describe(name: &str, features: &[NamedValue]) -> String {
    let mut order: Vec<&NamedValue> = features.iter().collect();
    order.sort_by(|a, b| b.value.abs().total_cmp(&a.value.abs()));
    let parts: Vec<String> = order
        .iter()
        .take(2)
        .map(|f| {
            let verb = if f.value >= 0.0 { "raises" } else { "lowers" };
            format!("{verb} {} ({:+.2})", f.name, f.value)
        })
        .collect();
    format!("{name}: {}", parts.join(", "))
}

impl Session {
    /// Starts a session; `log_dir` receives `<id>.jsonl` when given.
    pub fn create(id: String, mut config: RunConfig, log_dir: Option<&Path>) -> ServiceResult<Self> {
        if config.session.is_none() {
            config.session = Some(Default::default());
        }
        config.validate()?;
        let created = Event::Created {
            session_id: id.clone(),
            config,
            at_ms: now_ms(),
        };
        let mut session = Self::from_created(&created)?;
        if let Some(dir) = log_dir {
            let path = log_path(dir, &id);
            let file = OpenOptions::new().create_new(true).append(true).open(&path)?;
            session.log = Some(file);
            session.append(&created)?;
        }
        Ok(session)
    }

    fn from_created(event: &Event) -> ServiceResult<Self> {
        let Event::Created { session_id, config, .. } = event else {
            return Err(ServiceError::Internal("a session log must start with a created event".into()));
        };
        let learner = learner_for(config)?;
        let initial = point(&learner)?;
        Ok(Self {
            id: session_id.clone(),
            config: config.clone(),
            feature_names: config.experiment.generator.feature_names(),
            learner,
            pending: None,
            initial,
            series: Vec::new(),
            history: vec![event.clone()],
            changes: Vec::new(),
            log: None,
        })
    }

    /// Rebuilds a session from its log and reopens the log for appending.
    pub fn replay(path: &Path) -> ServiceResult<Self> {
        let reader = BufReader::new(File::open(path)?);
        let mut session: Option<Session> = None;
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let event: Event = serde_json::from_str(&line)
                .map_err(|e| ServiceError::Internal(format!("{}:{}: {e}", path.display(), n + 1)))?;
            match session.as_mut() {
                None => session = Some(Self::from_created(&event)?),
                Some(s) => s.apply(event)?,
            }
        }
        let mut session =
            session.ok_or_else(|| ServiceError::Internal(format!("{} is empty", path.display())))?;
        session.log = Some(OpenOptions::new().append(true).open(path)?);
        Ok(session)
    }

    /// Applies a validated event to the in-memory state.
    fn apply(&mut self, event: Event) -> ServiceResult<()> {
        match &event {
            Event::Created { .. } => {
                return Err(ServiceError::Internal("duplicate created event".into()));
            }
            Event::Query { query_id, query, .. } => {
                self.pending = Some(Pending {
                    query_id: query_id.clone(),
                    query: query.clone(),
                });
            }
            Event::Feedback { query_id, choice, .. } => {
                let pending = match &self.pending {
                    Some(p) if &p.query_id == query_id => p.clone(),
                    Some(p) => {
                        return Err(ServiceError::Conflict(format!(
                            "query {query_id} is stale; the pending query is {}",
                            p.query_id
                        )))
                    }
                    None => return Err(ServiceError::Conflict(format!("query {query_id} is not pending"))),
                };
                self.learner.incorporate(&[(pending.query, *choice)])?;
                self.pending = None;
                self.series.push(point(&self.learner)?);
            }
            Event::Constraints { values, .. } => {
                let mut config = self.learner.config().clone();
                values.apply(&mut config);
                self.learner.set_config(config)?;
                self.changes.push(ConstraintChange {
                    after_round: self.learner.round(),
                    values: *values,
                });
            }
        }
        self.history.push(event);
        Ok(())
    }

    fn append(&mut self, event: &Event) -> ServiceResult<()> {
        if let Some(file) = self.log.as_mut() {
            let line = serde_json::to_string(event).map_err(|e| ServiceError::Internal(e.to_string()))?;
            writeln!(file, "{line}")?;
            file.flush()?;
        }
        Ok(())
    }

    /// Applies then persists; a rejected event leaves no trace.
    fn commit(&mut self, event: Event) -> ServiceResult<()> {
        self.apply(event.clone())?;
        self.append(&event)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn learner(&self) -> &RlhfLearner {
        &self.learner
    }

    pub fn history(&self) -> &[Event] {
        &self.history
    }

    /// The pending query, selecting a new one if none is pending.
    pub fn next_query(&mut self) -> ServiceResult<QueryItem> {
        if self.pending.is_none() {
            let query = self.learner.select_queries(1)?.remove(0);
            let query_id = format!("{}-q{}", &self.id[..self.id.len().min(8)], self.learner.round());
            self.commit(Event::Query {
                query_id,
                query,
                at_ms: now_ms(),
            })?;
        }
        let pending = self.pending.as_ref().expect("set above");
        self.render(pending)
    }

    fn render(&self, pending: &Pending) -> ServiceResult<QueryItem> {
        let world = self.learner.world();
        let q = &pending.query;
        let x = &world.pool[q.context_index];
        let candidates = [q.first, q.second]
            .into_iter()
            .map(|a| {
                let features = named(&self.feature_names, &world.actions.encode(x, a)?);
                let name = world.actions.names()[a].clone();
                Ok(Candidate {
                    action: a,
                    description: describe(&name, &features),
                    name,
                    features,
                })
            })
            .collect::<ServiceResult<Vec<_>>>()?;
        Ok(QueryItem {
            query_id: pending.query_id.clone(),
            round: self.learner.round(),
            context_index: q.context_index,
            context: named(&self.feature_names, x),
            candidates,
        })
    }

    pub fn submit(&mut self, query_id: String, choice: Choice) -> ServiceResult<MetricsPoint> {
        self.commit(Event::Feedback {
            query_id,
            choice,
            received_at_ms: now_ms(),
        })?;
        Ok(*self.series.last().expect("feedback appends a point"))
    }

    pub fn constraints(&self) -> ConstraintValues {
        ConstraintValues::of(self.learner.config())
    }

    pub fn set_constraints(&mut self, values: ConstraintValues) -> ServiceResult<ConstraintValues> {
        self.commit(Event::Constraints {
            values,
            at_ms: now_ms(),
        })?;
        Ok(self.constraints())
    }

    pub fn metrics(&self) -> MetricsSeries {
        MetricsSeries {
            session_id: self.id.clone(),
            initial: self.initial,
            series: self.series.clone(),
            constraint_changes: self.changes.clone(),
        }
    }

    pub fn model(&self) -> ModelResponse {
        ModelResponse {
            session_id: self.id.clone(),
            rounds: self.learner.round(),
            n_triplets: self.learner.triplets().len(),
            constraints: self.constraints(),
            policy: self.learner.policy().snapshot(),
            reference: self.learner.world().reference.snapshot(),
            reward: self.learner.reward().snapshot(),
            state_hash: self.state_hash(),
        }
    }

    /// SHA-256 over parameters, triplets, metrics, constraints and the pending query.
    pub fn state_hash(&self) -> String {
        let state = serde_json::json!({
            "policy": self.learner.policy().snapshot(),
            "reward": self.learner.reward().snapshot(),
            "triplets": self.learner.triplets(),
            "series": self.series,
            "constraints": self.constraints(),
            "pending": self.pending.as_ref().map(|p| (&p.query_id, &p.query)),
        });
        sha256_hex(state.to_string().as_bytes())
    }
}

pub fn log_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.jsonl"))
}
