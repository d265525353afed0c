//! Live preference sessions over HTTP.
//!
//! A human answers pairwise queries in place of the simulated oracle; every
//! answer refits the reward model and re-optimizes the policy. Sessions are
//! persisted as append-only JSON-lines logs and rebuilt by replay.

pub mod api;
mod error;
mod session;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Path, Request, State};
use axum::http::StatusCode;
use axum::middleware::{self, Next};
use axum::response::Response;
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use centaur_core::evaluation::RunConfig;
use tokio::net::TcpListener;

use api::{
    parse_body, ConstraintUpdate, ConstraintValues, FeedbackRequest, MetricsPoint, MetricsSeries, ModelResponse,
    QueryItem, SessionCreated,
};
pub use error::{ServiceError, ServiceResult};
pub use session::{learner_for, log_path, Event, Session};

#[derive(Debug, Clone, Default)]
pub struct ServiceOptions {
    /// Config used when `POST /sessions` has an empty body.
    pub default_config: Option<RunConfig>,
    /// Directory of session logs; sessions found there are restored at startup.
    pub log_dir: Option<PathBuf>,
}

type SessionRef = Arc<Mutex<Session>>;

struct Inner {
    options: ServiceOptions,
    sessions: RwLock<HashMap<String, SessionRef>>,
}

/// Shared service state. Each session has its own lock, so mutations of one
/// session are serialized while distinct sessions proceed independently.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    pub fn new(options: ServiceOptions) -> ServiceResult<Self> {
        let mut sessions = HashMap::new();
        if let Some(dir) = &options.log_dir {
            std::fs::create_dir_all(dir)?;
            let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            paths.sort();
            for path in paths {
                let session = Session::replay(&path)?;
                sessions.insert(session.id().to_string(), Arc::new(Mutex::new(session)));
            }
        }
        Ok(Self {
            inner: Arc::new(Inner {
                options,
                sessions: RwLock::new(sessions),
            }),
        })
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.inner.sessions.read().expect("lock").keys().cloned().collect();
        ids.sort();
        ids
    }

    fn session(&self, id: &str) -> ServiceResult<SessionRef> {
        self.inner
            .sessions
            .read()
            .expect("lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    /// Runs `f` on the locked session off the async executor.
    async fn with_session<T, F>(&self, id: &str, f: F) -> ServiceResult<T>
    where
        T: Send + 'static,
        F: FnOnce(&mut Session) -> ServiceResult<T> + Send + 'static,
    {
        let session = self.session(id)?;
        tokio::task::spawn_blocking(move || {
            let mut guard = session.lock().unwrap_or_else(|e| e.into_inner());
            f(&mut guard)
        })
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?
    }

    pub async fn create_session(&self, config: RunConfig) -> ServiceResult<SessionCreated> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let dir = self.inner.options.log_dir.clone();
        let session = tokio::task::spawn_blocking(move || Session::create(id, config, dir.as_deref()))
            .await
            .map_err(|e| ServiceError::Internal(e.to_string()))??;
        let created = SessionCreated {
            session_id: session.id().to_string(),
            initial: session.metrics().initial,
        };
        self.inner
            .sessions
            .write()
            .expect("lock")
            .insert(created.session_id.clone(), Arc::new(Mutex::new(session)));
        Ok(created)
    }
}

async fn healthz() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn create(State(state): State<AppState>, body: Bytes) -> ServiceResult<(StatusCode, Json<SessionCreated>)> {
    let config = if body.iter().all(u8::is_ascii_whitespace) {
        state
            .inner
            .options
            .default_config
            .clone()
            .ok_or_else(|| ServiceError::Unprocessable("request body: a session config is required".into()))?
    } else {
        let config: RunConfig = parse_body(&body)?;
        config.validate()?;
        config
    };
    Ok((StatusCode::CREATED, Json(state.create_session(config).await?)))
}

async fn query(State(state): State<AppState>, Path(id): Path<String>) -> ServiceResult<Json<QueryItem>> {
    state.with_session(&id, |s| s.next_query()).await.map(Json)
}

async fn feedback(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ServiceResult<Json<MetricsPoint>> {
    state.session(&id)?;
    let req: FeedbackRequest = parse_body(&body)?;
    state.with_session(&id, move |s| s.submit(req.query_id, req.choice)).await.map(Json)
}

async fn metrics(State(state): State<AppState>, Path(id): Path<String>) -> ServiceResult<Json<MetricsSeries>> {
    state.with_session(&id, |s| Ok(s.metrics())).await.map(Json)
}

async fn constraints(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ServiceResult<Json<ConstraintValues>> {
    state.session(&id)?;
    let update: ConstraintUpdate = parse_body(&body)?;
    state
        .with_session(&id, move |s| {
            let next = update.merge(s.constraints())?;
            s.set_constraints(next)
        })
        .await
        .map(Json)
}

async fn model(State(state): State<AppState>, Path(id): Path<String>) -> ServiceResult<Json<ModelResponse>> {
    state.with_session(&id, |s| Ok(s.model())).await.map(Json)
}

async fn log_request(req: Request, next: Next) -> Response {
    let method = req.method().clone();
    let path = req.uri().path().to_string();
    let start = Instant::now();
    let response = next.run(req).await;
    tracing::info!(
        "{method} {path} {} {:.1}ms",
        response.status().as_u16(),
        start.elapsed().as_secs_f64() * 1e3
    );
    response
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create))
        .route("/sessions/{id}/query", get(query))
        .route("/sessions/{id}/feedback", post(feedback))
        .route("/sessions/{id}/metrics", get(metrics))
        .route("/sessions/{id}/constraints", patch(constraints))
        .route("/sessions/{id}/model", get(model))
        .layer(middleware::from_fn(log_request))
        .with_state(state)
}

/// Serves until ctrl-c.
pub async fn serve(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
