use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use centaur_core::evaluation::RunConfig;
use centaur_core::models::SoftmaxPolicy;
use centaur_core::rewards::{
    mean_kl, oracle_seed, preference_seeds, rlhf_loop, simulated_choice, Choice, PreferenceWorld, Query,
};
use centaur_service::api::{ConstraintValues, MetricsPoint, MetricsSeries, ModelResponse, QueryItem, SessionCreated};
use centaur_service::{router, AppState, ServiceOptions};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn config_json(seed: u64) -> Value {
    json!({
        "schema_version": 1,
        "master_seed": seed,
        "experiment": {
            "generator": {
                "n_records": 100, "d_shared": 3, "d_private": 2,
                "true_weights": [2.0, -1.5, 1.0, 1.2, -1.0]
            },
            "arms": [{"name": "m", "arm": {"type": "machine_only"}}],
            "replications": 1
        },
        "session": {
            "world": {"n_actions": 4, "n_pool": 60, "n_eval": 40, "n_logged": 80},
            "rlhf": {"beta": 0.1}
        }
    })
}

fn app() -> Router {
    router(AppState::new(ServiceOptions::default()).unwrap())
}

async fn send(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let body = body.map_or_else(Body::empty, |v| Body::from(v.to_string()));
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body)
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn create(app: &Router, seed: u64) -> String {
    let (status, body) = send(app, Method::POST, "/sessions", Some(config_json(seed))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    serde_json::from_value::<SessionCreated>(body).unwrap().session_id
}

async fn query(app: &Router, id: &str) -> QueryItem {
    let (status, body) = send(app, Method::GET, &format!("/sessions/{id}/query"), None).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    serde_json::from_value(body).unwrap()
}

async fn answer(app: &Router, id: &str, query_id: &str, choice: &str) -> (StatusCode, Value) {
    send(
        app,
        Method::POST,
        &format!("/sessions/{id}/feedback"),
        Some(json!({"query_id": query_id, "choice": choice})),
    )
    .await
}

async fn model(app: &Router, id: &str) -> ModelResponse {
    let (status, body) = send(app, Method::GET, &format!("/sessions/{id}/model"), None).await;
    assert_eq!(status, StatusCode::OK);
    serde_json::from_value(body).unwrap()
}

async fn metrics(app: &Router, id: &str) -> MetricsSeries {
    let (status, body) = send(app, Method::GET, &format!("/sessions/{id}/metrics"), None).await;
    assert_eq!(status, StatusCode::OK);
    serde_json::from_value(body).unwrap()
}

fn to_query(item: &QueryItem) -> Query {
    Query {
        context_index: item.context_index,
        first: item.candidates[0].action,
        second: item.candidates[1].action,
    }
}

#[tokio::test]
async fn health_endpoint_answers() {
    let (status, body) = send(&app(), Method::GET, "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
}

#[tokio::test]
async fn create_validates_config_and_names_keys() {
    let app = app();
    let mut bad = config_json(1);
    bad["experiment"]["replications"] = json!("many");
    let (status, body) = send(&app, Method::POST, "/sessions", Some(bad)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["error"].as_str().unwrap().contains("replications"), "{body}");

    let mut unknown = config_json(1);
    unknown["session"]["rlhf"]["betta"] = json!(1.0);
    let (status, body) = send(&app, Method::POST, "/sessions", Some(unknown)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["error"].as_str().unwrap().contains("betta"), "{body}");

    let mut negative = config_json(1);
    negative["session"]["rlhf"]["beta"] = json!(-1.0);
    let (status, body) = send(&app, Method::POST, "/sessions", Some(negative)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["error"].as_str().unwrap().contains("beta"), "{body}");

    let (status, _) = send(&app, Method::POST, "/sessions", None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn empty_body_uses_the_default_config() {
    let config = RunConfig::from_json(&config_json(3).to_string()).unwrap();
    let app = router(
        AppState::new(ServiceOptions {
            default_config: Some(config),
            log_dir: None,
        })
        .unwrap(),
    );
    let (status, _) = send(&app, Method::POST, "/sessions", None).await;
    assert_eq!(status, StatusCode::CREATED);
}

#[tokio::test]
async fn sessions_from_one_config_are_independent_but_start_equal() {
    let app = app();
    let (_, a) = send(&app, Method::POST, "/sessions", Some(config_json(5))).await;
    let (_, b) = send(&app, Method::POST, "/sessions", Some(config_json(5))).await;
    let a: SessionCreated = serde_json::from_value(a).unwrap();
    let b: SessionCreated = serde_json::from_value(b).unwrap();
    assert_ne!(a.session_id, b.session_id);
    assert_eq!(a.initial, b.initial);
    assert_eq!(a.initial.rounds, 0);
}

#[tokio::test]
async fn unknown_sessions_are_404() {
    let app = app();
    for (method, path, body) in [
        (Method::GET, "/sessions/nope/query", None),
        (Method::POST, "/sessions/nope/feedback", Some(json!({"query_id": "x", "choice": "first"}))),
        (Method::GET, "/sessions/nope/metrics", None),
        (Method::PATCH, "/sessions/nope/constraints", Some(json!({"beta": 1.0}))),
        (Method::GET, "/sessions/nope/model", None),
    ] {
        let (status, _) = send(&app, method, path, body).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{path}");
    }
}

#[tokio::test]
async fn query_is_idempotent_and_has_the_minimal_top_two_gap() {
    let app = app();
    let id = create(&app, 7).await;
    // Move past the untrained reward so gaps differ between contexts.
    let first = query(&app, &id).await;
    assert_eq!(answer(&app, &id, &first.query_id, "first").await.0, StatusCode::OK);

    let q1 = query(&app, &id).await;
    let q2 = query(&app, &id).await;
    assert_eq!(q1, q2);
    assert_eq!(q1.candidates.len(), 2);
    assert_ne!(q1.candidates[0].action, q1.candidates[1].action);
    assert_eq!(q1.context.len(), 5);
    assert!(q1.candidates.iter().all(|c| !c.description.is_empty()));

    // Oracle: replay the session's one answered round in a fresh learner and
    // scan every pool context for the policy's top-2 pair and reward gap.
    let config = RunConfig::from_json(&config_json(7).to_string()).unwrap();
    let mut learner = centaur_service::learner_for(&config).unwrap();
    learner.incorporate(&[(to_query(&first), Choice::First)]).unwrap();
    let mut best = (f64::INFINITY, usize::MAX);
    for (i, x) in learner.world().pool.iter().enumerate() {
        let pi = learner.policy().distribution(x).unwrap();
        let mut order: Vec<usize> = (0..pi.len()).collect();
        order.sort_by(|a, b| pi[*b].total_cmp(&pi[*a]).then(a.cmp(b)));
        let gap = learner.reward_gap(i, order[0], order[1]).unwrap();
        if gap < best.0 {
            best = (gap, i);
        }
    }
    assert_eq!(q1.context_index, best.1);
}

#[tokio::test]
async fn feedback_updates_metrics_and_rejects_stale_queries() {
    let app = app();
    let id = create(&app, 8).await;
    let q = query(&app, &id).await;
    let (status, body) = answer(&app, &id, "stale", "first").await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");

    let (status, body) = answer(&app, &id, &q.query_id, "second").await;
    assert_eq!(status, StatusCode::OK);
    let point: MetricsPoint = serde_json::from_value(body).unwrap();
    assert_eq!(point.rounds, 1);

    // Answering the same query twice is stale.
    let (status, _) = answer(&app, &id, &q.query_id, "second").await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (status, body) = answer(&app, &id, &q.query_id, "maybe").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["error"].as_str().unwrap().contains("choice"), "{body}");

    let m = metrics(&app, &id).await;
    assert_eq!(m.series.len(), 1);
    assert_eq!(m.series[0], point);
}

#[tokio::test]
async fn skip_clears_the_query_without_a_triplet() {
    let app = app();
    let id = create(&app, 9).await;
    let before = model(&app, &id).await;
    let q = query(&app, &id).await;
    assert_eq!(answer(&app, &id, &q.query_id, "skip").await.0, StatusCode::OK);
    let after = model(&app, &id).await;
    assert_eq!(after.n_triplets, 0);
    assert_eq!(after.rounds, 1);
    assert_eq!(after.policy, before.policy);
    assert_eq!(after.reward, before.reward);
    let next = query(&app, &id).await;
    assert_ne!(next.query_id, q.query_id);
    assert_eq!(metrics(&app, &id).await.series.len(), 1);
}

#[tokio::test]
async fn scripted_oracle_session_matches_the_batch_loop() {
    let seed = 11;
    let rounds = 20;
    let config = RunConfig::from_json(&config_json(seed).to_string()).unwrap();
    let (world_seed, loop_seed) = preference_seeds(seed);
    let world = PreferenceWorld::build(&config.session_world().unwrap(), world_seed).unwrap();
    let rlhf = config.session.as_ref().unwrap().rlhf.clone();
    let batch = rlhf_loop(&world, &rlhf, rounds, 1, loop_seed).unwrap();

    let app = app();
    let id = create(&app, seed).await;
    for round in 0..rounds {
        let item = query(&app, &id).await;
        assert_eq!(item.round, round);
        let choice = simulated_choice(&world.human, &world, &to_query(&item), oracle_seed(loop_seed, round, 0)).unwrap();
        let choice = serde_json::to_value(choice).unwrap();
        let (status, _) = answer(&app, &id, &item.query_id, choice.as_str().unwrap()).await;
        assert_eq!(status, StatusCode::OK);
    }
    let live = model(&app, &id).await;
    assert_eq!(live.rounds, rounds);
    let drift = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert_eq!(live.policy.values.len(), batch.policy.params().len());
    assert!(drift(&live.policy.values, batch.policy.params().values()) <= 1e-9);
    assert!(drift(&live.reward.values, batch.reward.params().values()) <= 1e-9);

    let series = metrics(&app, &id).await.series;
    assert_eq!(series.len(), rounds);
    for (p, t) in series.iter().zip(&batch.trace) {
        assert!((p.mean_kl - t.mean_kl).abs() <= 1e-9);
        assert!((p.phi_b - t.phi_b).abs() <= 1e-9);
    }
}

#[tokio::test]
async fn constraints_are_validated_and_acknowledged() {
    let app = app();
    let id = create(&app, 12).await;
    let path = format!("/sessions/{id}/constraints");
    let (status, body) = send(&app, Method::PATCH, &path, Some(json!({"beta": -0.5}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["error"].as_str().unwrap().contains("beta"));
    let (status, body) = send(&app, Method::PATCH, &path, Some(json!({"lamda": 1.0}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["error"].as_str().unwrap().contains("lamda"));

    let (status, body) = send(&app, Method::PATCH, &path, Some(json!({"lambda": 2.0, "c1": 0.5}))).await;
    assert_eq!(status, StatusCode::OK);
    let ack: ConstraintValues = serde_json::from_value(body).unwrap();
    assert_eq!(ack, ConstraintValues { lambda: 2.0, beta: 0.1, c1: Some(0.5), importance_cap: None });

    let (_, body) = send(&app, Method::PATCH, &path, Some(json!({"c1": null, "importance_cap": 3.0}))).await;
    let ack: ConstraintValues = serde_json::from_value(body).unwrap();
    assert_eq!(ack.c1, None);
    assert_eq!(ack.importance_cap, Some(3.0));
    assert_eq!(ack.lambda, 2.0);
    assert_eq!(model(&app, &id).await.constraints, ack);
    assert_eq!(metrics(&app, &id).await.constraint_changes.len(), 2);
}

#[tokio::test]
async fn huge_beta_pins_the_policy_to_the_reference() {
    let app = app();
    let id = create(&app, 13).await;
    let path = format!("/sessions/{id}/constraints");
    assert_eq!(send(&app, Method::PATCH, &path, Some(json!({"beta": 1e6}))).await.0, StatusCode::OK);
    for _ in 0..5 {
        let q = query(&app, &id).await;
        let (status, body) = answer(&app, &id, &q.query_id, "first").await;
        assert_eq!(status, StatusCode::OK);
        let point: MetricsPoint = serde_json::from_value(body).unwrap();
        assert!(point.mean_kl <= 1e-3, "{}", point.mean_kl);
    }
    assert_eq!(metrics(&app, &id).await.series.len(), 5);
}

#[tokio::test]
async fn model_snapshot_round_trips() {
    let app = app();
    let id = create(&app, 14).await;
    let q = query(&app, &id).await;
    answer(&app, &id, &q.query_id, "first").await;
    let m = model(&app, &id).await;
    let text = serde_json::to_string(&m).unwrap();
    let back: ModelResponse = serde_json::from_str(&text).unwrap();
    assert_eq!(back, m);
    let policy = SoftmaxPolicy::from_snapshot(&m.policy).unwrap();
    let reference = SoftmaxPolicy::from_snapshot(&m.reference).unwrap();
    let config = RunConfig::from_json(&config_json(14).to_string()).unwrap();
    let learner = centaur_service::learner_for(&config).unwrap();
    let kl = mean_kl(&policy, &reference, &learner.world().eval).unwrap();
    let reported = metrics(&app, &id).await.series[0].mean_kl;
    assert!((kl - reported).abs() <= 1e-12);
}

#[tokio::test]
async fn sessions_are_isolated() {
    let app = app();
    let a = create(&app, 15).await;
    let b = create(&app, 15).await;
    let hash_b = model(&app, &b).await.state_hash;
    let metrics_b = metrics(&app, &b).await;
    for _ in 0..3 {
        let q = query(&app, &a).await;
        answer(&app, &a, &q.query_id, "second").await;
    }
    send(&app, Method::PATCH, &format!("/sessions/{a}/constraints"), Some(json!({"beta": 5.0}))).await;
    assert_ne!(model(&app, &a).await.state_hash, hash_b);
    assert_eq!(model(&app, &b).await.state_hash, hash_b);
    assert_eq!(metrics(&app, &b).await, metrics_b);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_submissions_are_serialized() {
    let app = app();
    let id = create(&app, 16).await;
    let q = query(&app, &id).await;
    let tasks: Vec<_> = (0..4)
        .map(|_| {
            let app = app.clone();
            let id = id.clone();
            let qid = q.query_id.clone();
            tokio::spawn(async move { answer(&app, &id, &qid, "first").await.0 })
        })
        .collect();
    let mut statuses = Vec::new();
    for t in tasks {
        statuses.push(t.await.unwrap());
    }
    assert_eq!(statuses.iter().filter(|s| **s == StatusCode::OK).count(), 1);
    assert_eq!(statuses.iter().filter(|s| **s == StatusCode::CONFLICT).count(), 3);
    let m = model(&app, &id).await;
    assert_eq!(m.rounds, 1);
    assert_eq!(m.n_triplets, 1);
}

#[tokio::test]
async fn replaying_the_event_log_reproduces_the_session() {
    let dir = tempfile::tempdir().unwrap();
    let options = ServiceOptions {
        default_config: None,
        log_dir: Some(dir.path().to_path_buf()),
    };
    let app = router(AppState::new(options.clone()).unwrap());
    let id = create(&app, 17).await;
    for (i, choice) in ["first", "skip", "second", "first"].into_iter().enumerate() {
        if i == 2 {
            send(&app, Method::PATCH, &format!("/sessions/{id}/constraints"), Some(json!({"lambda": 3.0}))).await;
        }
        let q = query(&app, &id).await;
        answer(&app, &id, &q.query_id, choice).await;
    }
    let pending = query(&app, &id).await;
    let live = model(&app, &id).await;
    let live_metrics = metrics(&app, &id).await;

    let restored_state = AppState::new(options).unwrap();
    assert_eq!(restored_state.session_ids(), vec![id.clone()]);
    let restored = router(restored_state);
    assert_eq!(model(&restored, &id).await, live);
    assert_eq!(metrics(&restored, &id).await, live_metrics);
    assert_eq!(query(&restored, &id).await, pending);

    // The restored session keeps appending to the same log.
    answer(&restored, &id, &pending.query_id, "first").await;
    let again = router(AppState::new(ServiceOptions {
        default_config: None,
        log_dir: Some(dir.path().to_path_buf()),
    })
    .unwrap());
    assert_eq!(model(&again, &id).await, model(&restored, &id).await);
    let lines = std::fs::read_to_string(centaur_service::log_path(dir.path(), &id)).unwrap();
    let kinds: Vec<String> = lines
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["event"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(kinds[0], "created");
    assert_eq!(kinds.iter().filter(|k| *k == "feedback").count(), 5);
    assert_eq!(kinds.iter().filter(|k| *k == "constraints").count(), 1);
}
