//! Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned here.
//! Exits nonzero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use centaur_cli::{cmd_gradcheck, cmd_run, gradcheck_status};
use centaur_core::centaur::{
    augment_model, finetune, fit_constrained_cost, reward_ensemble, AlignmentLoss, CapChoice, CentaurFitOptions,
    CentaurSpec, CostTarget, CostTransform, Predictor,
};
use centaur_core::datasets::{elicit_preferences, generate_dataset, HumanView, PreferenceTriplet};
use centaur_core::evaluation::{
    frontier_sweep, ranking_experiment, ArmKind, ArmSpec, ExperimentSpec, Knob, RunConfig, CENTAUR_ARM, HUMAN_ARM,
    MACHINE_ARM,
};
use centaur_core::models::{fit_supervised, fit_supervised_view, ActionSet, FitConfig};
use centaur_core::numerics::{softmax, total_variation};
use centaur_core::rewards::{
    fit_reward, oracle_seed, optimize_policy, preference_seeds, rlhf_loop, simulated_choice, PolicyObjective,
    PreferenceWorld, Query, RewardFitOptions, RlhfConfig,
};
use centaur_core::{
    DescentOptions, GeneratorSpec, HumanProfile, HumanSignalDataset, LabeledDataset, ModelKind, SimulatedHuman,
    SoftmaxPolicy, SplitMix64, TaskKind,
};
use centaur_service::api::{MetricsSeries, ModelResponse, QueryItem, SessionCreated};
use centaur_service::{router, AppState, ServiceOptions};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const GRAD_TOL: f64 = 1e-4;
const GRAD_BUDGET: Duration = Duration::from_secs(30);
const GRID_COORD_TOL: f64 = 2e-3;
const GRID_RESOLUTION: f64 = 1e-3;
const GRID_BUDGET: Duration = Duration::from_secs(60);
const GIBBS_TV_TOL: f64 = 1e-3;
const GIBBS_BUDGET: Duration = Duration::from_secs(10);
const REDUCTION_TOL: f64 = 1e-8;
const RECOVERY_MIN: f64 = 0.95;
const RECOVERY_BUDGET: Duration = Duration::from_secs(30);
const RANKING_MIN: f64 = 0.9;
const RANKING_REPS: usize = 50;
const RANKING_BUDGET: Duration = Duration::from_secs(300);
const FILTER_GAP_TOL: f64 = 0.005;
const FILTER_REPS: usize = 20;
const KL_SLACK: f64 = 1e-6;
const KL_SEEDS: usize = 20;
const SERVICE_TOL: f64 = 1e-9;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }
}

type Check = fn() -> Outcome;

fn within(budget: Duration, start: Instant) -> (bool, String) {
    let spent = start.elapsed();
    (spent <= budget, format!("runtime {:.2}s <= {:.0}s", spent.as_secs_f64(), budget.as_secs_f64()))
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "parameter lengths differ");
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "parameter lengths differ");
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn gradient_integrity() -> Outcome {
    let start = Instant::now();
    let summary = cmd_gradcheck(None).expect("gradient check runs");
    let status_ok = gradcheck_status(&summary).is_ok();
    let exit = Command::new(env!("CARGO_BIN_EXE_centaur"))
        .arg("gradcheck")
        .output()
        .expect("binary runs");
    let worst = summary.worst().map_or(f64::INFINITY, |c| c.max_rel_error);
    let points_ok = summary.checks.iter().all(|c| c.points >= 10);
    let (fast, time) = within(GRAD_BUDGET, start);
    Outcome::new(
        status_ok && summary.passed && worst <= GRAD_TOL && points_ok && exit.status.success() && fast,
        format!(
            "worst rel error {worst:.2e} <= {GRAD_TOL:.0e} over {} objectives x 10 points, exit {:?}, {time}",
            summary.checks.len(),
            exit.status.code()
        ),
    )
}

fn constrained_cost_oracle() -> Outcome {
    let start = Instant::now();
    let xs = [-1.5, -1.0, -0.5, -0.2, 0.1, 0.4, 0.9, 1.6];
    let ys = [0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0];
    let hs = [0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0];
    let rows: Vec<Vec<f64>> = xs.iter().map(|x| vec![*x]).collect();
    let ds = LabeledDataset::new(rows, ys.to_vec(), LabeledDataset::default_names(1)).unwrap();
    let human = HumanSignalDataset::from_labels(ds.with_labels(hs.to_vec()).unwrap()).unwrap();
    let opts = CentaurFitOptions::new(
        FitConfig::new(ModelKind::Linear, TaskKind::Binary)
            .with_standardize(false)
            .with_descent(DescentOptions::default().with_iters(100_000).with_step(1.0)),
    );
    let c = fit_constrained_cost(
        &ds,
        CostTarget::Decisions(&human),
        1.0,
        CostTransform::Identity,
        CostTransform::Identity,
        AlignmentLoss::TaskLoss,
        &opts,
    )
    .unwrap();
    let theta = c.symbiotic_params.values().to_vec();

    // Oracle: mean logistic loss on the labels plus on the human decisions,
    // minimized over every point of the grid. softplus(z) - t*z per record.
    let targets: Vec<f64> = ys.iter().zip(&hs).map(|(y, h)| y + h).collect();
    let steps = (6.0 / GRID_RESOLUTION).round() as usize;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=steps {
        let w = -3.0 + GRID_RESOLUTION * i as f64;
        let wx: Vec<f64> = xs.iter().map(|x| w * x).collect();
        for j in 0..=steps {
            let b = -3.0 + GRID_RESOLUTION * j as f64;
            let mut v = 0.0;
            for (z0, t) in wx.iter().zip(&targets) {
                let z = z0 + b;
                let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
                v += 2.0 * softplus - t * z;
            }
            if v < best.0 {
                best = (v, w, b);
            }
        }
    }
    let dw = (theta[0] - best.1).abs();
    let db = (theta[1] - best.2).abs();
    let (fast, time) = within(GRID_BUDGET, start);
    Outcome::new(
        dw <= GRID_COORD_TOL && db <= GRID_COORD_TOL && fast,
        format!(
            "descent ({:.4}, {:.4}) vs grid ({:.3}, {:.3}) over {}^2 points, max coord gap {:.1e} <= {GRID_COORD_TOL:.0e}, {time}",
            theta[0],
            theta[1],
            best.1,
            best.2,
            steps + 1,
            dw.max(db)
        ),
    )
}

fn gibbs_closed_form() -> Outcome {
    let start = Instant::now();
    let bias = [0.4, -0.3, 0.1];
    let m = bias.len();
    let zero = SoftmaxPolicy::zeros(ActionSet::one_hot(m).unwrap(), 2).unwrap();
    let mut values = vec![0.0; zero.params().len()];
    values[2 * m..].copy_from_slice(&bias);
    let reference = zero.with_values(values).unwrap();
    let contexts = vec![vec![0.7, -0.4]];
    let pref = reference.distribution(&contexts[0]).unwrap();
    let r = vec![1.0, 0.2, -0.5];
    let mut worst = 0.0_f64;
    for beta in [0.1, 1.0, 10.0] {
        let obj = PolicyObjective::from_rewards(&reference, beta, &contexts, vec![r.clone()]).unwrap();
        let out = optimize_policy(&obj, &reference, &DescentOptions::default().with_step(1.0).with_iters(5000)).unwrap();
        let got = out.policy.distribution(&contexts[0]).unwrap();
        let logits: Vec<f64> = pref.iter().zip(&r).map(|(p, ri)| p.ln() + ri / beta).collect();
        worst = worst.max(total_variation(&got, &softmax(&logits)));
    }
    let (fast, time) = within(GIBBS_BUDGET, start);
    Outcome::new(
        worst <= GIBBS_TV_TOL && fast,
        format!("max TV {worst:.2e} <= {GIBBS_TV_TOL:.0e} for beta in {{0.1, 1, 10}}, {time}"),
    )
}

fn reduction_spec() -> GeneratorSpec {
    GeneratorSpec {
        n_records: 300,
        d_shared: 2,
        d_private: 2,
        true_weights: vec![1.0, 0.8, 1.2, 1.0],
        label_noise: 0.0,
        task_kind: TaskKind::Binary,
    }
}

fn reduction_cfg(kind: ModelKind) -> FitConfig {
    FitConfig::new(kind, TaskKind::Binary)
        .with_l2(1e-3)
        .with_descent(DescentOptions::default().with_iters(400))
}

fn human_labels(ds: &LabeledDataset, profile: &HumanProfile, seed: u64) -> HumanSignalDataset {
    let human = SimulatedHuman::from_profile(&reduction_spec(), profile, seed).unwrap();
    HumanSignalDataset::from_labels(ds.with_labels(human.label_dataset(ds).unwrap()).unwrap()).unwrap()
}

fn reduction_identities() -> Outcome {
    let mut parts = Vec::new();
    let private = HumanProfile { view: HumanView::PrivateOnly, ..Default::default() };

    let ds = generate_dataset(&reduction_spec(), 27).unwrap();
    let d_human = human_labels(&ds, &private, 28);
    let mut lambda_dist = 0.0_f64;
    for kind in [ModelKind::Linear, ModelKind::Mlp { hidden: 3 }] {
        let opts = CentaurFitOptions::new(reduction_cfg(kind)).with_machine_columns(vec![0, 1]);
        let c = fit_constrained_cost(
            &ds,
            CostTarget::Decisions(&d_human),
            0.0,
            CostTransform::Identity,
            CostTransform::Identity,
            AlignmentLoss::TaskLoss,
            &opts,
        )
        .unwrap();
        let plain = fit_supervised_view(&ds, Some(&[0, 1]), &reduction_cfg(kind)).unwrap();
        lambda_dist = lambda_dist.max(c.symbiotic_params.distance(plain.params()));
    }
    parts.push(("lambda=0", lambda_dist));

    let ds = generate_dataset(&reduction_spec(), 8).unwrap();
    let pm = fit_supervised(human_labels(&ds, &HumanProfile::default(), 9).labeled().unwrap(), &reduction_cfg(ModelKind::Linear))
        .unwrap();
    let mut cap_dist = 0.0_f64;
    for kind in [ModelKind::Linear, ModelKind::Mlp { hidden: 3 }] {
        let opts = CentaurFitOptions::new(reduction_cfg(kind)).with_machine_columns(vec![0, 1]);
        let centaur = augment_model(&ds, &pm, &CapChoice::Fixed(Some(0.0)), &opts).unwrap();
        let machine = fit_supervised_view(&ds, Some(&[0, 1]), &reduction_cfg(kind)).unwrap();
        let Predictor::Augmented { model, .. } = &centaur.predictor else {
            panic!("augment_model did not return an augmented predictor")
        };
        let dropped = model.arch().input_weight_indices(2);
        let reduced: Vec<f64> = model
            .params()
            .values()
            .iter()
            .enumerate()
            .filter(|(i, _)| !dropped.contains(i))
            .map(|(_, v)| *v)
            .collect();
        cap_dist = cap_dist.max(l2(&reduced, machine.params().values()));
    }
    parts.push(("importance_cap=0", cap_dist));

    let ds = generate_dataset(&reduction_spec(), 14).unwrap();
    let base = fit_supervised(&ds, &reduction_cfg(ModelKind::Linear)).unwrap();
    let biased = HumanProfile { anchor_strength: 0.5, bias_anchor: 0.9, ..Default::default() };
    let d_human = human_labels(&ds, &biased, 15);
    let c = finetune(
        &base,
        &d_human,
        &["weights".into(), "intercept".into()],
        Some(0.0),
        &reduction_cfg(ModelKind::Linear),
    )
    .unwrap();
    parts.push(("c1=0", c.symbiotic_params.distance(base.params())));

    let ds = generate_dataset(&GeneratorSpec { n_records: 200, ..reduction_spec() }, 23).unwrap();
    let base = fit_supervised(&ds, &reduction_cfg(ModelKind::Mlp { hidden: 3 })).unwrap();
    let d_human = human_labels(&ds, &HumanProfile::default(), 24);
    let c = reward_ensemble(&base, &[d_human.clone(), d_human], &[0, 0], 2, &reduction_cfg(ModelKind::Linear)).unwrap();
    let Predictor::Adapted { members } = &c.predictor else {
        panic!("reward_ensemble did not return adapted members")
    };
    let ext = members.iter().map(|m| m.params().distance(base.params())).fold(0.0, f64::max);
    parts.push(("extents=0", ext));

    let passed = parts.iter().all(|(_, d)| *d <= REDUCTION_TOL);
    let detail = parts.iter().map(|(n, d)| format!("{n} {d:.1e}")).collect::<Vec<_>>().join(", ");
    Outcome::new(passed, format!("{detail} (each <= {REDUCTION_TOL:.0e})"))
}

fn reward_recovery() -> Outcome {
    let start = Instant::now();
    let seed = 21;
    let w = vec![1.0, -2.0, 0.5, 1.5];
    let human = SimulatedHuman::new(vec![true; 4], w, 0.5, 0.0, 0.0, TaskKind::Binary, seed).unwrap();
    let mut rng = SplitMix64::new(seed);
    let mut draw = |k: usize| (0..k).map(|_| rng.normal()).collect::<Vec<f64>>();
    let contexts: Vec<Vec<f64>> = (0..500).map(|_| draw(2)).collect();
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..500).map(|_| (draw(4), draw(4))).collect();
    let triplets: Vec<PreferenceTriplet> = elicit_preferences(&human, &contexts, &pairs, seed).unwrap();
    let opts = RewardFitOptions {
        descent: DescentOptions::default().with_iters(2000),
        ..RewardFitOptions::default()
    };
    let rm = fit_reward(&triplets, &opts).unwrap();
    let mut rng = SplitMix64::new(777);
    let mut agree = 0;
    for _ in 0..200 {
        let x: Vec<f64> = (0..2).map(|_| rng.normal()).collect();
        let a: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
        let b: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
        let learned = rm.score(&x, &a).unwrap() - rm.score(&x, &b).unwrap();
        let truth = human.utility(&a).unwrap() - human.utility(&b).unwrap();
        if learned.signum() == truth.signum() {
            agree += 1;
        }
    }
    let frac = agree as f64 / 200.0;
    let (fast, time) = within(RECOVERY_BUDGET, start);
    Outcome::new(
        frac >= RECOVERY_MIN && fast,
        format!("{} triplets, agreement {agree}/200 = {frac:.3} >= {RECOVERY_MIN}, {time}", triplets.len()),
    )
}

fn complementary_generator() -> GeneratorSpec {
    GeneratorSpec {
        n_records: 600,
        d_shared: 3,
        d_private: 2,
        true_weights: vec![2.0, -1.5, 1.0, 1.2, -1.0],
        label_noise: 0.0,
        task_kind: TaskKind::Binary,
    }
}

fn biased_human() -> HumanProfile {
    HumanProfile {
        view: HumanView::PrivateOnly,
        weight_scale: 1.0,
        bias_anchor: 0.8,
        anchor_strength: 0.3,
        noise_rate: 0.1,
    }
}

fn ranking_spec(human: HumanProfile, replications: usize) -> ExperimentSpec {
    let centaur = CentaurSpec::AugmentModel {
        importance_cap: CapChoice::Validated {
            grid: vec![Some(0.0), Some(0.25), Some(0.5), Some(1.0), Some(2.0), None],
            validation_fraction: 0.25,
        },
    };
    ExperimentSpec::new(
        complementary_generator(),
        human,
        vec![
            ArmSpec::new(HUMAN_ARM, ArmKind::HumanOnly),
            ArmSpec::new(MACHINE_ARM, ArmKind::MachineOnly),
            ArmSpec::new(CENTAUR_ARM, ArmKind::Centaur { spec: centaur }),
        ],
        replications,
    )
}

fn ranking_reproduction() -> Outcome {
    let start = Instant::now();
    let r = ranking_experiment(&ranking_spec(biased_human(), RANKING_REPS), 2024).unwrap();
    let cm = r.ordering(CENTAUR_ARM, MACHINE_ARM).unwrap();
    let mh = r.ordering(MACHINE_ARM, HUMAN_ARM).unwrap();
    let (fast, time) = within(RANKING_BUDGET, start);
    Outcome::new(
        cm.n == RANKING_REPS && cm.fraction >= RANKING_MIN && mh.fraction >= RANKING_MIN && fast,
        format!(
            "centaur>machine {:.2}, machine>human {:.2} over {} reps (each >= {RANKING_MIN}), {time}",
            cm.fraction, mh.fraction, cm.n
        ),
    )
}

fn intuition_filtering() -> Outcome {
    let noise = HumanProfile { noise_rate: 0.5, ..biased_human() };
    let r = ranking_experiment(&ranking_spec(noise, FILTER_REPS), 7).unwrap();
    let c = r.report.arm(CENTAUR_ARM).unwrap().phi_p.mean;
    let m = r.report.arm(MACHINE_ARM).unwrap().phi_p.mean;
    let gap = c - m;
    Outcome::new(
        gap.abs() <= FILTER_GAP_TOL,
        format!("centaur {c:.4} vs machine {m:.4} over {FILTER_REPS} seeds, |gap| {:.4} <= {FILTER_GAP_TOL}", gap.abs()),
    )
}

fn kl_monotonicity() -> Outcome {
    let spec = ExperimentSpec::new(
        GeneratorSpec { n_records: 1, ..complementary_generator() },
        HumanProfile::default(),
        vec![ArmSpec::new(
            "rlhf",
            ArmKind::Rlhf {
                config: RlhfConfig::default(),
                rounds: 3,
                pairs_per_round: 5,
            },
        )],
        KL_SEEDS,
    );
    let grid = [0.01, 0.1, 1.0, 10.0, 100.0];
    let f = frontier_sweep(&spec, Knob::Beta, &grid, 3).unwrap();
    let kls: Vec<f64> = f.points.iter().map(|p| p.mean_kl_mean.unwrap()).collect();
    let monotone = kls.windows(2).all(|w| w[1] <= w[0] + KL_SLACK);
    let shown = kls.iter().map(|k| format!("{k:.2e}")).collect::<Vec<_>>().join(" ");
    Outcome::new(
        monotone && kls.len() == grid.len(),
        format!("mean KL over {KL_SEEDS} seeds for beta 0.01..100: [{shown}], slack {KL_SLACK:.0e}"),
    )
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
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

fn session_config(seed: u64) -> Value {
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

async fn scripted_session(seed: u64, rounds: usize) -> (f64, f64, usize) {
    let config = RunConfig::from_json(&session_config(seed).to_string()).unwrap();
    let (world_seed, loop_seed) = preference_seeds(seed);
    let world = PreferenceWorld::build(&config.session_world().unwrap(), world_seed).unwrap();
    let rlhf = config.session.as_ref().unwrap().rlhf.clone();
    let batch = rlhf_loop(&world, &rlhf, rounds, 1, loop_seed).unwrap();

    let app = router(AppState::new(ServiceOptions::default()).unwrap());
    let (status, body) = send(&app, Method::POST, "/sessions", Some(session_config(seed))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    let id = serde_json::from_value::<SessionCreated>(body).unwrap().session_id;
    for round in 0..rounds {
        let (status, body) = send(&app, Method::GET, &format!("/sessions/{id}/query"), None).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        let item: QueryItem = serde_json::from_value(body).unwrap();
        let query = Query {
            context_index: item.context_index,
            first: item.candidates[0].action,
            second: item.candidates[1].action,
        };
        let choice = simulated_choice(&world.human, &world, &query, oracle_seed(loop_seed, round, 0)).unwrap();
        let body = json!({"query_id": item.query_id, "choice": serde_json::to_value(choice).unwrap()});
        let (status, body) = send(&app, Method::POST, &format!("/sessions/{id}/feedback"), Some(body)).await;
        assert_eq!(status, StatusCode::OK, "{body}");
    }
    let (_, body) = send(&app, Method::GET, &format!("/sessions/{id}/model"), None).await;
    let live: ModelResponse = serde_json::from_value(body).unwrap();
    let (_, body) = send(&app, Method::GET, &format!("/sessions/{id}/metrics"), None).await;
    let series: MetricsSeries = serde_json::from_value(body).unwrap();
    let params = linf(&live.policy.values, batch.policy.params().values())
        .max(linf(&live.reward.values, batch.reward.params().values()));
    let trace = series
        .series
        .iter()
        .zip(&batch.trace)
        .map(|(p, t)| (p.mean_kl - t.mean_kl).abs().max((p.phi_b - t.phi_b).abs()))
        .fold(0.0, f64::max);
    (params, trace, series.series.len())
}

fn service_batch_equivalence() -> Outcome {
    let rounds = 20;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
    let (params, trace, len) = runtime.block_on(scripted_session(11, rounds));
    Outcome::new(
        params <= SERVICE_TOL && trace <= SERVICE_TOL && len == rounds,
        format!("{rounds} rounds over HTTP: max param drift {params:.1e}, trace drift {trace:.1e} (each <= {SERVICE_TOL:.0e})"),
    )
}

fn determinism() -> Outcome {
    let config = Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/minimal.json"));
    let tmp = tempfile::tempdir().unwrap();
    let a = cmd_run(config, Some(tmp.path().join("a"))).unwrap();
    let b = cmd_run(config, Some(tmp.path().join("b"))).unwrap();
    let ra = std::fs::read(a.join("report.json")).unwrap();
    let rb = std::fs::read(b.join("report.json")).unwrap();
    Outcome::new(ra == rb && !ra.is_empty(), format!("report.json {} bytes, identical: {}", ra.len(), ra == rb))
}

fn main() -> ExitCode {
    let checks: [(&str, Check); 10] = [
        ("gradient_integrity", gradient_integrity),
        ("constrained_cost_oracle", constrained_cost_oracle),
        ("gibbs_closed_form", gibbs_closed_form),
        ("reduction_identities", reduction_identities),
        ("reward_recovery", reward_recovery),
        ("ranking_reproduction", ranking_reproduction),
        ("intuition_filtering", intuition_filtering),
        ("kl_monotonicity", kl_monotonicity),
        ("service_batch_equivalence", service_batch_equivalence),
        ("determinism", determinism),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (name, check) in checks {
        if !only.is_empty() && !only.iter().any(|o| name.contains(o.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Outcome::new(false, format!("panicked: {msg}"))
        });
        if !outcome.passed {
            failed += 1;
        }
        println!(
            "{} {name:<26} {} [{:.2}s]",
            if outcome.passed { "PASS" } else { "FAIL" },
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
