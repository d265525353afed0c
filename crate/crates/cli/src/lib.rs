//! Command implementations behind the `centaur` binary.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use centaur_core::evaluation::{
    frontier_csv, frontier_sweep, run_experiment, summary_csv, to_json_pretty, Knob, RunConfig,
};
use centaur_core::gradcheck::{
    run_cases, run_registry, GradCheckCase, GradCheckSummary, GRADCHECK_SEED, POINTS_PER_OBJECTIVE,
};
use centaur_core::constants::GRAD_CHECK_THRESHOLD;
use centaur_service::{AppState, ServiceOptions};
use serde::Serialize;
use thiserror::Error;

/// Environment variable that overrides the config's master seed.
pub const SEED_ENV: &str = "CENTAUR_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(1),
        }
    }
}

impl From<centaur_core::Error> for CliError {
    fn from(err: centaur_core::Error) -> Self {
        match err {
            centaur_core::Error::Config(m) => CliError::Config(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Where the effective master seed came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Config,
    Environment,
}

/// Reads and validates a config, applying the seed override.
pub fn load_config(path: &Path, seed_override: Option<&str>) -> CliResult<(RunConfig, SeedSource)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut config =
        RunConfig::from_json(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), strip(e))))?;
    let mut source = SeedSource::Config;
    if let Some(raw) = seed_override {
        config.master_seed = raw
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{SEED_ENV}: expected an unsigned 64-bit integer, got {raw:?}")))?;
        source = SeedSource::Environment;
    }
    Ok((config, source))
}

fn strip(e: centaur_core::Error) -> String {
    match e {
        centaur_core::Error::Config(m) => m,
        other => other.to_string(),
    }
}

fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok()
}

fn out_dir(cli: Option<PathBuf>, config: &RunConfig) -> CliResult<PathBuf> {
    cli.or_else(|| config.output.dir.as_ref().map(PathBuf::from))
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set output.dir".into()))
}

fn write(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn prepare(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    crate_version: &'a str,
    config_hash: String,
    master_seed: u64,
    seed_source: SeedSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    knob: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<Vec<f64>>,
    files: Vec<String>,
}

/// Runs the experiment and writes report.json, summary.csv and manifest.json.
pub fn cmd_run(config_path: &Path, out: Option<PathBuf>) -> CliResult<PathBuf> {
    let (config, source) = load_config(config_path, env_seed().as_deref())?;
    let dir = out_dir(out, &config)?;
    let report = run_experiment(&config.experiment, config.master_seed)?;
    prepare(&dir)?;
    let mut files = vec!["report.json".to_string()];
    write(&dir, "report.json", &to_json_pretty(&report)?)?;
    if config.output.csv.unwrap_or(true) {
        write(&dir, "summary.csv", &summary_csv(&report)?)?;
        files.push("summary.csv".into());
    }
    let manifest = Manifest {
        command: "run",
        crate_version: env!("CARGO_PKG_VERSION"),
        config_hash: config.hash(),
        master_seed: config.master_seed,
        seed_source: source,
        knob: None,
        grid: None,
        files,
    };
    write(&dir, "manifest.json", &to_json_pretty(&manifest)?)?;
    Ok(dir)
}

/// Parses `v1,v2,...`.
pub fn parse_grid(raw: &str) -> CliResult<Vec<f64>> {
    let values: Vec<&str> = raw.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if values.is_empty() {
        return Err(CliError::Config("--grid: at least one value is required".into()));
    }
    values
        .into_iter()
        .map(|v| {
            v.parse::<f64>()
                .map_err(|_| CliError::Config(format!("--grid: {v:?} is not a number")))
        })
        .collect()
}

/// Sweeps one knob; writes frontier.csv, frontier.json, one report and
/// summary per grid point, and manifest.json.
pub fn cmd_sweep(config_path: &Path, knob: &str, grid: &str, out: Option<PathBuf>) -> CliResult<PathBuf> {
    let (config, source) = load_config(config_path, env_seed().as_deref())?;
    let knob: Knob = knob.parse().map_err(|e| CliError::Config(format!("--knob: {}", strip(e))))?;
    let grid = parse_grid(grid)?;
    let dir = out_dir(out, &config)?;
    let frontier = frontier_sweep(&config.experiment, knob, &grid, config.master_seed)?;
    prepare(&dir)?;
    let csv = config.output.csv.unwrap_or(true);
    let mut files = vec!["frontier.csv".to_string(), "frontier.json".to_string()];
    write(&dir, "frontier.csv", &frontier_csv(&frontier)?)?;
    write(&dir, "frontier.json", &to_json_pretty(&frontier)?)?;
    for (i, report) in frontier.reports.iter().enumerate() {
        let name = format!("report_{i}.json");
        write(&dir, &name, &to_json_pretty(report)?)?;
        files.push(name);
        if csv {
            let name = format!("summary_{i}.csv");
            write(&dir, &name, &summary_csv(report)?)?;
            files.push(name);
        }
    }
    let manifest = Manifest {
        command: "sweep",
        crate_version: env!("CARGO_PKG_VERSION"),
        config_hash: config.hash(),
        master_seed: config.master_seed,
        seed_source: source,
        knob: Some(knob.to_string()),
        grid: Some(grid),
        files,
    };
    write(&dir, "manifest.json", &to_json_pretty(&manifest)?)?;
    Ok(dir)
}

/// One line per objective with its worst relative error.
pub fn format_gradcheck(summary: &GradCheckSummary) -> String {
    let mut out = String::new();
    for c in &summary.checks {
        out.push_str(&format!(
            "{} {:<24} max_rel_error={:.3e} params={} points={}\n",
            if c.passed { "ok  " } else { "FAIL" },
            c.name,
            c.max_rel_error,
            c.n_params,
            c.points
        ));
    }
    out.push_str(&format!(
        "{} objectives, threshold {:.0e}: {}\n",
        summary.checks.len(),
        summary.threshold,
        if summary.passed { "passed" } else { "FAILED" }
    ));
    out
}

/// Checks the given cases, or the full registry when `cases` is `None`.
pub fn cmd_gradcheck(cases: Option<&[GradCheckCase]>) -> CliResult<GradCheckSummary> {
    let summary = match cases {
        Some(c) => run_cases(c, GRADCHECK_SEED, POINTS_PER_OBJECTIVE, GRAD_CHECK_THRESHOLD)?,
        None => run_registry()?,
    };
    Ok(summary)
}

/// Maps a gradient-check summary to the command's outcome.
pub fn gradcheck_status(summary: &GradCheckSummary) -> CliResult<()> {
    if summary.passed {
        Ok(())
    } else {
        let failed: Vec<&str> = summary.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        Err(CliError::Runtime(format!("gradient check failed for {}", failed.join(", "))))
    }
}

/// Serves the session API until interrupted.
pub fn cmd_serve(bind: &str, config_path: Option<&Path>, log_dir: Option<PathBuf>) -> CliResult<()> {
    let addr: SocketAddr = bind
        .parse()
        .map_err(|_| CliError::Runtime(format!("--bind: cannot parse address {bind:?}")))?;
    let default_config = config_path
        .map(|p| load_config(p, env_seed().as_deref()).map(|(c, _)| c))
        .transpose()?;
    let state = AppState::new(ServiceOptions { default_config, log_dir })
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::Runtime(format!("cannot bind {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| CliError::Runtime(e.to_string()))?;
        eprintln!("listening on http://{local}");
        centaur_service::serve(listener, state)
            .await
            .map_err(|e| CliError::Runtime(e.to_string()))
    })
}
