use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{run_experiment, ArmKind, ExperimentReport, ExperimentSpec};
use crate::centaur::{CapChoice, CentaurSpec};
use crate::{Error, Result};

/// Arm names the ranking experiment expects.
pub const HUMAN_ARM: &str = "human_only";
pub const MACHINE_ARM: &str = "machine_only";
pub const CENTAUR_ARM: &str = "centaur";

/// How often `better` beat `worse` on phi_p.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingStat {
    pub better: String,
    pub worse: String,
    /// Fraction of paired replications with `better` strictly ahead.
    pub fraction: f64,
    /// Mean of `phi_p(better) - phi_p(worse)`.
    pub mean_gap: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    /// centaur over machine, machine over human, centaur over human.
    pub orderings: Vec<OrderingStat>,
    pub report: ExperimentReport,
}

impl RankingReport {
    pub fn ordering(&self, better: &str, worse: &str) -> Option<&OrderingStat> {
        self.orderings.iter().find(|o| o.better == better && o.worse == worse)
    }
}

pub fn ordering(report: &ExperimentReport, better: &str, worse: &str) -> OrderingStat {
    let pairs = report.paired(better, worse);
    let n = pairs.len();
    let ahead = pairs.iter().filter(|(a, b)| a.phi_p > b.phi_p).count();
    let gap: f64 = pairs.iter().map(|(a, b)| a.phi_p - b.phi_p).sum();
    OrderingStat {
        better: better.to_string(),
        worse: worse.to_string(),
        fraction: if n == 0 { 0.0 } else { ahead as f64 / n as f64 },
        mean_gap: if n == 0 { 0.0 } else { gap / n as f64 },
        n,
    }
}

/// Runs the experiment with its `human_only`, `machine_only` and `centaur`
/// arms and reports how often the centaur > machine > human ordering holds.
pub fn ranking_experiment(spec: &ExperimentSpec, master_seed: u64) -> Result<RankingReport> {
    for name in [HUMAN_ARM, MACHINE_ARM, CENTAUR_ARM] {
        if !spec.arms.iter().any(|a| a.name == name) {
            return Err(Error::Config(format!("ranking experiment needs an arm named {name:?}")));
        }
    }
    let report = run_experiment(spec, master_seed)?;
    let orderings = vec![
        ordering(&report, CENTAUR_ARM, MACHINE_ARM),
        ordering(&report, MACHINE_ARM, HUMAN_ARM),
        ordering(&report, CENTAUR_ARM, HUMAN_ARM),
    ];
    Ok(RankingReport { orderings, report })
}

/// A constraint knob a frontier sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Knob {
    Lambda,
    Beta,
    ImportanceCap,
    C1,
}

impl Knob {
    pub fn name(self) -> &'static str {
        match self {
            Knob::Lambda => "lambda",
            Knob::Beta => "beta",
            Knob::ImportanceCap => "importance_cap",
            Knob::C1 => "c1",
        }
    }

    /// Sets the knob on `arm`; `false` when the arm has no such knob.
    pub fn apply(self, arm: &mut ArmKind, value: f64) -> bool {
        match (self, arm) {
            (Knob::Lambda, ArmKind::Centaur { spec: CentaurSpec::ConstrainedCost { lambda, .. } }) => *lambda = value,
            (Knob::ImportanceCap, ArmKind::Centaur { spec: CentaurSpec::AugmentModel { importance_cap } }) => {
                *importance_cap = CapChoice::Fixed(Some(value))
            }
            (Knob::C1, ArmKind::Centaur { spec: CentaurSpec::Finetune { c1, .. } }) => *c1 = Some(value),
            (knob, ArmKind::Rlhf { config, .. }) => match knob {
                Knob::Lambda => config.human_weight = value,
                Knob::Beta => config.beta = value,
                Knob::ImportanceCap => config.importance_cap = Some(value),
                Knob::C1 => config.c1 = Some(value),
            },
            _ => return false,
        }
        true
    }
}

impl fmt::Display for Knob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Knob {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda" => Ok(Knob::Lambda),
            "beta" => Ok(Knob::Beta),
            "importance_cap" => Ok(Knob::ImportanceCap),
            "c1" => Ok(Knob::C1),
            other => Err(Error::Config(format!(
                "unknown knob {other:?}; expected lambda, beta, importance_cap or c1"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub value: f64,
    pub phi_p_mean: f64,
    pub phi_b_mean: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_kl_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierReport {
    pub knob: Knob,
    /// The swept arm: the first arm in the spec that has the knob.
    pub arm: String,
    pub points: Vec<FrontierPoint>,
    /// The full experiment behind each point, in grid order.
    pub reports: Vec<ExperimentReport>,
}

/// One full replication experiment per grid value, with the knob set on the
/// first arm that has it.
pub fn frontier_sweep(spec: &ExperimentSpec, knob: Knob, grid: &[f64], master_seed: u64) -> Result<FrontierReport> {
    if grid.is_empty() {
        return Err(Error::Config("grid must hold at least one value".into()));
    }
    if let Some(v) = grid.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::Config(format!("grid values must be finite and nonnegative, got {v}")));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("grid must be sorted ascending".into()));
    }
    let target = spec
        .arms
        .iter()
        .position(|a| knob.apply(&mut a.arm.clone(), 0.0))
        .ok_or_else(|| Error::Config(format!("knob {knob} is not applicable to any arm's technique")))?;
    let mut points = Vec::with_capacity(grid.len());
    let mut reports = Vec::with_capacity(grid.len());
    for &value in grid {
        let mut swept = spec.clone();
        knob.apply(&mut swept.arms[target].arm, value);
        let report = run_experiment(&swept, master_seed)?;
        let summary = report.arm(&spec.arms[target].name).expect("swept arm is in the report");
        points.push(FrontierPoint {
            value,
            phi_p_mean: summary.phi_p.mean,
            phi_b_mean: summary.phi_b.mean,
            mean_kl_mean: summary.mean_kl.map(|s| s.mean),
        });
        reports.push(report);
    }
    Ok(FrontierReport {
        knob,
        arm: spec.arms[target].name.clone(),
        points,
        reports,
    })
}
