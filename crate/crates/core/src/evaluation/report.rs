use super::{ExperimentReport, FrontierReport};
use crate::{Error, Result};

fn csv_error(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

fn finish(writer: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = writer.into_inner().map_err(csv_error)?;
    String::from_utf8(bytes).map_err(csv_error)
}

/// Summary table with columns `arm, metric, mean, stdev, n`.
pub fn summary_csv(report: &ExperimentReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["arm", "metric", "mean", "stdev", "n"]).map_err(csv_error)?;
    for arm in &report.summary {
        let mut rows = vec![("phi_p", arm.phi_p), ("phi_b", arm.phi_b)];
        if let Some(kl) = arm.mean_kl {
            rows.push(("mean_kl", kl));
        }
        for (metric, stat) in rows {
            w.write_record([
                arm.name.clone(),
                metric.to_string(),
                stat.mean.to_string(),
                stat.stdev.to_string(),
                stat.n.to_string(),
            ])
            .map_err(csv_error)?;
        }
    }
    finish(w)
}

/// Frontier table with columns `knob, phi_p_mean, phi_b_mean`, the first
/// holding the knob value.
pub fn frontier_csv(frontier: &FrontierReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["knob", "phi_p_mean", "phi_b_mean"]).map_err(csv_error)?;
    for p in &frontier.points {
        w.write_record([p.value.to_string(), p.phi_p_mean.to_string(), p.phi_b_mean.to_string()])
            .map_err(csv_error)?;
    }
    finish(w)
}

/// Pretty JSON with a trailing newline.
pub fn to_json_pretty<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value).map_err(csv_error)?;
    text.push('\n');
    Ok(text)
}
