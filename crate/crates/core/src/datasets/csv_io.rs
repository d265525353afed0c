use std::path::Path;

use super::LabeledDataset;
use crate::{Error, Result};

/// Reads a comma-separated file with a header row; the last column is the label.
pub fn load_csv(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    let headers = reader.headers().map_err(csv_error)?.clone();
    if headers.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "missing header row".into(),
        });
    }
    let n_features = headers.len() - 1;
    let names: Vec<String> = headers.iter().take(n_features).map(str::to_string).collect();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        for (col, cell) in record.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("non-numeric cell `{cell}` in column {}", col + 1),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite cell `{cell}` in column {}", col + 1),
                });
            }
            if col == n_features {
                labels.push(value);
            } else {
                features.push(value);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    LabeledDataset::from_flat(features, n_features, labels, names)
}

fn csv_error(err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    let message = match err.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("ragged row: {len} cells, expected {expected_len}")
        }
        _ => err.to_string(),
    };
    Error::Parse { line, message }
}

/// Writes `ds` with a `label` column last. Values use the shortest
/// representation that reads back to the same `f64`.
pub fn save_csv(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    let mut header: Vec<&str> = ds.feature_names().iter().map(String::as_str).collect();
    header.push("label");
    writer.write_record(&header).map_err(csv_error)?;
    for (row, label) in ds.rows().zip(ds.labels()) {
        let cells: Vec<String> = row.iter().chain(std::iter::once(label)).map(|v| v.to_string()).collect();
        writer.write_record(&cells).map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SplitMix64;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, body: &str) -> std::path::PathBuf {
        let path = dir.path().join("data.csv");
        std::fs::File::create(&path).unwrap().write_all(body.as_bytes()).unwrap();
        path
    }

    #[test]
    fn empty_body_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(load_csv(write(&dir, "a,b,label\n")).unwrap_err(), Error::EmptyDataset);
    }

    #[test]
    fn single_record_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = LabeledDataset::new(vec![vec![0.1, -2.5]], vec![1.0], vec!["a".into(), "b".into()]).unwrap();
        let path = dir.path().join("one.csv");
        save_csv(&ds, &path).unwrap();
        assert_eq!(load_csv(&path).unwrap(), ds);
    }

    #[test]
    fn random_dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = SplitMix64::new(10);
        let rows: Vec<Vec<f64>> = (0..1000).map(|_| (0..3).map(|_| rng.normal() * 1e3).collect()).collect();
        let labels = (0..1000).map(|_| rng.normal()).collect();
        let ds = LabeledDataset::new(rows, labels, LabeledDataset::default_names(3)).unwrap();
        let path = dir.path().join("big.csv");
        save_csv(&ds, &path).unwrap();
        let back = load_csv(&path).unwrap();
        let max_diff = ds
            .features_flat()
            .iter()
            .chain(ds.labels())
            .zip(back.features_flat().iter().chain(back.labels()))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_diff <= 1e-12);
    }

    #[test]
    fn ragged_and_non_numeric_rows_report_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        match load_csv(write(&dir, "a,label\n1,0\n2\n")).unwrap_err() {
            Error::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("ragged"));
            }
            other => panic!("unexpected {other:?}"),
        }
        match load_csv(write(&dir, "a,label\n1,0\n2,1\nx,0\n")).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }
}
