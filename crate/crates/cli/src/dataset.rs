//! CSV ingestion and emission.
//!
//! Dataset files have the header `x0,..,x{d-1},y,m0,..,m{M-1}`; labels and
//! expert predictions are 0-indexed class indices.

use std::path::Path;

use defer_lab_core::{ConditionalPoint, LabeledSample};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
    pub feature_dim: usize,
}

fn header_names(d: usize, m: usize) -> Vec<String> {
    (0..d)
        .map(|i| format!("x{i}"))
        .chain(std::iter::once("y".to_string()))
        .chain((0..m).map(|j| format!("m{j}")))
        .collect()
}

/// Load a dataset for a task with `k` classes and `m` experts.
pub fn load_dataset(path: &Path, k: usize, m: usize) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let fail = |row: u64, message: String| CliError::Dataset {
        path: path.to_path_buf(),
        row,
        message,
    };

    let header = reader
        .headers()
        .map_err(|e| fail(1, e.to_string()))?
        .clone();
    let width = header.len();
    if width < m + 2 {
        return Err(fail(
            1,
            format!("expected at least one feature column, `y` and {m} expert columns"),
        ));
    }
    let d = width - 1 - m;
    let expected = header_names(d, m);
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(fail(1, format!("header must be `{}`", expected.join(","))));
    }

    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line());
            let message = match e.kind() {
                csv::ErrorKind::UnequalLengths {
                    expected_len, len, ..
                } => format!("row has {len} fields, header has {expected_len}"),
                _ => e.to_string(),
            };
            fail(row, message)
        })?;
        let row = record.position().map_or(0, |p| p.line());
        let mut features = Vec::with_capacity(d);
        for (i, field) in record.iter().take(d).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| fail(row, format!("x{i}: `{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(fail(row, format!("x{i}: non-finite value `{field}`")));
            }
            features.push(v);
        }
        let class = |name: String, field: &str| -> Result<usize> {
            let c: usize = field
                .parse()
                .map_err(|_| fail(row, format!("{name}: `{field}` is not a class index")))?;
            if c >= k {
                return Err(fail(row, format!("{name}: class {c} outside 0..{k}")));
            }
            Ok(c)
        };
        let label = class("y".into(), &record[d])?;
        let experts = (0..m)
            .map(|j| class(format!("m{j}"), &record[d + 1 + j]))
            .collect::<Result<Vec<_>>>()?;
        samples.push(LabeledSample {
            features,
            label,
            experts,
        });
    }
    if samples.is_empty() {
        return Err(fail(1, "dataset has no rows".into()));
    }
    log::info!(
        "loaded {} rows with {d} features from {}",
        samples.len(),
        path.display()
    );
    Ok(Dataset {
        samples,
        feature_dim: d,
    })
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::Artifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Artifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Write samples in the dataset layout. Floats are written in their shortest
/// round-trip form, so reloading reproduces them exactly.
pub fn write_dataset(path: &Path, samples: &[LabeledSample]) -> Result<()> {
    let first = samples
        .first()
        .ok_or_else(|| CliError::Invalid("cannot write an empty dataset".into()))?;
    let mut w = writer(path)?;
    w.write_record(header_names(first.features.len(), first.experts.len()))
        .map_err(csv_err(path))?;
    for s in samples {
        let row = s
            .features
            .iter()
            .map(f64::to_string)
            .chain(std::iter::once(s.label.to_string()))
            .chain(s.experts.iter().map(usize::to_string));
        w.write_record(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Ground truth per row: `eta0..eta{K-1}, p0..p{M-1}`.
pub fn write_truth(path: &Path, truth: &[ConditionalPoint]) -> Result<()> {
    let first = truth
        .first()
        .ok_or_else(|| CliError::Invalid("cannot write empty ground truth".into()))?;
    let mut w = writer(path)?;
    let header: Vec<String> = (0..first.eta.len())
        .map(|i| format!("eta{i}"))
        .chain((0..first.p.len()).map(|j| format!("p{j}")))
        .collect();
    w.write_record(&header).map_err(csv_err(path))?;
    for t in truth {
        w.write_record(t.eta.iter().chain(&t.p).map(f64::to_string))
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
