//! CSV ingestion: comma-separated reals, last column is the target, one
//! optional header line auto-detected. Logistic targets are validated to
//! {-1, +1}, with {0, 1} accepted and remapped. Features are normalized to
//! the unit ball on load.

use std::path::Path;

use ndarray::{Array1, Array2};
use unlearn_core::{Dataset, LossKind};

use crate::errors::CliError;

pub struct IngestReport {
    pub dataset: Dataset,
    /// Row scale applied by normalization (1.0 when rows already fit).
    pub scale: f64,
    /// True when {0,1} labels were remapped to {-1,+1}.
    pub remapped_labels: bool,
}

/// Raw parse: rows of features plus the label column, before any loss-
/// specific validation. Row numbers in errors are 1-based file lines.
pub fn read_raw_csv(path: &Path) -> Result<(Vec<Vec<f64>>, Vec<f64>), CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Ingest(format!("{}: {e}", path.display())))?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    let mut width: Option<usize> = None;

    for (idx, record) in reader.records().enumerate() {
        let line = idx + 1;
        let record =
            record.map_err(|e| CliError::Ingest(format!("row {line}: {e}")))?;
        if record.iter().all(|f| f.is_empty()) {
            continue; // trailing blank line
        }
        let parsed: Result<Vec<f64>, _> = record.iter().map(|f| f.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(e) => {
                if idx == 0 {
                    // single optional header line
                    continue;
                }
                let bad = record
                    .iter()
                    .find(|f| f.parse::<f64>().is_err())
                    .unwrap_or("");
                return Err(CliError::Ingest(format!(
                    "row {line}: non-numeric cell {bad:?} ({e})"
                )));
            }
        };
        if values.len() < 2 {
            return Err(CliError::Ingest(format!(
                "row {line}: need at least one feature column and one target column"
            )));
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(CliError::Ingest(format!(
                    "row {line}: has {} columns, expected {w}",
                    values.len()
                )));
            }
            _ => {}
        }
        let mut v = values;
        let label = v.pop().expect("checked len >= 2");
        rows.push(v);
        labels.push(label);
    }

    if rows.is_empty() {
        return Err(CliError::Ingest(format!(
            "{}: no data rows found",
            path.display()
        )));
    }
    Ok((rows, labels))
}

/// Build a normalized [`Dataset`] for the given loss from raw rows.
pub fn dataset_from_raw(
    rows: Vec<Vec<f64>>,
    labels: Vec<f64>,
    loss_kind: LossKind,
) -> Result<IngestReport, CliError> {
    let (features, mut targets) = to_arrays(rows, labels)?;
    let mut remapped = false;
    if loss_kind == LossKind::Logistic {
        let zero_one = targets.iter().all(|&y| y == 0.0 || y == 1.0);
        let plus_minus = targets.iter().all(|&y| y == 1.0 || y == -1.0);
        if plus_minus {
            // already valid
        } else if zero_one {
            targets.mapv_inplace(|y| if y == 0.0 { -1.0 } else { 1.0 });
            remapped = true;
        } else {
            let bad = targets
                .iter()
                .enumerate()
                .find(|(_, &y)| y != 1.0 && y != -1.0 && y != 0.0)
                .map(|(i, &y)| format!("row {} has label {y}", i + 1))
                .unwrap_or_else(|| "mixed 0/1 and -1/+1 labels".into());
            return Err(CliError::Ingest(format!(
                "logistic targets must be -1/+1 (or 0/1, remapped): {bad}"
            )));
        }
    }
    let dataset = Dataset::new(features, targets).map_err(CliError::Core)?;
    let (dataset, scale) = dataset.normalize();
    Ok(IngestReport {
        dataset,
        scale,
        remapped_labels: remapped,
    })
}

/// Full ingestion pipeline for one file.
pub fn ingest_csv(path: &Path, loss_kind: LossKind) -> Result<IngestReport, CliError> {
    let (rows, labels) = read_raw_csv(path)?;
    dataset_from_raw(rows, labels, loss_kind)
}

fn to_arrays(rows: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<(Array2<f64>, Array1<f64>), CliError> {
    let n = rows.len();
    let d = rows[0].len();
    let mut features = Array2::zeros((n, d));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            features[[i, j]] = v;
        }
    }
    Ok((features, Array1::from_vec(labels)))
}
