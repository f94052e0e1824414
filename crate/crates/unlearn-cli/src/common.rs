//! Shared helpers for the subcommands: index parsing, accuracy reporting,
//! and dataset reconstruction for models trained on subsampled rows.

use std::path::Path;

use ndarray::{Array1, Array2};
use unlearn_core::{Dataset, LossKind};

use crate::errors::CliError;
use crate::ingest;
use crate::model_file::ModelFile;

/// Parse `--indices`: either an inline comma-separated list or a path to a
/// file containing indices (comma- or line-separated).
pub fn parse_indices(arg: &str) -> Result<Vec<usize>, CliError> {
    let inline: Result<Vec<usize>, _> = arg
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse::<usize>)
        .collect();
    if let Ok(list) = inline {
        if !list.is_empty() {
            return Ok(list);
        }
    }
    let path = Path::new(arg);
    let contents = std::fs::read_to_string(path).map_err(|e| {
        CliError::Validation(format!(
            "--indices {arg:?} is neither a comma-separated index list nor a readable file: {e}"
        ))
    })?;
    let list: Result<Vec<usize>, _> = contents
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(str::parse::<usize>)
        .collect();
    match list {
        Ok(l) if !l.is_empty() => Ok(l),
        _ => Err(CliError::Validation(format!(
            "index file {arg:?} contains no parseable indices"
        ))),
    }
}

/// Fraction of rows whose margin sign matches the +-1 target.
pub fn sign_accuracy(data: &Dataset, weights: &Array1<f64>) -> Result<f64, CliError> {
    let margins =
        unlearn_core::trainer::decision_values(data, &weights.view()).map_err(CliError::Core)?;
    let correct = (0..data.n())
        .filter(|&i| {
            let pred = if margins[i] >= 0.0 { 1.0 } else { -1.0 };
            pred == data.target(i)
        })
        .count();
    Ok(correct as f64 / data.n() as f64)
}

/// Root-mean-square residual, for least-squares reporting.
pub fn rmse(data: &Dataset, weights: &Array1<f64>) -> Result<f64, CliError> {
    let margins =
        unlearn_core::trainer::decision_values(data, &weights.view()).map_err(CliError::Core)?;
    let sse: f64 = (0..data.n())
        .map(|i| {
            let r = margins[i] - data.target(i);
            r * r
        })
        .sum();
    Ok((sse / data.n() as f64).sqrt())
}

/// Rebuild the exact training dataset a model file was fit on.
///
/// Plain binary models retrain the full ingested file. One-vs-all models
/// (which carry `row_indices` and `class_label`) reconstruct their
/// subsampled row set with targets remapped against the stored class.
pub fn dataset_for_model(model_file: &ModelFile, data_path: &Path) -> Result<Dataset, CliError> {
    match (&model_file.row_indices, model_file.class_label) {
        (Some(rows), Some(label)) => {
            let (raw_rows, raw_labels) = ingest::read_raw_csv(data_path)?;
            let d = raw_rows[0].len();
            let mut features = Array2::zeros((rows.len(), d));
            let mut targets = Array1::zeros(rows.len());
            for (out, &r) in rows.iter().enumerate() {
                let row = raw_rows.get(r).ok_or_else(|| {
                    CliError::ModelFile(format!(
                        "row_indices references row {r}, but the data file has {} rows",
                        raw_rows.len()
                    ))
                })?;
                for (j, v) in row.iter().enumerate() {
                    features[[out, j]] = *v;
                }
                targets[out] = if raw_labels[r] == label { 1.0 } else { -1.0 };
            }
            let (data, _) = Dataset::new(features, targets)
                .map_err(CliError::Core)?
                .normalize();
            Ok(data)
        }
        (None, None) => Ok(ingest::ingest_csv(data_path, model_file.hyperparams.loss)?.dataset),
        _ => Err(CliError::ModelFile(
            "model file has one of row_indices/class_label but not both".into(),
        )),
    }
}

/// Map original-dataset indices onto a model's local row positions.
///
/// For plain models this is the identity (after a range check); for
/// one-vs-all models, originals absent from the model's subsample are
/// returned separately so the caller can report them as skipped.
pub fn map_indices_to_local(
    model_file: &ModelFile,
    originals: &[usize],
) -> (Vec<usize>, Vec<usize>) {
    match &model_file.row_indices {
        None => (originals.to_vec(), Vec::new()),
        Some(rows) => {
            let mut local = Vec::new();
            let mut missing = Vec::new();
            for &orig in originals {
                match rows.iter().position(|&r| r == orig) {
                    Some(pos) => local.push(pos),
                    None => missing.push(orig),
                }
            }
            (local, missing)
        }
    }
}

pub fn format_loss_metric(
    loss: LossKind,
    data: &Dataset,
    weights: &Array1<f64>,
) -> Result<String, CliError> {
    Ok(match loss {
        LossKind::Logistic => format!("train_accuracy={}", sign_accuracy(data, weights)?),
        LossKind::LeastSquares => format!("train_rmse={}", rmse(data, weights)?),
    })
}
