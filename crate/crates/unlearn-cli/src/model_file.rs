//! On-disk model format: a single JSON document, schema version 1.
//!
//! Scalars are serialized as JSON numbers with shortest round-trip
//! precision, so `load(save(m))` reproduces every scalar bit-exactly.
//! All mutating commands write to a temporary file in the destination
//! directory and rename it into place.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use unlearn_core::{BudgetLedger, Dataset, LossKind, PerturbedModel, RemovalState};

use crate::errors::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Hyperparams {
    pub lambda: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub loss: LossKind,
    pub grad_tol: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RemovalStateFile {
    pub n_rows: usize,
    /// Packed bitset, hex-encoded; bit i (LSB-first within each byte) is
    /// row i's live flag.
    pub live_mask: String,
    pub live_count: usize,
    #[serde(rename = "gram_K")]
    pub gram_k: Vec<Vec<f64>>,
}

/// One completed removal cycle, archived when the model is retrained.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArchivedCycle {
    pub retrained_at_ms: u64,
    pub removed_indices: Vec<usize>,
    pub ledger: BudgetLedger,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub weights: Vec<f64>,
    pub perturbation_b: Vec<f64>,
    pub hyperparams: Hyperparams,
    pub seed: u64,
    pub ledger: BudgetLedger,
    pub removal_state: RemovalStateFile,
    pub dataset_fingerprint: String,
    /// Original-dataset row ids for one-vs-all models trained on a
    /// subsampled row set; absent for plain binary models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_indices: Option<Vec<usize>>,
    /// The positive class this one-vs-all model separates; set together
    /// with `row_indices`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_label: Option<f64>,
    /// Removal history preserved across retrains.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub archived_removals: Option<Vec<ArchivedCycle>>,
}

/// Manifest written by `train --multiclass`, pointing at the per-class
/// one-vs-all model files.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MulticlassManifest {
    pub schema_version: u32,
    pub kind: String,
    pub class_labels: Vec<f64>,
    pub model_files: Vec<String>,
    pub dataset_fingerprint: String,
}

pub fn pack_live_mask(mask: &[bool]) -> String {
    let mut bytes = vec![0u8; mask.len().div_ceil(8)];
    for (i, &m) in mask.iter().enumerate() {
        if m {
            bytes[i / 8] |= 1 << (i % 8);
        }
    }
    hex::encode(bytes)
}

pub fn unpack_live_mask(packed: &str, n_rows: usize) -> Result<Vec<bool>, CliError> {
    let bytes = hex::decode(packed)
        .map_err(|e| CliError::ModelFile(format!("live_mask is not valid hex: {e}")))?;
    if bytes.len() != n_rows.div_ceil(8) {
        return Err(CliError::ModelFile(format!(
            "live_mask has {} bytes, expected {} for {n_rows} rows",
            bytes.len(),
            n_rows.div_ceil(8)
        )));
    }
    Ok((0..n_rows)
        .map(|i| bytes[i / 8] & (1 << (i % 8)) != 0)
        .collect())
}

impl ModelFile {
    pub fn from_parts(
        model: &PerturbedModel,
        state: &RemovalState,
        ledger: &BudgetLedger,
        loss: LossKind,
        dataset_fingerprint: String,
        class_info: Option<(Vec<usize>, f64)>,
        archived_removals: Option<Vec<ArchivedCycle>>,
    ) -> Self {
        let (row_indices, class_label) = match class_info {
            Some((rows, label)) => (Some(rows), Some(label)),
            None => (None, None),
        };
        let gram = state.gram();
        let gram_k = gram
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect::<Vec<_>>();
        ModelFile {
            schema_version: SCHEMA_VERSION,
            weights: model.weights.to_vec(),
            perturbation_b: model.perturbation.to_vec(),
            hyperparams: Hyperparams {
                lambda: model.lambda,
                sigma: model.sigma,
                epsilon: model.epsilon,
                delta: model.delta,
                loss,
                grad_tol: model.grad_tol,
            },
            seed: model.seed,
            ledger: ledger.clone(),
            removal_state: RemovalStateFile {
                n_rows: state.n_rows(),
                live_mask: pack_live_mask(state.live_mask()),
                live_count: state.live_count(),
                gram_k,
            },
            dataset_fingerprint,
            row_indices,
            class_label,
            archived_removals,
        }
    }

    /// Reconstruct the in-memory model, removal state, and ledger,
    /// revalidating invariants.
    pub fn into_parts(&self) -> Result<(PerturbedModel, RemovalState, BudgetLedger), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::ModelFile(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let d = self.weights.len();
        if self.perturbation_b.len() != d {
            return Err(CliError::ModelFile(format!(
                "perturbation_b has length {}, weights {d}",
                self.perturbation_b.len()
            )));
        }
        let rs = &self.removal_state;
        if rs.gram_k.len() != d || rs.gram_k.iter().any(|r| r.len() != d) {
            return Err(CliError::ModelFile(format!(
                "gram_K must be {d}x{d} to match the weight dimension"
            )));
        }
        let mut gram = Array2::zeros((d, d));
        for (i, row) in rs.gram_k.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                gram[[i, j]] = *v;
            }
        }
        let mask = unpack_live_mask(&rs.live_mask, rs.n_rows)?;
        let state = RemovalState::from_parts(gram, mask, rs.live_count).map_err(CliError::Core)?;
        self.ledger.validate().map_err(CliError::Core)?;

        let model = PerturbedModel {
            weights: Array1::from_vec(self.weights.clone()),
            perturbation: Array1::from_vec(self.perturbation_b.clone()),
            lambda: self.hyperparams.lambda,
            sigma: self.hyperparams.sigma,
            epsilon: self.hyperparams.epsilon,
            delta: self.hyperparams.delta,
            seed: self.seed,
            grad_tol: self.hyperparams.grad_tol,
        };
        Ok((model, state, self.ledger.clone()))
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::ModelFile(format!("serialization failed: {e}")))?;
        atomic_write(path, json.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let contents = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&contents)
            .map_err(|e| CliError::ModelFile(format!("{}: {e}", path.display())))
    }
}

impl MulticlassManifest {
    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::ModelFile(format!("serialization failed: {e}")))?;
        atomic_write(path, json.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let contents = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let manifest: MulticlassManifest = serde_json::from_str(&contents)
            .map_err(|e| CliError::ModelFile(format!("{}: {e}", path.display())))?;
        if manifest.kind != "one_vs_all" {
            return Err(CliError::ModelFile(format!(
                "{} is not a one-vs-all manifest",
                path.display()
            )));
        }
        Ok(manifest)
    }
}

/// Write-to-temp-then-rename in the destination directory, so a crash can
/// never leave a half-written model file at the target path.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => d.join(format!(
            ".{}.tmp.{}",
            path.file_name().and_then(|f| f.to_str()).unwrap_or("model"),
            std::process::id()
        )),
        None => std::path::PathBuf::from(format!(".model.tmp.{}", std::process::id())),
    };
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::io(path, e)
    })?;
    Ok(())
}

/// `sha256:<hex>` of the raw file bytes.
pub fn fingerprint_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("sha256:{}", hex::encode(hasher.finalize())))
}

/// Abort (validation error) when the model's stored fingerprint does not
/// match the data file on disk.
pub fn check_fingerprint(stored: &str, data_path: &Path) -> Result<(), CliError> {
    let actual = fingerprint_file(data_path)?;
    if stored != actual {
        return Err(CliError::Validation(format!(
            "dataset fingerprint mismatch: model was trained on {stored}, \
             but {} hashes to {actual}",
            data_path.display()
        )));
    }
    Ok(())
}

/// Build a [`Dataset`]-backed removal state for rows that are still live.
pub fn state_over_live_rows(data: &Dataset, live_mask: Vec<bool>) -> Result<RemovalState, CliError> {
    let live: Vec<usize> = live_mask
        .iter()
        .enumerate()
        .filter_map(|(i, &m)| m.then_some(i))
        .collect();
    let sub = data.subset(&live).map_err(CliError::Core)?;
    let gram = unlearn_core::linalg::gram(&sub.features()).map_err(CliError::Core)?;
    let count = live.len();
    RemovalState::from_parts(gram, live_mask, count).map_err(CliError::Core)
}
