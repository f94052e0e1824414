//! Feature matrix plus targets, with the norm-constraint bookkeeping the
//! removal bounds rely on.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Slack allowed on the `||x_i||_2 <= 1` invariant after normalization.
pub const NORM_SLACK: f64 = 1e-12;

/// An immutable training set: rows are samples, the target vector is
/// parallel to the rows.
#[derive(Clone, Debug)]
pub struct Dataset {
    features: Array2<f64>,
    targets: Array1<f64>,
    normalized: bool,
}

impl Dataset {
    /// Validates shapes and finiteness. `normalized` starts out false;
    /// call [`Dataset::normalize`] to enforce the row-norm constraint.
    pub fn new(features: Array2<f64>, targets: Array1<f64>) -> Result<Self> {
        let (n, d) = features.dim();
        if n == 0 || d == 0 {
            return Err(Error::Shape(format!(
                "dataset must have n >= 1 and d >= 1, got {n}x{d}"
            )));
        }
        if targets.len() != n {
            return Err(Error::Shape(format!(
                "targets length {} does not match {} rows",
                targets.len(),
                n
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("features contain NaN or Inf".into()));
        }
        if targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("targets contain NaN or Inf".into()));
        }
        Ok(Self {
            features,
            targets,
            normalized: false,
        })
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn targets(&self) -> ArrayView1<'_, f64> {
        self.targets.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    pub fn max_row_norm(&self) -> f64 {
        self.features
            .rows()
            .into_iter()
            .map(|r| r.dot(&r).sqrt())
            .fold(0.0, f64::max)
    }

    /// Scale all rows by `1 / max_i ||x_i||_2` when that max exceeds 1.
    ///
    /// Returns the dataset (with `normalized = true`) and the scale factor
    /// applied to every row (1.0 when no scaling was needed, including the
    /// all-zero case). Targets are untouched. A max norm within `NORM_SLACK`
    /// of 1 already satisfies the invariant and is left alone, which makes
    /// normalization idempotent despite rounding in the division.
    pub fn normalize(mut self) -> (Self, f64) {
        let max_norm = self.max_row_norm();
        let scale = if max_norm > 1.0 + NORM_SLACK {
            1.0 / max_norm
        } else {
            1.0
        };
        if scale != 1.0 {
            self.features *= scale;
        }
        self.normalized = true;
        (self, scale)
    }

    /// Marks an already-compliant dataset as normalized.
    ///
    /// Errors if some row norm exceeds `1 + NORM_SLACK`.
    pub fn assert_normalized(mut self) -> Result<Self> {
        let max_norm = self.max_row_norm();
        if max_norm > 1.0 + NORM_SLACK {
            return Err(Error::Parameter(format!(
                "dataset has max row norm {max_norm}, expected <= 1"
            )));
        }
        self.normalized = true;
        Ok(self)
    }

    /// New dataset containing only `rows`, in the given order.
    /// Normalization status is inherited (a subset of unit-ball rows stays
    /// in the unit ball).
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let d = self.dim();
        let mut features = Array2::zeros((rows.len(), d));
        let mut targets = Array1::zeros(rows.len());
        for (out, &r) in rows.iter().enumerate() {
            if r >= self.n() {
                return Err(Error::StaleIndex(format!(
                    "row {r} out of range for dataset with {} rows",
                    self.n()
                )));
            }
            features.row_mut(out).assign(&self.features.row(r));
            targets[out] = self.targets[r];
        }
        if rows.is_empty() {
            return Err(Error::Shape("subset must contain at least one row".into()));
        }
        Ok(Self {
            features,
            targets,
            normalized: self.normalized,
        })
    }
}
