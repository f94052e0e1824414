//! Convex per-sample losses and their derivative contracts.
//!
//! Every loss here is convex and differentiable everywhere in the scalar
//! input `z = w^T x`. Alongside the derivatives, each loss carries the two
//! constants the removal bounds depend on: a uniform bound `C` on the
//! per-sample gradient norm (valid under `||x||_2 <= 1`), and the Lipschitz
//! constant `gamma` of the second derivative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which loss a model was trained with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Logistic,
    LeastSquares,
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LossKind::Logistic => write!(f, "logistic"),
            LossKind::LeastSquares => write!(f, "least_squares"),
        }
    }
}

/// A convex loss together with the constants used by the residual bounds.
#[derive(Clone, Copy, Debug)]
pub struct ConvexLoss {
    kind: LossKind,
    grad_norm_bound_c: Option<f64>,
    second_deriv_lipschitz_gamma: f64,
}

impl ConvexLoss {
    /// Logistic loss `-log sigmoid(y z)` for targets `y in {-1, +1}`.
    ///
    /// Under `||x||_2 <= 1` the per-sample gradient norm is bounded by
    /// `C = 1` and the second derivative is `1/4`-Lipschitz.
    pub fn logistic() -> Self {
        Self {
            kind: LossKind::Logistic,
            grad_norm_bound_c: Some(1.0),
            second_deriv_lipschitz_gamma: 0.25,
        }
    }

    /// Squared loss `(z - y)^2` with real targets.
    ///
    /// The second derivative is the constant 2 (`gamma = 0`), so the Newton
    /// removal step is exact. No finite universal gradient-norm bound
    /// exists; one may be supplied via [`ConvexLoss::with_grad_norm_bound`]
    /// if the worst-case bound is wanted anyway.
    pub fn least_squares() -> Self {
        Self {
            kind: LossKind::LeastSquares,
            grad_norm_bound_c: None,
            second_deriv_lipschitz_gamma: 0.0,
        }
    }

    pub fn from_kind(kind: LossKind) -> Self {
        match kind {
            LossKind::Logistic => Self::logistic(),
            LossKind::LeastSquares => Self::least_squares(),
        }
    }

    /// Attach a user-supplied gradient-norm bound (least-squares metadata).
    pub fn with_grad_norm_bound(mut self, c: f64) -> Result<Self> {
        if !(c >= 0.0) {
            return Err(Error::Parameter(format!(
                "gradient-norm bound must be nonnegative, got {c}"
            )));
        }
        self.grad_norm_bound_c = Some(c);
        Ok(self)
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    /// Uniform bound on `||grad l(w^T x, y)||_2`, when one is known.
    pub fn grad_norm_bound(&self) -> Option<f64> {
        self.grad_norm_bound_c
    }

    /// Lipschitz constant of the scalar second derivative.
    pub fn gamma(&self) -> f64 {
        self.second_deriv_lipschitz_gamma
    }

    fn check_target(&self, y: f64) -> Result<()> {
        match self.kind {
            LossKind::Logistic => {
                if y == 1.0 || y == -1.0 {
                    Ok(())
                } else {
                    Err(Error::Domain(format!(
                        "logistic target must be +1 or -1, got {y}"
                    )))
                }
            }
            LossKind::LeastSquares => {
                if y.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Domain(format!(
                        "least-squares target must be finite, got {y}"
                    )))
                }
            }
        }
    }

    /// Loss value at scalar input `z = w^T x` and target `y`.
    pub fn value(&self, z: f64, y: f64) -> Result<f64> {
        self.check_target(y)?;
        Ok(match self.kind {
            LossKind::Logistic => softplus(-y * z),
            LossKind::LeastSquares => {
                let r = z - y;
                r * r
            }
        })
    }

    /// Scalar factor `s` such that the per-sample gradient is `s * x`.
    pub fn first_deriv(&self, z: f64, y: f64) -> Result<f64> {
        self.check_target(y)?;
        Ok(match self.kind {
            // (sigmoid(yz) - 1) y = -y * sigmoid(-yz), stable for all z
            LossKind::Logistic => -y * sigmoid(-y * z),
            LossKind::LeastSquares => 2.0 * (z - y),
        })
    }

    /// Scalar second derivative; the diagonal entry multiplying `x x^T`
    /// in the per-sample Hessian.
    pub fn second_deriv(&self, z: f64, y: f64) -> Result<f64> {
        self.check_target(y)?;
        Ok(match self.kind {
            LossKind::Logistic => {
                let t = y * z;
                sigmoid(t) * sigmoid(-t)
            }
            LossKind::LeastSquares => 2.0,
        })
    }
}

/// Numerically stable `1 / (1 + exp(-t))`.
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `log(1 + exp(t))`.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}
