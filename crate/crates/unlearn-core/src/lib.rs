//! Certified removal of training points from L2-regularized linear
//! classifiers.
//!
//! Models are trained with a random linear perturbation added to the
//! convex empirical risk ([`trainer`]). A trained point is removed with a
//! one-step Newton update that undoes its influence ([`removal`]); the
//! update's gradient residual is bounded per removal, and the bounds are
//! accumulated against a noise-determined budget ([`budget`]). While the
//! accumulated bound stays under `sigma * epsilon / c`, the sequence of
//! removals carries an (epsilon, delta) certified-removal guarantee; once
//! the budget is exhausted, the model must be retrained from scratch.
//! [`oracle`] holds brute-force references (exact retraining, direct
//! residual evaluation) for audits and tests.

// Link the system OpenBLAS for the cblas/lapack symbols used in `linalg`.
use openblas_src as _;

pub mod budget;
pub mod dataset;
pub mod error;
pub mod linalg;
pub mod loss;
pub mod oracle;
pub mod perturb;
pub mod removal;
pub mod trainer;

mod lbfgs;

pub use budget::{compose_with_dp_extractor, BudgetLedger, ChargeDecision, LedgerEntry};
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use loss::{ConvexLoss, LossKind};
pub use oracle::AuditReport;
pub use removal::{RemovalOutcome, RemovalState, RemovalStatus};
pub use trainer::{PerturbedModel, TrainParams};
