//! Gradient-residual budget accounting.
//!
//! Training with Gaussian perturbation of standard deviation `sigma` buys a
//! total gradient-residual allowance of `beta_max = sigma * epsilon / c`
//! with `c = sqrt(2 log(1.5 / delta))`. Each accepted removal charges its
//! data-dependent bound increment against the allowance; once a charge
//! would push the running total past `beta_max`, the model must be
//! retrained from scratch.
//!
//! A single `delta` covers the whole removal sequence: the cap on the
//! accumulated bound is what carries the guarantee across removals, so
//! `delta` is not split per removal. After a retrain (fresh perturbation),
//! the ledger is reset with a fresh budget; composing guarantees across
//! retrain cycles is the operator's responsibility.

use serde::{Deserialize, Serialize};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::{Error, Result};

/// One accepted charge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub timestamp_ms: u64,
    pub batch_size: usize,
    pub increment: f64,
}

/// Decision returned by [`BudgetLedger::try_charge`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChargeDecision {
    Accepted,
    RetrainRequired,
}

/// Append-only accounting of residual-bound increments against
/// `beta_max = sigma * epsilon / c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub epsilon: f64,
    pub delta: f64,
    pub sigma: f64,
    pub c_value: f64,
    pub beta_accumulated: f64,
    pub beta_max: f64,
    pub entries: Vec<LedgerEntry>,
}

impl BudgetLedger {
    /// Build a fresh ledger.
    ///
    /// Requires `epsilon > 0`, `0 < delta < 1.5`, and `sigma >= 0`.
    /// `sigma = 0` is the degenerate no-noise case: `beta_max = 0`, so any
    /// positive charge forces a retrain (the certified-removal guarantee is
    /// vacuous without noise).
    pub fn new(epsilon: f64, delta: f64, sigma: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::Parameter(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if !(delta > 0.0 && delta < 1.5) {
            return Err(Error::Parameter(format!(
                "delta must lie in (0, 1.5), got {delta}"
            )));
        }
        if !(sigma >= 0.0) {
            return Err(Error::Parameter(format!(
                "sigma must be nonnegative, got {sigma}"
            )));
        }
        let c_value = (2.0 * (1.5 / delta).ln()).sqrt();
        let beta_max = sigma * epsilon / c_value;
        Ok(Self {
            epsilon,
            delta,
            sigma,
            c_value,
            beta_accumulated: 0.0,
            beta_max,
            entries: Vec::new(),
        })
    }

    /// Validate a deserialized ledger against its own invariants.
    pub fn validate(&self) -> Result<()> {
        let c = (2.0 * (1.5 / self.delta).ln()).sqrt();
        if (self.c_value - c).abs() > 1e-12 * c.abs().max(1.0) {
            return Err(Error::Parameter(format!(
                "ledger c_value {} does not match sqrt(2 log(1.5/delta)) = {c}",
                self.c_value
            )));
        }
        let bm = self.sigma * self.epsilon / c;
        if (self.beta_max - bm).abs() > 1e-12 * bm.abs().max(1.0) {
            return Err(Error::Parameter(format!(
                "ledger beta_max {} does not match sigma*epsilon/c = {bm}",
                self.beta_max
            )));
        }
        let replay: f64 = self.entries.iter().map(|e| e.increment).sum();
        if replay != self.beta_accumulated {
            return Err(Error::Parameter(format!(
                "ledger replay {replay} does not reproduce beta_accumulated {}",
                self.beta_accumulated
            )));
        }
        if self.beta_accumulated > self.beta_max {
            return Err(Error::Parameter(format!(
                "accumulated bound {} exceeds beta_max {}",
                self.beta_accumulated, self.beta_max
            )));
        }
        Ok(())
    }

    /// Remaining allowance `beta_max - beta_accumulated`.
    pub fn budget_remaining(&self) -> f64 {
        self.beta_max - self.beta_accumulated
    }

    /// Charge one removal's bound increment.
    ///
    /// Accepts when `beta_accumulated + increment <= beta_max` (the
    /// boundary is inclusive; retraining triggers only on strict excess)
    /// and appends a ledger entry. On rejection the ledger is unchanged.
    pub fn try_charge(&mut self, batch_size: usize, increment: f64) -> Result<ChargeDecision> {
        if !(increment >= 0.0) {
            return Err(Error::Parameter(format!(
                "increment must be nonnegative, got {increment}"
            )));
        }
        if self.beta_accumulated + increment > self.beta_max {
            return Ok(ChargeDecision::RetrainRequired);
        }
        self.beta_accumulated += increment;
        self.entries.push(LedgerEntry {
            timestamp_ms: now_ms(),
            batch_size,
            increment,
        });
        Ok(ChargeDecision::Accepted)
    }

    /// `floor((beta_max - beta_accumulated) / typical_increment)`.
    pub fn supported_removals_estimate(&self, typical_increment: f64) -> Result<u64> {
        if !(typical_increment > 0.0) {
            return Err(Error::Parameter(format!(
                "typical_increment must be positive, got {typical_increment}"
            )));
        }
        Ok((self.budget_remaining() / typical_increment).floor().max(0.0) as u64)
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Composition with a differentially private feature extractor: an
/// `(eps_dp, delta_dp)`-DP extractor feeding an `(eps_cr, delta_cr)`
/// removal-enabled linear model yields an
/// `(eps_dp + eps_cr, delta_dp + delta_cr)` guarantee overall.
pub fn compose_with_dp_extractor(
    eps_dp: f64,
    delta_dp: f64,
    eps_cr: f64,
    delta_cr: f64,
) -> Result<(f64, f64)> {
    for (name, v) in [
        ("eps_dp", eps_dp),
        ("delta_dp", delta_dp),
        ("eps_cr", eps_cr),
        ("delta_cr", delta_cr),
    ] {
        if !(v >= 0.0) {
            return Err(Error::Parameter(format!(
                "{name} must be nonnegative, got {v}"
            )));
        }
    }
    Ok((eps_dp + eps_cr, delta_dp + delta_cr))
}
