//! Differential-privacy building blocks: budget accounting, the base noise
//! mechanisms, a private bi-criteria k-median stage, and a private geometric
//! median recovery stage.

pub mod bicriteria;
pub mod mechanisms;
pub mod median;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::GeometryError;
use crate::kmedian::KmedianError;

#[derive(Debug, Error)]
pub enum DpError {
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("delta must lie in [0, 1), got {0}")]
    InvalidDelta(f64),
    #[error("noise scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("sensitivity must be positive and finite, got {0}")]
    InvalidSensitivity(f64),
    #[error("score list must be non-empty")]
    EmptyScores,
    #[error("score at index {0} is not finite")]
    NonFiniteScore(usize),
    #[error("prior length {prior} does not match score length {scores}")]
    PriorMismatch { prior: usize, scores: usize },
    #[error("prior weight at index {0} is not finite and non-negative")]
    InvalidPrior(usize),
    #[error("counts must be finite and non-negative, got {0}")]
    InvalidCount(f64),
    #[error("this mechanism requires delta > 0")]
    DeltaRequired,
    #[error("ball radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("input must contain at least one point")]
    EmptyInput,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Kmedian(#[from] KmedianError),
}

/// An (epsilon, delta) differential-privacy budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrivacyBudget {
    pub eps: f64,
    pub delta: f64,
}

impl PrivacyBudget {
    pub fn new(eps: f64, delta: f64) -> Result<Self, DpError> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(DpError::InvalidEpsilon(eps));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(DpError::InvalidDelta(delta));
        }
        Ok(Self { eps, delta })
    }

    /// Pure-epsilon budget (delta = 0).
    pub fn pure(eps: f64) -> Result<Self, DpError> {
        Self::new(eps, 0.0)
    }
}

/// One charged stage in a [`BudgetLedger`].
#[derive(Debug, Clone, Serialize)]
pub struct LedgerEntry {
    pub stage: String,
    pub eps: f64,
    pub delta: f64,
}

/// Running record of the privacy budget spent by each stage of a run.
/// Totals compose additively.
#[derive(Debug, Clone, Default, Serialize)]
pub struct BudgetLedger {
    entries: Vec<LedgerEntry>,
}

impl BudgetLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&mut self, stage: &str, eps: f64, delta: f64) {
        self.entries.push(LedgerEntry {
            stage: stage.to_string(),
            eps,
            delta,
        });
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn total_eps(&self) -> f64 {
        self.entries.iter().map(|e| e.eps).sum()
    }

    pub fn total_delta(&self) -> f64 {
        self.entries.iter().map(|e| e.delta).sum()
    }

    /// True when the summed charges stay within `budget`.
    pub fn within(&self, budget: &PrivacyBudget) -> bool {
        self.total_eps() <= budget.eps && self.total_delta() <= budget.delta
    }
}
