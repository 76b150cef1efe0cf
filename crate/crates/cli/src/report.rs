//! Typed JSON run reports.
//!
//! Field order is fixed by the struct definitions, so two runs of the same
//! spec and seed serialize byte-identically except for `timings_ms`, the
//! single top-level key holding wall-clock measurements.

use std::collections::BTreeMap;

use serde::Serialize;

use dpkmedian::{CoverReport, PipelineReport};

/// Top-level report written by every subcommand.
#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub inputs: InputEcho,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cover: Option<CoverSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<PipelineSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mechanisms: Option<MechanismsSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bench: Option<BenchSection>,
    /// Wall-clock milliseconds per phase. Excluded from determinism
    /// comparisons; everything else in the report is a pure function of the
    /// spec and seed.
    pub timings_ms: BTreeMap<String, f64>,
}

/// Echo of every input parameter, resolved to its effective value.
#[derive(Debug, Clone, Serialize)]
pub struct InputEcho {
    pub input: Option<String>,
    pub output: Option<String>,
    pub k: usize,
    pub eps: f64,
    pub eps_p: f64,
    pub delta_p: f64,
    pub seed: u64,
    pub repeats: usize,
    pub normalize: bool,
    pub d_prime: Option<usize>,
    pub budget_split: [f64; 3],
}

#[derive(Debug, Serialize)]
pub struct CoverSection {
    pub n: usize,
    pub dim: usize,
    pub k: usize,
    pub eps: f64,
    /// `exact-oracle` on tiny instances, `local-search` otherwise.
    pub reference_method: String,
    pub reference_cost: f64,
    pub report: CoverReport,
}

/// One seeded pipeline run. `centers` and `final_cost` are in the input's
/// original coordinates, so re-reading the report and recomputing the cost
/// of `centers` on the raw CSV reproduces `final_cost`.
#[derive(Debug, Serialize)]
pub struct PipelineCell {
    pub seed: u64,
    pub run: PipelineReport,
    pub centers: Vec<Vec<f64>>,
    pub final_cost: f64,
}

#[derive(Debug, Serialize)]
pub struct PipelineSection {
    pub cells: Vec<PipelineCell>,
}

#[derive(Debug, Serialize)]
pub struct OracleSection {
    pub n: usize,
    pub dim: usize,
    pub k: usize,
    /// Cost in the (possibly normalized) working coordinates.
    pub cost_working: f64,
    /// Centers and their cost in the input's original coordinates.
    pub centers: Vec<Vec<f64>>,
    pub final_cost: f64,
    pub iterations: usize,
}

/// Seeded distribution diagnostics for the noise primitives.
#[derive(Debug, Serialize)]
pub struct MechanismsSection {
    pub draws: usize,
    pub laplace_scale: f64,
    pub laplace_mean: f64,
    pub laplace_var: f64,
    pub laplace_var_expected: f64,
    /// Selection counts for a two-option score gap of 1.
    pub exp_gap_counts: [usize; 2],
    /// Smoothed empirical log-odds (0.5 added to each count).
    pub exp_log_odds: f64,
    pub exp_log_odds_expected: f64,
    /// Selection counts over four equal-score options at eps = 0.
    pub uniform_counts: Vec<usize>,
    pub uniform_chi_square: f64,
}

#[derive(Debug, Serialize)]
pub struct BenchCell {
    pub seed: u64,
    pub final_cost: f64,
    pub ratio_vs_baseline: f64,
}

#[derive(Debug, Serialize)]
pub struct BenchSection {
    /// Non-private local-search cost on the same data, original coordinates.
    pub baseline_cost: f64,
    pub cells: Vec<BenchCell>,
    pub min_ratio: f64,
    pub median_ratio: f64,
    pub max_ratio: f64,
}

impl Report {
    pub fn new(command: &str, inputs: InputEcho) -> Self {
        Self {
            command: command.to_string(),
            inputs,
            cover: None,
            pipeline: None,
            oracle: None,
            mechanisms: None,
            bench: None,
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
