//! Differentially private Euclidean k-median clustering.
//!
//! The crate provides three layers:
//!
//! - **Solvers** ([`kmedian`]): weighted geometric medians (Weiszfeld),
//!   greedy-init single-swap local search over a candidate set, and
//!   exhaustive oracles that make approximation factors checkable on small
//!   instances.
//! - **Covers** ([`cover`]): geometric threshold ladders and lattice ball
//!   covers that enrich a center set while provably capping the cost any
//!   point pays for snapping to the enriched set.
//! - **Private pipeline** ([`dp`], [`pipeline`]): Laplace and exponential
//!   mechanisms, a private bi-criteria solver, noisy multiplicities, and
//!   per-cluster private median recovery, composed into a five-stage
//!   procedure for data in the unit ball with an explicit budget ledger.
//!
//! All randomness flows through one seeded stream ([`rng::SeededRng`]), so
//! every run is reproducible from its seed. The `parallel` feature (on by
//! default) switches the data-parallel rayon paths in; sequential fallbacks
//! produce bit-identical results.

pub mod cover;
pub mod dp;
pub mod geometry;
pub mod kmedian;
pub mod pipeline;
pub mod rng;

pub use cover::{build_thresholds, threshold_cover, verify_cover_bound, CoverReport};
pub use dp::{BudgetLedger, PrivacyBudget};
pub use geometry::{CenterSet, Dataset, Point};
pub use kmedian::{exact_kmedian_oracle, geometric_median, local_search_kmedian, SolverResult};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineReport};
pub use rng::SeededRng;
