//! Five-stage private k-median pipeline: random projection with clamping, a
//! private bi-criteria solve in the projected space, noisy multiplicities,
//! a non-private solve of the small snapped instance, and per-cluster
//! private median recovery back in the original dimension.

use serde::Serialize;
use thiserror::Error;

use crate::cover::{self, CoverError};
use crate::dp::bicriteria;
use crate::dp::mechanisms;
use crate::dp::median;
use crate::dp::{BudgetLedger, DpError, PrivacyBudget};
use crate::geometry::{self, CenterSet, Dataset, GeometryError, Point};
use crate::kmedian::{self, KmedianError};
use crate::rng::SeededRng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Default multiplier in the projected-dimension formula
/// d' = ceil(jl_constant * ln(max(k,2)) / eps^2).
pub const DEFAULT_JL_CONSTANT: f64 = 8.0;

/// Default ceiling on the bi-criteria center count k'.
pub const DEFAULT_K_PRIME_CAP: usize = 8;

/// Default swap budget for the non-private snapped-instance solve.
pub const DEFAULT_MAX_SWAPS: usize = 100;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("eps must lie in (0, 0.5], got {0}")]
    InvalidEps(f64),
    #[error("jl constant must be positive and finite, got {0}")]
    InvalidJlConstant(f64),
    #[error("budget split fractions must be positive and sum to 1, got {0:?}")]
    InvalidSplit([f64; 3]),
    #[error("d_prime must be at least 1")]
    InvalidDPrime(usize),
    #[error("k_prime cap must be at least 1")]
    InvalidKPrimeCap(usize),
    #[error("counts length {counts} does not match center count {centers}")]
    CountMismatch { counts: usize, centers: usize },
    #[error("all noisy counts are zero; the snapped instance is degenerate under this budget")]
    DegenerateCounts,
    #[error("data must lie in the unit ball, found point norm {0}")]
    DataOutsideUnitBall(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Cover(#[from] CoverError),
    #[error(transparent)]
    Kmedian(#[from] KmedianError),
    #[error(transparent)]
    Dp(#[from] DpError),
}

/// Parameters of a pipeline run. `k` and `eps` are required; everything
/// else has documented defaults reachable through the builder methods.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineConfig {
    pub k: usize,
    /// Approximation parameter in (0, 1/2].
    pub eps: f64,
    /// Overrides the projected dimension (still capped at the data
    /// dimension).
    pub d_prime_override: Option<usize>,
    pub jl_constant: f64,
    /// Budget fractions for the bi-criteria, counts, and recovery stages.
    pub budget_split: [f64; 3],
    pub k_prime_cap: usize,
    /// Swap limit for the non-private snapped-instance local search.
    pub max_swaps: usize,
    /// Free-text record of the non-private solver the run relies on.
    pub alpha_note: String,
}

impl PipelineConfig {
    pub fn new(k: usize, eps: f64) -> Result<Self, PipelineError> {
        if k == 0 {
            return Err(PipelineError::ZeroK);
        }
        if !(eps > 0.0 && eps <= 0.5) {
            return Err(PipelineError::InvalidEps(eps));
        }
        Ok(Self {
            k,
            eps,
            d_prime_override: None,
            jl_constant: DEFAULT_JL_CONSTANT,
            budget_split: [1.0 / 3.0; 3],
            k_prime_cap: DEFAULT_K_PRIME_CAP,
            max_swaps: DEFAULT_MAX_SWAPS,
            alpha_note: "greedy-init single-swap local search".to_string(),
        })
    }

    pub fn with_d_prime(mut self, d_prime: usize) -> Result<Self, PipelineError> {
        if d_prime == 0 {
            return Err(PipelineError::InvalidDPrime(d_prime));
        }
        self.d_prime_override = Some(d_prime);
        Ok(self)
    }

    pub fn with_jl_constant(mut self, c: f64) -> Result<Self, PipelineError> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(PipelineError::InvalidJlConstant(c));
        }
        self.jl_constant = c;
        Ok(self)
    }

    pub fn with_budget_split(mut self, split: [f64; 3]) -> Result<Self, PipelineError> {
        let sum: f64 = split.iter().sum();
        if split.iter().any(|f| f.is_nan() || *f <= 0.0) || (sum - 1.0).abs() > 1e-12 {
            return Err(PipelineError::InvalidSplit(split));
        }
        self.budget_split = split;
        Ok(self)
    }

    pub fn with_k_prime_cap(mut self, cap: usize) -> Result<Self, PipelineError> {
        if cap == 0 {
            return Err(PipelineError::InvalidKPrimeCap(cap));
        }
        self.k_prime_cap = cap;
        Ok(self)
    }

    pub fn with_max_swaps(mut self, max_swaps: usize) -> Self {
        self.max_swaps = max_swaps;
        self
    }

    pub fn with_alpha_note(mut self, note: &str) -> Self {
        self.alpha_note = note.to_string();
        self
    }
}

/// Costs measured at the three checkpoints of a run.
#[derive(Debug, Clone, Serialize)]
pub struct StageCosts {
    /// Cost of the bi-criteria centers on the projected data.
    pub bicriteria_projected: f64,
    /// Cost reported by the snapped-instance solve.
    pub snapped_instance: f64,
    /// Cost of the returned centers on the original data.
    pub final_original: f64,
}

/// Everything a run reports besides the centers themselves.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub seed: u64,
    pub n: usize,
    pub dim: usize,
    pub d_prime: usize,
    pub k_prime: usize,
    /// Radius of the projection-stage clamp.
    pub clamp_radius: f64,
    /// Certified radius of the projected-space ball used by the private
    /// stages.
    pub stage2_radius: f64,
    /// Points clamped by the projection stage.
    pub clamped_initial: usize,
    /// Points clamped again onto the certified stage-2 ball.
    pub clamped_stage2: usize,
    /// Centers surviving the noisy counts with positive multiplicity.
    pub snapped_support: usize,
    /// Final clusters that received no data points.
    pub empty_groups: usize,
    pub stage_costs: StageCosts,
    pub ledger: BudgetLedger,
    pub alpha_note: String,
}

/// Projected dimension d' = ceil(jl_constant * ln(max(k,2)) / eps^2),
/// capped at the data dimension.
pub fn jl_dimension(k: usize, eps: f64, jl_constant: f64, dim: usize) -> usize {
    let raw = (jl_constant * (k.max(2) as f64).ln() / (eps * eps)).ceil();
    let raw = if raw.is_finite() && raw >= 1.0 {
        raw as usize
    } else {
        1
    };
    raw.min(dim).max(1)
}

/// Radius every projected point is clamped to.
pub fn jl_clamp_radius(n: usize) -> f64 {
    (n as f64).ln() + 1.0
}

/// Projects every point through a fresh d' x d Gaussian matrix scaled by
/// 1/sqrt(d'), then clamps each projected point to the ball of radius
/// [`jl_clamp_radius`]. Weights carry over unchanged.
pub fn jl_project(
    data: &Dataset,
    d_prime: usize,
    rng: &mut SeededRng,
) -> Result<Dataset, PipelineError> {
    if d_prime == 0 {
        return Err(PipelineError::InvalidDPrime(d_prime));
    }
    let d = data.dim();
    let scale = 1.0 / (d_prime as f64).sqrt();
    let matrix: Vec<Vec<f64>> = (0..d_prime)
        .map(|_| (0..d).map(|_| rng.standard_normal()).collect())
        .collect();
    let radius = jl_clamp_radius(data.len());

    let project = |p: &Point| -> Result<Point, PipelineError> {
        let coords: Vec<f64> = matrix
            .iter()
            .map(|row| scale * row.iter().zip(p.coords()).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        Ok(geometry::clamp_to_ball(&Point::new(coords)?, radius))
    };
    let points: Result<Vec<Point>, PipelineError>;
    #[cfg(feature = "parallel")]
    {
        points = data.points().par_iter().map(project).collect();
    }
    #[cfg(not(feature = "parallel"))]
    {
        points = data.points().iter().map(project).collect();
    }
    Ok(Dataset::weighted(points?, data.weights().to_vec())?)
}

/// Builds the weighted snapped instance: each center with a positive noisy
/// count becomes one weighted point. Zero-count centers are dropped.
pub fn snap_and_weight(
    projected: &Dataset,
    centers: &CenterSet,
    counts: &[u64],
) -> Result<Dataset, PipelineError> {
    if counts.len() != centers.len() {
        return Err(PipelineError::CountMismatch {
            counts: counts.len(),
            centers: centers.len(),
        });
    }
    if projected.dim() != centers.dim() {
        return Err(PipelineError::Geometry(GeometryError::DimensionMismatch {
            left: projected.dim(),
            right: centers.dim(),
        }));
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (c, &count) in centers.centers().iter().zip(counts.iter()) {
        if count > 0 {
            points.push(c.clone());
            weights.push(count as f64);
        }
    }
    if points.is_empty() {
        return Err(PipelineError::DegenerateCounts);
    }
    Ok(Dataset::weighted(points, weights)?)
}

/// Bi-criteria center count: k scaled by the pessimistic threshold-schedule
/// length and the per-ball lattice size in the projected dimension, capped
/// by the configured ceiling and floored at k.
fn k_prime_for(config: &PipelineConfig, d_prime: usize, n: usize) -> Result<usize, PipelineError> {
    let t_len = cover::build_thresholds(1.0 / n as f64, config.eps, n)?
        .thresholds()
        .len();
    let m = ((d_prime as f64).sqrt() / (2.0 * config.eps)).ceil();
    let lattice = (2.0 * m + 1.0).powi(d_prime as i32);
    let raw = config.k as f64 * t_len as f64 * lattice;
    let capped = if raw.is_finite() {
        raw.min(config.k_prime_cap as f64) as usize
    } else {
        config.k_prime_cap
    };
    Ok(capped.max(config.k))
}

/// Evenly divides a budget across k consumers such that k times the share
/// never exceeds the total in floating point.
fn split_even(total: f64, k: usize) -> f64 {
    let mut share = total / k as f64;
    while share * k as f64 > total {
        share = share.next_down();
    }
    share
}

/// Runs the five-stage private pipeline and returns the k recovered
/// centers in the original dimension together with the run report.
///
/// The data must lie in the unit ball. Stages consume the declared budget
/// as `budget_split` fractions of eps (stages 2, 3, 5) with all of delta
/// reserved for the recovery stage; the report's ledger records the split.
pub fn run_pipeline(
    data: &Dataset,
    config: &PipelineConfig,
    budget: &PrivacyBudget,
    rng: &mut SeededRng,
) -> Result<(CenterSet, PipelineReport), PipelineError> {
    let max_norm = data.max_norm();
    if max_norm > 1.0 + 1e-9 {
        return Err(PipelineError::DataOutsideUnitBall(max_norm));
    }
    if budget.delta <= 0.0 {
        return Err(PipelineError::Dp(DpError::DeltaRequired));
    }
    let n = data.len();
    let dim = data.dim();

    // Stage shares. The recovery share is the remainder so the three charges
    // sum to the declared eps exactly; nudge it down if rounding overshoots.
    let e1 = config.budget_split[0] * budget.eps;
    let e2 = config.budget_split[1] * budget.eps;
    let mut e3 = budget.eps - e1 - e2;
    while e1 + e2 + e3 > budget.eps {
        e3 = e3.next_down();
    }
    if e3.is_nan() || e3 <= 0.0 {
        return Err(PipelineError::InvalidSplit(config.budget_split));
    }

    // Stage 1: project and clamp. A second clamp certifies the tighter
    // public ball the private stages are calibrated against; for unit-ball
    // data the projection concentrates norms near 1, so the second clamp
    // almost never moves a point.
    let d_prime = config
        .d_prime_override
        .map(|v| v.min(dim))
        .unwrap_or_else(|| jl_dimension(config.k, config.eps, config.jl_constant, dim));
    let projected_raw = jl_project(data, d_prime, rng)?;
    let clamp_radius = jl_clamp_radius(n);
    let clamped_initial = projected_raw
        .points()
        .iter()
        .filter(|p| p.norm() >= clamp_radius - 1e-9)
        .count();
    let stage2_radius = (1.0 + 2.0 * config.eps).min(clamp_radius);
    let mut clamped_stage2 = 0usize;
    let stage2_points: Vec<Point> = projected_raw
        .points()
        .iter()
        .map(|p| {
            if p.norm() > stage2_radius {
                clamped_stage2 += 1;
                geometry::clamp_to_ball(p, stage2_radius)
            } else {
                p.clone()
            }
        })
        .collect();
    let projected = Dataset::weighted(stage2_points, data.weights().to_vec())?;

    // Stage 2: private bi-criteria centers in the projected space.
    let k_prime = k_prime_for(config, d_prime, n)?;
    let bic_centers = bicriteria::private_bicriteria_kmedian(
        &projected,
        k_prime,
        e1,
        stage2_radius,
        config.eps,
        rng,
    )?;
    let bicriteria_projected = geometry::cost(&projected, &bic_centers)?;

    // Stage 3: noisy multiplicities of the projected-space assignment.
    let assignment = geometry::assign(&projected, &bic_centers)?;
    let noisy = mechanisms::noisy_counts(&assignment.per_center_count, e2, rng)?;

    // Stage 4: non-private solve of the snapped weighted instance.
    let snapped = snap_and_weight(&projected, &bic_centers, &noisy)?;
    let snapped_support = snapped.len();
    let k_eff = config.k.min(snapped_support);
    let candidates = CenterSet::new(snapped.points().to_vec())?;
    let step4 = kmedian::local_search_kmedian(&snapped, k_eff, &candidates, config.max_swaps)?;

    // Stage 5: group the original points by their projected point's nearest
    // step-4 center, then recover each group's median privately in the
    // original dimension. Each group draws from its own substream so the
    // recoveries are order-independent.
    let mut groups: Vec<Vec<Point>> = vec![Vec::new(); k_eff];
    for (i, p) in projected.points().iter().enumerate() {
        let (owner, _) = geometry::nearest_center(p.coords(), &step4.centers);
        groups[owner].push(data.points()[i].clone());
    }
    let per_eps = split_even(e3, config.k);
    let per_delta = split_even(budget.delta, config.k);
    let cluster_budget = PrivacyBudget::new(per_eps, per_delta)?;
    let empty_groups = groups.iter().filter(|g| g.is_empty()).count() + (config.k - k_eff);

    let base_rng: &SeededRng = rng;
    let recover = |(g, pts): (usize, &Vec<Point>)| -> Result<Point, PipelineError> {
        if pts.is_empty() {
            return Ok(Point::origin(dim));
        }
        let mut sub = base_rng.substream(g as u64);
        Ok(median::private_geometric_median(
            pts,
            &cluster_budget,
            1.0,
            &mut sub,
        )?)
    };
    let indexed: Vec<(usize, &Vec<Point>)> = groups.iter().enumerate().collect();
    let recovered: Result<Vec<Point>, PipelineError>;
    #[cfg(feature = "parallel")]
    {
        recovered = indexed
            .par_iter()
            .map(|&(g, pts)| recover((g, pts)))
            .collect();
    }
    #[cfg(not(feature = "parallel"))]
    {
        recovered = indexed.iter().map(|&(g, pts)| recover((g, pts))).collect();
    }
    let mut centers = recovered?;
    while centers.len() < config.k {
        centers.push(Point::origin(dim));
    }
    let final_centers = CenterSet::new(centers)?;
    let final_original = geometry::cost(data, &final_centers)?;

    let mut ledger = BudgetLedger::new();
    ledger.charge("bicriteria", e1, 0.0);
    ledger.charge("counts", e2, 0.0);
    ledger.charge("recover", e3, budget.delta);

    let report = PipelineReport {
        seed: rng.seed(),
        n,
        dim,
        d_prime,
        k_prime,
        clamp_radius,
        stage2_radius,
        clamped_initial,
        clamped_stage2,
        snapped_support,
        empty_groups,
        stage_costs: StageCosts {
            bicriteria_projected,
            snapped_instance: step4.cost,
            final_original,
        },
        ledger,
        alpha_note: config.alpha_note.clone(),
    };
    Ok((final_centers, report))
}
