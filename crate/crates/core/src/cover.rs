//! Bi-criteria center enrichment with a provable cost bound.
//!
//! Given reference centers whose per-point cost is `R`, build a geometric
//! ladder of distance thresholds and cover a ball of each threshold radius
//! around every reference center with a lattice whose cover radius shrinks
//! proportionally to the threshold. The enriched set `S` keeps every point
//! within a small multiple of its reference distance, which caps the total
//! cost at `3 * eps * n * R`.

use std::collections::HashSet;

use thiserror::Error;

use crate::geometry::{self, CenterSet, Dataset, GeometryError, Point};

#[derive(Debug, Error)]
pub enum CoverError {
    #[error("eps must lie in (0, 1/2], got {0}")]
    EpsOutOfRange(f64),
    #[error("per-point cost must be non-negative and finite, got {0}")]
    InvalidBaseCost(f64),
    #[error("instance size must be positive")]
    ZeroInstanceSize,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Geometric ladder of distance thresholds.
#[derive(Debug, Clone)]
pub struct ThresholdSet {
    eps: f64,
    base_cost_r: f64,
    n: usize,
    thresholds: Vec<f64>,
}

impl ThresholdSet {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Per-point reference cost `R` the ladder was built from.
    pub fn base_cost_r(&self) -> f64 {
        self.base_cost_r
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }
}

/// Outcome of checking the cover cost bound on a dataset.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CoverReport {
    pub cover_cost: f64,
    #[serde(rename = "bound_3enR")]
    pub bound_3enr: f64,
    /// True exactly when `cover_cost <= bound_3enR`.
    pub passed: bool,
    /// True when every point also satisfies its individual distance bound.
    pub pointwise_passed: bool,
    #[serde(rename = "size_S")]
    pub size_s: usize,
    #[serde(rename = "size_T")]
    pub size_t: usize,
}

fn validate_eps(eps: f64) -> Result<(), CoverError> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(CoverError::EpsOutOfRange(eps));
    }
    Ok(())
}

/// Thresholds `{eps*R, eps*R*(1+eps), ...}` truncated at the first element
/// that reaches `n * R` (that element is kept). `R = 0` yields an empty set.
pub fn build_thresholds(r: f64, eps: f64, n: usize) -> Result<ThresholdSet, CoverError> {
    validate_eps(eps)?;
    if !(r >= 0.0 && r.is_finite()) {
        return Err(CoverError::InvalidBaseCost(r));
    }
    if n == 0 {
        return Err(CoverError::ZeroInstanceSize);
    }
    let mut thresholds = Vec::new();
    if r > 0.0 {
        let cap = n as f64 * r;
        let mut t = eps * r;
        thresholds.push(t);
        while *thresholds.last().unwrap() < cap {
            t *= 1.0 + eps;
            thresholds.push(t);
        }
    }
    Ok(ThresholdSet {
        eps,
        base_cost_r: r,
        n,
        thresholds,
    })
}

fn bit_key(p: &Point) -> Vec<u64> {
    p.coords()
        .iter()
        .map(|c| {
            // Fold -0.0 into +0.0 so the anchor cell always deduplicates.
            let c = if *c == 0.0 { 0.0 } else { *c };
            c.to_bits()
        })
        .collect()
}

/// Reference centers enriched with lattice covers of every threshold ball.
///
/// For each reference center `c` and threshold `t`, a lattice covering
/// `B(c, t)` at cover radius `eps * t` is added. Duplicates are removed;
/// insertion order (references first, then covers by center, threshold,
/// lattice order) is preserved so downstream tie-breaks are reproducible.
pub fn threshold_cover(
    ref_centers: &CenterSet,
    r: f64,
    eps: f64,
    n: usize,
) -> Result<CenterSet, CoverError> {
    let ladder = build_thresholds(r, eps, n)?;
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let mut out: Vec<Point> = Vec::new();
    for c in ref_centers.centers() {
        if seen.insert(bit_key(c)) {
            out.push(c.clone());
        }
    }
    for c in ref_centers.centers() {
        for &t in ladder.thresholds() {
            for q in geometry::cover_ball(c, t, eps * t)? {
                if seen.insert(bit_key(&q)) {
                    out.push(q);
                }
            }
        }
    }
    Ok(CenterSet::new(out)?)
}

/// Evaluates `cost(data, s)` against the `3 * eps * n * R` bound, where `R`
/// is the per-point cost of the reference centers on `data`. Also checks the
/// per-point guarantee: a point at reference distance `r_p` ends up within
/// `(1+eps) * eps * r_p` of `s` whenever `eps*R < r_p <= n*R`, and never
/// farther than `r_p`.
pub fn verify_cover_bound(
    data: &Dataset,
    ref_centers: &CenterSet,
    s: &CenterSet,
    eps: f64,
) -> Result<CoverReport, CoverError> {
    validate_eps(eps)?;
    let n = data.len();
    let ref_cost = geometry::cost(data, ref_centers)?;
    let r = ref_cost / n as f64;
    let ladder = build_thresholds(r, eps, n)?;

    let cover_cost = geometry::cost(data, s)?;
    let bound = 3.0 * eps * n as f64 * r;
    let passed = cover_cost <= bound;

    let last_threshold = ladder.thresholds().last().copied().unwrap_or(0.0);
    let mut pointwise_passed = true;
    for p in data.points() {
        let r_p = crate::geometry::nearest_center(p.coords(), ref_centers).1;
        let d_s = crate::geometry::nearest_center(p.coords(), s).1;
        if d_s > r_p + 1e-9 {
            pointwise_passed = false;
            break;
        }
        if r_p > eps * r && r_p <= last_threshold && d_s > (1.0 + eps) * eps * r_p + 1e-9 {
            pointwise_passed = false;
            break;
        }
    }

    Ok(CoverReport {
        cover_cost,
        bound_3enr: bound,
        passed,
        pointwise_passed,
        size_s: s.len(),
        size_t: ladder.len(),
    })
}
