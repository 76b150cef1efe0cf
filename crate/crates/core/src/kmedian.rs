//! Weighted k-median solvers: a Weiszfeld 1-median, greedy-plus-swaps local
//! search, and two brute-force oracles small enough to certify the larger
//! algorithms against.

use thiserror::Error;

use crate::geometry::{self, CenterSet, Dataset, GeometryError, Point};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Distance below which an iterate is treated as sitting on a data point.
const SINGULARITY_EPS: f64 = 1e-12;

/// Step taken away from a non-optimal data point to restart the iteration.
const RESTART_STEP: f64 = 1e-6;

/// Relative improvement a swap must achieve to be applied.
const SWAP_IMPROVEMENT: f64 = 1e-6;

/// Largest instance the partition-enumeration oracle accepts.
const ORACLE_MAX_N: usize = 12;
const ORACLE_MAX_K: usize = 3;

/// Largest number of center subsets the discrete oracle will enumerate.
const SUBSET_LIMIT: f64 = 1e6;

#[derive(Debug, Error)]
pub enum KmedianError {
    #[error("input must contain at least one point")]
    EmptyInput,
    #[error("weight count {weights} does not match point count {points}")]
    LengthMismatch { weights: usize, points: usize },
    #[error("total weight must be positive")]
    ZeroTotalWeight,
    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("need at least {need} candidates, have {have}")]
    TooFewCandidates { have: usize, need: usize },
    #[error("oracle accepts at most n={max_n}, k={max_k}; got n={n}, k={k}")]
    InstanceTooLarge {
        n: usize,
        k: usize,
        max_n: usize,
        max_k: usize,
    },
    #[error("subset enumeration of {combos:.3e} center sets exceeds limit {limit:.3e}")]
    TooManySubsets { combos: f64, limit: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Solution produced by any of the solvers in this module.
#[derive(Debug, Clone)]
pub struct SolverResult {
    pub centers: CenterSet,
    /// Weighted cost of `centers` on the input, recomputed from scratch.
    pub cost: f64,
    /// Swaps applied, or configurations enumerated for the oracles.
    pub iterations: usize,
    pub converged: bool,
}

fn validate_weighted_input(points: &[Point], weights: &[f64]) -> Result<(), KmedianError> {
    if points.is_empty() {
        return Err(KmedianError::EmptyInput);
    }
    if weights.len() != points.len() {
        return Err(KmedianError::LengthMismatch {
            weights: weights.len(),
            points: points.len(),
        });
    }
    let total: f64 = weights.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(KmedianError::ZeroTotalWeight);
    }
    Ok(())
}

fn objective(points: &[Point], weights: &[f64], c: &[f64]) -> f64 {
    points
        .iter()
        .zip(weights.iter())
        .map(|(p, w)| w * geometry::dist_unchecked(p.coords(), c))
        .sum()
}

/// Weighted geometric median via Weiszfeld iteration.
///
/// Runs until the objective improves by less than `tol` or `max_iter` steps
/// pass. If an iterate lands on a data point, the point's subgradient
/// optimality condition decides between returning it and restarting from a
/// small perturbation along the net pull direction.
pub fn geometric_median(
    points: &[Point],
    weights: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Point, KmedianError> {
    geometric_median_trace(points, weights, tol, max_iter).map(|(p, _)| p)
}

/// Same as [`geometric_median`], also returning the objective value after
/// the initial iterate and each subsequent step. The sequence is
/// non-increasing up to floating-point noise.
pub fn geometric_median_trace(
    points: &[Point],
    weights: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Point, Vec<f64>), KmedianError> {
    validate_weighted_input(points, weights)?;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(KmedianError::InvalidTolerance(tol));
    }
    let d = points[0].dim();
    let total_w: f64 = weights.iter().sum();

    // Weighted centroid start.
    let mut c = vec![0.0; d];
    for (p, w) in points.iter().zip(weights.iter()) {
        for (acc, x) in c.iter_mut().zip(p.coords()) {
            *acc += w * x;
        }
    }
    for acc in c.iter_mut() {
        *acc /= total_w;
    }

    let mut obj = objective(points, weights, &c);
    let mut trace = vec![obj];

    for _ in 0..max_iter {
        let anchor = points
            .iter()
            .position(|p| geometry::dist_unchecked(p.coords(), &c) <= SINGULARITY_EPS);
        if let Some(j) = anchor {
            // Net pull of all points not collocated with the anchor, and the
            // total weight sitting at the anchor itself.
            let mut force = vec![0.0; d];
            let mut anchor_w = 0.0;
            for (p, w) in points.iter().zip(weights.iter()) {
                let dist = geometry::dist_unchecked(p.coords(), &c);
                if dist <= SINGULARITY_EPS {
                    anchor_w += w;
                } else {
                    for (f, (x, y)) in force.iter_mut().zip(p.coords().iter().zip(c.iter())) {
                        *f += w * (x - y) / dist;
                    }
                }
            }
            let force_norm = force.iter().map(|f| f * f).sum::<f64>().sqrt();
            if force_norm <= anchor_w + 1e-15 {
                // The data point satisfies the optimality condition.
                let out = points[j].clone();
                let final_obj = objective(points, weights, out.coords());
                if final_obj <= *trace.last().unwrap() {
                    trace.push(final_obj);
                }
                return Ok((out, trace));
            }
            let candidate: Vec<f64> = c
                .iter()
                .zip(force.iter())
                .map(|(x, f)| x + RESTART_STEP * f / force_norm)
                .collect();
            let cand_obj = objective(points, weights, &candidate);
            if cand_obj < obj {
                c = candidate;
                obj = cand_obj;
                trace.push(obj);
                continue;
            }
            // The perturbation cannot improve measurably; the anchor is the
            // best point we can certify.
            let out = points[j].clone();
            let final_obj = objective(points, weights, out.coords());
            if final_obj <= *trace.last().unwrap() {
                trace.push(final_obj);
            }
            return Ok((out, trace));
        }

        let mut num = vec![0.0; d];
        let mut den = 0.0;
        for (p, w) in points.iter().zip(weights.iter()) {
            let dist = geometry::dist_unchecked(p.coords(), &c);
            let coef = w / dist;
            den += coef;
            for (acc, x) in num.iter_mut().zip(p.coords()) {
                *acc += coef * x;
            }
        }
        let next: Vec<f64> = num.iter().map(|x| x / den).collect();
        let next_obj = objective(points, weights, &next);
        let improvement = obj - next_obj;
        c = next;
        obj = next_obj;
        trace.push(obj);
        if improvement < tol {
            break;
        }
    }

    Ok((Point::new(c).expect("iterate stays finite"), trace))
}

/// 1-median of a subset, tolerating zero total weight (cost 0 at the first
/// point). Used by the oracles below.
fn one_median(points: &[Point], weights: &[f64]) -> Result<(Point, f64), KmedianError> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Ok((points[0].clone(), 0.0));
    }
    let center = geometric_median(points, weights, 1e-10, 2000)?;
    let cost = objective(points, weights, center.coords());
    Ok((center, cost))
}

struct SwapState {
    cur: Vec<f64>,
    sec: Vec<f64>,
    owner: Vec<usize>,
}

fn swap_state(data: &Dataset, chosen: &[usize], candidates: &CenterSet) -> SwapState {
    let n = data.len();
    let mut cur = vec![f64::INFINITY; n];
    let mut sec = vec![f64::INFINITY; n];
    let mut owner = vec![0usize; n];
    for (i, p) in data.points().iter().enumerate() {
        for (slot, &cj) in chosen.iter().enumerate() {
            let d = geometry::dist_unchecked(p.coords(), candidates.centers()[cj].coords());
            if d < cur[i] {
                sec[i] = cur[i];
                cur[i] = d;
                owner[i] = slot;
            } else if d < sec[i] {
                sec[i] = d;
            }
        }
    }
    SwapState { cur, sec, owner }
}

/// Local-search k-median: greedy initialization followed by repeated best
/// single swaps (center out, candidate in) while a swap improves the cost by
/// the relative threshold. Stops after `max_swaps` swaps at the latest.
pub fn local_search_kmedian(
    data: &Dataset,
    k: usize,
    candidates: &CenterSet,
    max_swaps: usize,
) -> Result<SolverResult, KmedianError> {
    if k == 0 {
        return Err(KmedianError::ZeroK);
    }
    if candidates.len() < k {
        return Err(KmedianError::TooFewCandidates {
            have: candidates.len(),
            need: k,
        });
    }
    if data.dim() != candidates.dim() {
        return Err(KmedianError::Geometry(GeometryError::DimensionMismatch {
            left: data.dim(),
            right: candidates.dim(),
        }));
    }

    let n = data.len();
    let weights = data.weights();

    // Greedy initialization: one center at a time, each minimizing the cost
    // of the partial solution; ties go to the lowest candidate index.
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut in_set = vec![false; candidates.len()];
    let mut cur = vec![f64::INFINITY; n];
    for _ in 0..k {
        let mut best_j = usize::MAX;
        let mut best_cost = f64::INFINITY;
        for (j, cand) in candidates.centers().iter().enumerate() {
            if in_set[j] {
                continue;
            }
            let mut total = 0.0;
            for (i, p) in data.points().iter().enumerate() {
                let d = geometry::dist_unchecked(p.coords(), cand.coords());
                total += weights[i] * cur[i].min(d);
            }
            if total < best_cost {
                best_cost = total;
                best_j = j;
            }
        }
        in_set[best_j] = true;
        chosen.push(best_j);
        let cand = &candidates.centers()[best_j];
        for (i, p) in data.points().iter().enumerate() {
            let d = geometry::dist_unchecked(p.coords(), cand.coords());
            if d < cur[i] {
                cur[i] = d;
            }
        }
    }
    let greedy_cost: f64 = cur.iter().zip(weights.iter()).map(|(d, w)| w * d).sum();

    let mut current_cost = greedy_cost;
    let mut swaps = 0usize;
    let mut converged = false;
    while swaps < max_swaps {
        let state = swap_state(data, &chosen, candidates);
        let mut best_new = f64::INFINITY;
        let mut best_pair: Option<(usize, usize)> = None;
        let mut delta = vec![0.0; k];
        for (v, cand) in candidates.centers().iter().enumerate() {
            if in_set[v] {
                continue;
            }
            let mut base = 0.0;
            for x in delta.iter_mut() {
                *x = 0.0;
            }
            for (i, p) in data.points().iter().enumerate() {
                let dv = geometry::dist_unchecked(p.coords(), cand.coords());
                let keep = dv.min(state.cur[i]);
                base += weights[i] * keep;
                let slot = state.owner[i];
                delta[slot] += weights[i] * (dv.min(state.sec[i]) - keep);
            }
            for (slot, dx) in delta.iter().enumerate() {
                let new_cost = base + dx;
                if new_cost < best_new {
                    best_new = new_cost;
                    best_pair = Some((slot, v));
                }
            }
        }
        match best_pair {
            Some((slot, v))
                if best_new < current_cost
                    && best_new <= current_cost * (1.0 - SWAP_IMPROVEMENT / k as f64) =>
            {
                in_set[chosen[slot]] = false;
                in_set[v] = true;
                chosen[slot] = v;
                current_cost = best_new;
                swaps += 1;
            }
            _ => {
                converged = true;
                break;
            }
        }
    }

    let centers = CenterSet::new(
        chosen
            .iter()
            .map(|&j| candidates.centers()[j].clone())
            .collect(),
    )?;
    let cost = geometry::cost(data, &centers)?;
    Ok(SolverResult {
        centers,
        cost,
        iterations: swaps,
        converged,
    })
}

/// Exact k-median by enumerating every partition of the points into at most
/// `k` non-empty groups and solving each group's 1-median. Only tiny
/// instances are accepted; the result is treated as OPT by the test suites.
pub fn exact_kmedian_oracle(data: &Dataset, k: usize) -> Result<SolverResult, KmedianError> {
    let n = data.len();
    if k == 0 {
        return Err(KmedianError::ZeroK);
    }
    if n > ORACLE_MAX_N || k > ORACLE_MAX_K {
        return Err(KmedianError::InstanceTooLarge {
            n,
            k,
            max_n: ORACLE_MAX_N,
            max_k: ORACLE_MAX_K,
        });
    }

    let full: usize = (1usize << n) - 1;

    // 1-median cost of every non-empty subset, indexed by bitmask.
    let masks: Vec<usize> = (1..=full).collect();
    let solve_mask = |mask: &usize| -> Result<(Point, f64), KmedianError> {
        let mut pts = Vec::new();
        let mut ws = Vec::new();
        for i in 0..n {
            if mask & (1 << i) != 0 {
                pts.push(data.points()[i].clone());
                ws.push(data.weights()[i]);
            }
        }
        one_median(&pts, &ws)
    };
    let solved: Vec<(Point, f64)>;
    #[cfg(feature = "parallel")]
    {
        solved = masks
            .par_iter()
            .map(solve_mask)
            .collect::<Result<Vec<_>, _>>()?;
    }
    #[cfg(not(feature = "parallel"))]
    {
        solved = masks
            .iter()
            .map(solve_mask)
            .collect::<Result<Vec<_>, _>>()?;
    }
    let subset_cost = |mask: usize| solved[mask - 1].1;

    // dp[j][mask]: best cost of partitioning `mask` into at most j groups.
    // choice[j][mask] stores the group containing the lowest set bit, or 0
    // when the partition already fits into j-1 groups.
    let words = full + 1;
    let mut dp = vec![vec![f64::INFINITY; words]; k + 1];
    let mut choice = vec![vec![0usize; words]; k + 1];
    for row in dp.iter_mut() {
        row[0] = 0.0;
    }
    for j in 1..=k {
        for mask in 1..=full {
            let mut best = dp[j - 1][mask];
            let mut best_sub = 0usize;
            let low = mask & mask.wrapping_neg();
            // Enumerate submasks of `mask` containing the lowest set bit.
            let rest = mask ^ low;
            let mut sub = rest;
            loop {
                let group = sub | low;
                let cand = subset_cost(group) + dp[j - 1][mask ^ group];
                if cand < best {
                    best = cand;
                    best_sub = group;
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & rest;
            }
            dp[j][mask] = best;
            choice[j][mask] = best_sub;
        }
    }

    // Reconstruct the chosen groups.
    let mut centers = Vec::new();
    let mut mask = full;
    let mut j = k;
    while mask != 0 {
        let group = choice[j][mask];
        if group == 0 {
            j -= 1;
            continue;
        }
        centers.push(solved[group - 1].0.clone());
        mask ^= group;
        j -= 1;
    }
    let centers = CenterSet::new(centers)?;
    let cost = geometry::cost(data, &centers)?;
    Ok(SolverResult {
        centers,
        cost,
        iterations: full,
        converged: true,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut out = 1.0;
    for i in 0..k {
        out *= (n - i) as f64 / (i + 1) as f64;
    }
    out
}

/// Exact k-median restricted to a candidate set: enumerates every k-subset
/// of the candidates and returns the cheapest. Errors when the enumeration
/// would exceed the subset limit.
pub fn exact_discrete_kmedian(
    data: &Dataset,
    candidates: &CenterSet,
    k: usize,
) -> Result<SolverResult, KmedianError> {
    if k == 0 {
        return Err(KmedianError::ZeroK);
    }
    if candidates.len() < k {
        return Err(KmedianError::TooFewCandidates {
            have: candidates.len(),
            need: k,
        });
    }
    if data.dim() != candidates.dim() {
        return Err(KmedianError::Geometry(GeometryError::DimensionMismatch {
            left: data.dim(),
            right: candidates.dim(),
        }));
    }
    let m = candidates.len();
    let combos = binomial(m, k);
    if combos > SUBSET_LIMIT {
        return Err(KmedianError::TooManySubsets {
            combos,
            limit: SUBSET_LIMIT,
        });
    }

    let weights = data.weights();
    let eval = |idxs: &[usize]| -> f64 {
        data.points()
            .iter()
            .zip(weights.iter())
            .map(|(p, w)| {
                let mut best = f64::INFINITY;
                for &j in idxs {
                    let d = geometry::dist_unchecked(p.coords(), candidates.centers()[j].coords());
                    if d < best {
                        best = d;
                    }
                }
                w * best
            })
            .sum()
    };

    let mut idxs: Vec<usize> = (0..k).collect();
    let mut best_cost = f64::INFINITY;
    let mut best_idxs = idxs.clone();
    let mut evaluated = 0usize;
    loop {
        let c = eval(&idxs);
        evaluated += 1;
        if c < best_cost {
            best_cost = c;
            best_idxs = idxs.clone();
        }
        // Next lexicographic combination.
        let mut pos = k;
        loop {
            if pos == 0 {
                let centers = CenterSet::new(
                    best_idxs
                        .iter()
                        .map(|&j| candidates.centers()[j].clone())
                        .collect(),
                )?;
                return Ok(SolverResult {
                    centers,
                    cost: best_cost,
                    iterations: evaluated,
                    converged: true,
                });
            }
            pos -= 1;
            if idxs[pos] != pos + m - k {
                idxs[pos] += 1;
                for i in pos + 1..k {
                    idxs[i] = idxs[i - 1] + 1;
                }
                break;
            }
        }
    }
}


#[cfg(test)]
mod property_tests {
    use super::*;
    use crate::geometry::pt;
    use proptest::prelude::*;

    fn weighted_line() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        prop::collection::vec((-50.0..50.0f64, 0.05..3.0f64), 1..12)
            .prop_map(|v| v.into_iter().unzip())
    }

    /// Smallest coordinate where the cumulative weight reaches half the
    /// total; unique for generic weights.
    fn weighted_median_1d(xs: &[f64], ws: &[f64]) -> f64 {
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
        let total: f64 = ws.iter().sum();
        let mut acc = 0.0;
        for &i in &order {
            acc += ws[i];
            if acc >= total / 2.0 {
                return xs[i];
            }
        }
        xs[*order.last().unwrap()]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn one_dimensional_median_matches_weighted_median((xs, ws) in weighted_line()) {
            // Skip razor-edge cases where the half-weight split is ambiguous.
            let total: f64 = ws.iter().sum();
            let mut order: Vec<usize> = (0..xs.len()).collect();
            order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
            let mut acc = 0.0;
            let mut margin = f64::INFINITY;
            for &i in &order {
                acc += ws[i];
                margin = margin.min((acc - total / 2.0).abs());
            }
            prop_assume!(margin > 1e-3);

            let pts: Vec<Point> = xs.iter().map(|&x| pt(&[x])).collect();
            let m = geometric_median(&pts, &ws, 1e-13, 20_000).unwrap();
            let want = weighted_median_1d(&xs, &ws);
            prop_assert!((m.coords()[0] - want).abs() < 1e-6,
                "median {} want {want}", m.coords()[0]);
        }

        #[test]
        fn median_objective_not_worse_than_centroid(
            pts in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 1..15)
        ) {
            let points: Vec<Point> = pts.iter().map(|&(x, y)| pt(&[x, y])).collect();
            let ws = vec![1.0; points.len()];
            let m = geometric_median(&points, &ws, 1e-12, 1000).unwrap();
            let mut centroid = [0.0; 2];
            for p in &points {
                centroid[0] += p.coords()[0];
                centroid[1] += p.coords()[1];
            }
            centroid[0] /= points.len() as f64;
            centroid[1] /= points.len() as f64;
            let fm = objective(&points, &ws, m.coords());
            let fc = objective(&points, &ws, &centroid);
            prop_assert!(fm <= fc + 1e-9);
        }
    }
}
