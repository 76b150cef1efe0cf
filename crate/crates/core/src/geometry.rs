//! Points, weighted datasets, center sets, and the metric primitives the
//! solvers are built on: nearest-center assignment, weighted cost, lattice
//! ball covers, and radial clamping.
//!
//! Cost sums are always folded block-by-block in a fixed order, so the
//! parallel and sequential paths produce bit-identical totals and repeated
//! runs compare exactly.

use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Fixed block width for deterministic cost reductions.
const SUM_BLOCK: usize = 1024;

/// Minimum point count before the parallel path is worth dispatching.
#[cfg(feature = "parallel")]
const PAR_MIN_POINTS: usize = 2 * SUM_BLOCK;

/// Hard cap on lattice cells a single `cover_ball` call may enumerate.
const MAX_COVER_CELLS: f64 = (1u64 << 26) as f64;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("point must have at least one coordinate")]
    EmptyPoint,
    #[error("non-finite coordinate at position {0}")]
    NonFiniteCoordinate(usize),
    #[error("dataset must contain at least one point")]
    EmptyDataset,
    #[error("center set must contain at least one center")]
    EmptyCenters,
    #[error("weight count {weights} does not match point count {points}")]
    WeightCountMismatch { weights: usize, points: usize },
    #[error("negative weight at position {0}")]
    NegativeWeight(usize),
    #[error("non-finite weight at position {0}")]
    NonFiniteWeight(usize),
    #[error("total weight must be positive")]
    ZeroTotalWeight,
    #[error("radius must be non-negative, got {0}")]
    NegativeRadius(f64),
    #[error("cover radius must be positive, got {0}")]
    InvalidCoverRadius(f64),
    #[error("cover lattice would enumerate {cells:.3e} cells (limit {limit:.3e})")]
    CoverTooLarge { cells: f64, limit: f64 },
}

/// A point in Euclidean space. Coordinates are finite and non-empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self, GeometryError> {
        if coords.is_empty() {
            return Err(GeometryError::EmptyPoint);
        }
        for (i, c) in coords.iter().enumerate() {
            if !c.is_finite() {
                return Err(GeometryError::NonFiniteCoordinate(i));
            }
        }
        Ok(Self { coords })
    }

    /// Origin of the given dimension.
    pub fn origin(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self {
            coords: vec![0.0; dim],
        }
    }

    pub(crate) fn from_vec_unchecked(coords: Vec<f64>) -> Self {
        debug_assert!(!coords.is_empty());
        Self { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// Weighted point collection with a single shared dimension.
#[derive(Debug, Clone)]
pub struct Dataset {
    points: Vec<Point>,
    weights: Vec<f64>,
    dim: usize,
}

impl Dataset {
    /// Dataset with unit weights.
    pub fn unweighted(points: Vec<Point>) -> Result<Self, GeometryError> {
        let weights = vec![1.0; points.len()];
        Self::weighted(points, weights)
    }

    pub fn weighted(points: Vec<Point>, weights: Vec<f64>) -> Result<Self, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::EmptyDataset);
        }
        if weights.len() != points.len() {
            return Err(GeometryError::WeightCountMismatch {
                weights: weights.len(),
                points: points.len(),
            });
        }
        let dim = points[0].dim();
        for p in &points {
            if p.dim() != dim {
                return Err(GeometryError::DimensionMismatch {
                    left: dim,
                    right: p.dim(),
                });
            }
        }
        let mut total = 0.0;
        for (i, w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(GeometryError::NonFiniteWeight(i));
            }
            if *w < 0.0 {
                return Err(GeometryError::NegativeWeight(i));
            }
            total += *w;
        }
        if total <= 0.0 {
            return Err(GeometryError::ZeroTotalWeight);
        }
        Ok(Self {
            points,
            weights,
            dim,
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Largest point norm; the unit-ball precondition checks against this.
    pub fn max_norm(&self) -> f64 {
        self.points.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }
}

/// Candidate or solution centers. Non-empty by construction.
#[derive(Debug, Clone)]
pub struct CenterSet {
    centers: Vec<Point>,
    dim: usize,
}

impl CenterSet {
    pub fn new(centers: Vec<Point>) -> Result<Self, GeometryError> {
        if centers.is_empty() {
            return Err(GeometryError::EmptyCenters);
        }
        let dim = centers[0].dim();
        for c in &centers {
            if c.dim() != dim {
                return Err(GeometryError::DimensionMismatch {
                    left: dim,
                    right: c.dim(),
                });
            }
        }
        Ok(Self { centers, dim })
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Nearest-center assignment. `owner[i]` is the index of the center closest
/// to point `i` (ties resolve to the lowest center index); `per_center_count`
/// holds the summed weight assigned to each center.
#[derive(Debug, Clone)]
pub struct Assignment {
    pub owner: Vec<usize>,
    pub per_center_count: Vec<f64>,
}

/// Euclidean distance. Errors on mismatched dimensions.
pub fn dist(p: &Point, q: &Point) -> Result<f64, GeometryError> {
    if p.dim() != q.dim() {
        return Err(GeometryError::DimensionMismatch {
            left: p.dim(),
            right: q.dim(),
        });
    }
    Ok(dist_unchecked(p.coords(), q.coords()))
}

pub(crate) fn dist_unchecked(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Index and distance of the nearest center, ties to the lowest index.
pub(crate) fn nearest_center(coords: &[f64], centers: &CenterSet) -> (usize, f64) {
    let mut best = 0usize;
    let mut best_sq = f64::INFINITY;
    for (j, c) in centers.centers().iter().enumerate() {
        let d = sq_dist(coords, c.coords());
        if d < best_sq {
            best_sq = d;
            best = j;
        }
    }
    (best, best_sq.sqrt())
}

fn check_compatible(data: &Dataset, centers: &CenterSet) -> Result<(), GeometryError> {
    if centers.is_empty() {
        return Err(GeometryError::EmptyCenters);
    }
    if data.dim() != centers.dim() {
        return Err(GeometryError::DimensionMismatch {
            left: data.dim(),
            right: centers.dim(),
        });
    }
    Ok(())
}

fn block_cost(points: &[Point], weights: &[f64], centers: &CenterSet) -> f64 {
    points
        .iter()
        .zip(weights.iter())
        .map(|(p, w)| w * nearest_center(p.coords(), centers).1)
        .sum()
}

/// Weighted k-median cost: the sum over points of weight times the distance
/// to the nearest center. Parallel and sequential builds agree bitwise
/// because both fold the same fixed-size blocks in index order.
pub fn cost(data: &Dataset, centers: &CenterSet) -> Result<f64, GeometryError> {
    check_compatible(data, centers)?;
    #[cfg(feature = "parallel")]
    if data.len() >= PAR_MIN_POINTS {
        let partials: Vec<f64> = data
            .points()
            .par_chunks(SUM_BLOCK)
            .zip(data.weights().par_chunks(SUM_BLOCK))
            .map(|(pts, ws)| block_cost(pts, ws, centers))
            .collect();
        return Ok(partials.iter().sum());
    }
    Ok(cost_blocks_seq(data, centers))
}

/// Sequential reference for [`cost`]; the benchmark suite compares the two.
pub fn cost_seq(data: &Dataset, centers: &CenterSet) -> Result<f64, GeometryError> {
    check_compatible(data, centers)?;
    Ok(cost_blocks_seq(data, centers))
}

fn cost_blocks_seq(data: &Dataset, centers: &CenterSet) -> f64 {
    data.points()
        .chunks(SUM_BLOCK)
        .zip(data.weights().chunks(SUM_BLOCK))
        .map(|(pts, ws)| block_cost(pts, ws, centers))
        .sum()
}

/// Nearest-center assignment for every point plus per-center weight totals.
pub fn assign(data: &Dataset, centers: &CenterSet) -> Result<Assignment, GeometryError> {
    check_compatible(data, centers)?;
    let owner: Vec<usize>;
    #[cfg(feature = "parallel")]
    {
        owner = if data.len() >= PAR_MIN_POINTS {
            data.points()
                .par_iter()
                .map(|p| nearest_center(p.coords(), centers).0)
                .collect()
        } else {
            data.points()
                .iter()
                .map(|p| nearest_center(p.coords(), centers).0)
                .collect()
        };
    }
    #[cfg(not(feature = "parallel"))]
    {
        owner = data
            .points()
            .iter()
            .map(|p| nearest_center(p.coords(), centers).0)
            .collect();
    }
    let mut per_center_count = vec![0.0; centers.len()];
    for (i, &j) in owner.iter().enumerate() {
        per_center_count[j] += data.weights()[i];
    }
    Ok(Assignment {
        owner,
        per_center_count,
    })
}

/// Sequential reference for [`assign`].
pub fn assign_seq(data: &Dataset, centers: &CenterSet) -> Result<Assignment, GeometryError> {
    check_compatible(data, centers)?;
    let owner: Vec<usize> = data
        .points()
        .iter()
        .map(|p| nearest_center(p.coords(), centers).0)
        .collect();
    let mut per_center_count = vec![0.0; centers.len()];
    for (i, &j) in owner.iter().enumerate() {
        per_center_count[j] += data.weights()[i];
    }
    Ok(Assignment {
        owner,
        per_center_count,
    })
}

/// Axis-aligned lattice that covers `B(center, radius)` with balls of radius
/// `cover_radius`.
///
/// Spacing is `2 * cover_radius / sqrt(d)`, so rounding any covered point to
/// the lattice moves it at most `cover_radius`. The lattice is anchored at
/// `center` (always included), extends `ceil(radius / spacing)` steps per
/// axis, and keeps only cells within `radius + cover_radius` of the anchor.
/// Output size is therefore at most `(2 * ceil(radius / spacing) + 1)^d`.
pub fn cover_ball(
    center: &Point,
    radius: f64,
    cover_radius: f64,
) -> Result<Vec<Point>, GeometryError> {
    if radius.is_nan() || radius < 0.0 {
        return Err(GeometryError::NegativeRadius(radius));
    }
    if cover_radius.is_nan() || cover_radius <= 0.0 {
        return Err(GeometryError::InvalidCoverRadius(cover_radius));
    }
    let d = center.dim();
    let spacing = 2.0 * cover_radius / (d as f64).sqrt();
    let steps = if radius == 0.0 {
        0i64
    } else {
        (radius / spacing).ceil() as i64
    };
    let cells = (2.0 * steps as f64 + 1.0).powi(d as i32);
    if cells > MAX_COVER_CELLS {
        return Err(GeometryError::CoverTooLarge {
            cells,
            limit: MAX_COVER_CELLS,
        });
    }

    let keep_limit_sq = {
        let r = radius + cover_radius;
        // Tiny relative slack keeps boundary cells that exact arithmetic
        // would include.
        r * r * (1.0 + 1e-12)
    };
    let mut out = Vec::new();
    let mut idx = vec![-steps; d];
    loop {
        let mut norm_sq = 0.0;
        for &i in &idx {
            let x = spacing * i as f64;
            norm_sq += x * x;
        }
        if norm_sq <= keep_limit_sq {
            let coords: Vec<f64> = center
                .coords()
                .iter()
                .zip(idx.iter())
                .map(|(c, &i)| c + spacing * i as f64)
                .collect();
            out.push(Point::from_vec_unchecked(coords));
        }
        // Odometer increment over [-steps, steps]^d.
        let mut axis = 0;
        loop {
            if axis == d {
                return Ok(out);
            }
            idx[axis] += 1;
            if idx[axis] <= steps {
                break;
            }
            idx[axis] = -steps;
            axis += 1;
        }
    }
}

/// Radial projection onto the closed ball of the given radius around the
/// origin. Points already inside are returned unchanged.
pub fn clamp_to_ball(p: &Point, radius: f64) -> Point {
    assert!(radius > 0.0, "clamp radius must be positive");
    let norm = p.norm();
    if norm <= radius {
        return p.clone();
    }
    let scale = radius / norm;
    Point::from_vec_unchecked(p.coords().iter().map(|c| c * scale).collect())
}

#[cfg(test)]
pub(crate) fn pt(coords: &[f64]) -> Point {
    Point::new(coords.to_vec()).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    #[test]
    fn dist_rejects_dimension_mismatch() {
        let p = pt(&[0.0, 0.0]);
        let q = pt(&[1.0]);
        assert!(matches!(
            dist(&p, &q),
            Err(GeometryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn dist_basic_values() {
        let p = pt(&[0.0, 0.0]);
        let q = pt(&[3.0, 4.0]);
        assert!((dist(&p, &q).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(dist(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn point_rejects_non_finite() {
        assert!(matches!(
            Point::new(vec![0.0, f64::NAN]),
            Err(GeometryError::NonFiniteCoordinate(1))
        ));
        assert!(matches!(Point::new(vec![]), Err(GeometryError::EmptyPoint)));
    }

    #[test]
    fn dataset_validation() {
        assert!(matches!(
            Dataset::unweighted(vec![]),
            Err(GeometryError::EmptyDataset)
        ));
        assert!(matches!(
            Dataset::weighted(vec![pt(&[0.0])], vec![0.0]),
            Err(GeometryError::ZeroTotalWeight)
        ));
        assert!(matches!(
            Dataset::weighted(vec![pt(&[0.0])], vec![-1.0]),
            Err(GeometryError::NegativeWeight(0))
        ));
        assert!(matches!(
            Dataset::unweighted(vec![pt(&[0.0]), pt(&[0.0, 1.0])]),
            Err(GeometryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cost_single_center_is_weighted_distance_sum() {
        let data = Dataset::weighted(
            vec![pt(&[0.0, 0.0]), pt(&[3.0, 4.0]), pt(&[0.0, 2.0])],
            vec![1.0, 2.0, 0.5],
        )
        .unwrap();
        let centers = CenterSet::new(vec![pt(&[0.0, 0.0])]).unwrap();
        let got = cost(&data, &centers).unwrap();
        assert!((got - (0.0 + 2.0 * 5.0 + 0.5 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn assign_ties_go_to_lowest_index() {
        let data = Dataset::unweighted(vec![pt(&[0.0])]).unwrap();
        let centers = CenterSet::new(vec![pt(&[1.0]), pt(&[-1.0])]).unwrap();
        let a = assign(&data, &centers).unwrap();
        assert_eq!(a.owner, vec![0]);
        assert_eq!(a.per_center_count, vec![1.0, 0.0]);
    }

    #[test]
    fn assign_counts_sum_to_total_weight() {
        let mut rng = SeededRng::new(3);
        let points: Vec<Point> = (0..40)
            .map(|_| pt(&[rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0)]))
            .collect();
        let weights: Vec<f64> = (0..40).map(|_| rng.uniform_in(0.1, 2.0)).collect();
        let data = Dataset::weighted(points, weights).unwrap();
        let centers = CenterSet::new(vec![pt(&[0.5, 0.5]), pt(&[-0.5, -0.5])]).unwrap();
        let a = assign(&data, &centers).unwrap();
        let total: f64 = a.per_center_count.iter().sum();
        assert!((total - data.total_weight()).abs() < 1e-9);
        for (i, &j) in a.owner.iter().enumerate() {
            let dj = dist(&data.points()[i], &centers.centers()[j]).unwrap();
            for c in centers.centers() {
                assert!(dj <= dist(&data.points()[i], c).unwrap() + 1e-12);
            }
        }
    }

    #[test]
    fn cost_matches_sequential_reference() {
        let mut rng = SeededRng::new(9);
        let points: Vec<Point> = (0..5000)
            .map(|_| {
                pt(&[
                    rng.uniform_in(-1.0, 1.0),
                    rng.uniform_in(-1.0, 1.0),
                    rng.uniform_in(-1.0, 1.0),
                ])
            })
            .collect();
        let data = Dataset::unweighted(points).unwrap();
        let centers = CenterSet::new(vec![
            pt(&[0.3, 0.0, 0.0]),
            pt(&[-0.4, 0.2, 0.0]),
            pt(&[0.0, -0.6, 0.5]),
        ])
        .unwrap();
        // Bitwise equality: both paths fold identical fixed-order blocks.
        assert_eq!(
            cost(&data, &centers).unwrap().to_bits(),
            cost_seq(&data, &centers).unwrap().to_bits()
        );
        let a = assign(&data, &centers).unwrap();
        let b = assign_seq(&data, &centers).unwrap();
        assert_eq!(a.owner, b.owner);
    }

    #[test]
    fn cover_ball_one_dimensional_example() {
        // radius 1, cover radius 0.5 in 1-D: spacing 1, lattice {-1, 0, 1}.
        let got = cover_ball(&pt(&[0.0]), 1.0, 0.5).unwrap();
        let coords: Vec<f64> = got.iter().map(|p| p.coords()[0]).collect();
        assert_eq!(coords, vec![-1.0, 0.0, 1.0]);

        // Dense sweep of the covered interval: max gap to the lattice is 0.5.
        let mut worst: f64 = 0.0;
        let mut x = -1.0;
        while x <= 1.0 {
            let best = coords
                .iter()
                .map(|c| x - c)
                .map(f64::abs)
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(best);
            x += 1e-4;
        }
        assert!(worst <= 0.5 + 1e-9, "worst gap {worst}");
    }

    #[test]
    fn cover_ball_zero_radius_is_anchor_only() {
        let got = cover_ball(&pt(&[2.0, -1.0]), 0.0, 0.25).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0], pt(&[2.0, -1.0]));
    }

    #[test]
    fn cover_ball_always_contains_anchor() {
        for d in 1..=3usize {
            let center = Point::new(vec![0.25; d]).unwrap();
            for (radius, cover) in [(1.0, 0.5), (1.0, 1.0), (0.5, 2.0), (2.0, 0.4)] {
                let got = cover_ball(&center, radius, cover).unwrap();
                assert!(
                    got.iter().any(|p| p == &center),
                    "anchor missing for d={d} radius={radius} cover={cover}"
                );
            }
        }
    }

    #[test]
    fn cover_ball_size_respects_closed_form() {
        for d in 1..=3usize {
            let center = Point::origin(d);
            for (radius, cover) in [(1.0, 0.5), (1.0, 0.25), (2.0, 0.3)] {
                let got = cover_ball(&center, radius, cover).unwrap();
                let spacing = 2.0 * cover / (d as f64).sqrt();
                let steps = (radius / spacing).ceil();
                let bound = (2.0 * steps + 1.0).powi(d as i32);
                assert!((got.len() as f64) <= bound);
            }
        }
    }

    #[test]
    fn cover_ball_covers_sampled_points() {
        let mut rng = SeededRng::new(17);
        for d in 1..=3usize {
            let center = Point::new((0..d).map(|_| rng.uniform_in(-0.5, 0.5)).collect()).unwrap();
            let radius = 1.0;
            let cover = 0.4;
            let lattice = cover_ball(&center, radius, cover).unwrap();
            for _ in 0..2000 {
                let sample = sample_in_ball(&center, radius, &mut rng);
                let best = lattice
                    .iter()
                    .map(|q| dist_unchecked(sample.coords(), q.coords()))
                    .fold(f64::INFINITY, f64::min);
                assert!(best <= cover + 1e-9, "uncovered sample at distance {best}");
            }
        }
    }

    #[test]
    fn cover_ball_rejects_bad_inputs() {
        assert!(matches!(
            cover_ball(&pt(&[0.0]), -1.0, 0.5),
            Err(GeometryError::NegativeRadius(_))
        ));
        assert!(matches!(
            cover_ball(&pt(&[0.0]), 1.0, 0.0),
            Err(GeometryError::InvalidCoverRadius(_))
        ));
        // 20-dimensional fine cover would enumerate an astronomical lattice.
        let big = Point::origin(20);
        assert!(matches!(
            cover_ball(&big, 1.0, 1e-3),
            Err(GeometryError::CoverTooLarge { .. })
        ));
    }

    #[test]
    fn clamp_examples() {
        let p = pt(&[3.0, 4.0]);
        let c = clamp_to_ball(&p, 1.0);
        assert!((c.coords()[0] - 0.6).abs() < 1e-12);
        assert!((c.coords()[1] - 0.8).abs() < 1e-12);
        let inside = pt(&[0.1, -0.2]);
        assert_eq!(clamp_to_ball(&inside, 1.0), inside);
    }

    pub(crate) fn sample_in_ball(center: &Point, radius: f64, rng: &mut SeededRng) -> Point {
        let d = center.dim();
        loop {
            let g: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-12 {
                continue;
            }
            let r = radius * rng.uniform().powf(1.0 / d as f64);
            let coords = center
                .coords()
                .iter()
                .zip(g.iter())
                .map(|(c, x)| c + r * x / norm)
                .collect();
            return Point::from_vec_unchecked(coords);
        }
    }
}
