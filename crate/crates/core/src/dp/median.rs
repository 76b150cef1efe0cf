//! Private geometric median via noisy projected subgradient descent with a
//! decaying step size. Requires an (epsilon, delta) budget with delta > 0;
//! the Gaussian noise is calibrated to the composed sensitivity of the full
//! iterate sequence.

use super::{DpError, PrivacyBudget};
use crate::geometry::{self, GeometryError, Point};
use crate::rng::SeededRng;

/// Number of subgradient steps every run performs.
pub const RECOVER_STEPS: usize = 200;

/// Distance below which a point contributes a zero subgradient term.
const GRAD_EPS: f64 = 1e-12;

/// Per-coordinate Gaussian noise scale for the whole iterate sequence: the
/// averaged subgradient changes by at most 2/m in L2 norm when one point
/// changes, and the T releases compose under a single (eps, delta) Gaussian
/// calibration.
pub fn gaussian_sigma(m: usize, steps: usize, budget: &PrivacyBudget) -> Result<f64, DpError> {
    if budget.delta <= 0.0 {
        return Err(DpError::DeltaRequired);
    }
    let sensitivity = 2.0 / m as f64;
    Ok(sensitivity * (2.0 * steps as f64 * (1.25 / budget.delta).ln()).sqrt() / budget.eps)
}

/// Differentially private geometric median of `points`, all assumed to lie
/// in the ball of radius `ball_radius` around the origin. Runs
/// [`RECOVER_STEPS`] noisy subgradient steps from the origin, projecting
/// each iterate back into the ball, and returns the average iterate.
pub fn private_geometric_median(
    points: &[Point],
    budget: &PrivacyBudget,
    ball_radius: f64,
    rng: &mut SeededRng,
) -> Result<Point, DpError> {
    if points.is_empty() {
        return Err(DpError::EmptyInput);
    }
    if !(ball_radius > 0.0 && ball_radius.is_finite()) {
        return Err(DpError::InvalidRadius(ball_radius));
    }
    let dim = points[0].dim();
    for p in points {
        if p.dim() != dim {
            return Err(DpError::Geometry(GeometryError::DimensionMismatch {
                left: dim,
                right: p.dim(),
            }));
        }
    }
    let m = points.len();
    let sigma = gaussian_sigma(m, RECOVER_STEPS, budget)?;

    let mut c = vec![0.0; dim];
    let mut sum = vec![0.0; dim];
    for t in 1..=RECOVER_STEPS {
        // Averaged subgradient of c -> (1/m) * sum_i |c - p_i|.
        let mut grad = vec![0.0; dim];
        for p in points {
            let d = geometry::dist_unchecked(p.coords(), &c);
            if d > GRAD_EPS {
                for (g, (x, y)) in grad.iter_mut().zip(c.iter().zip(p.coords())) {
                    *g += (x - y) / d;
                }
            }
        }
        for g in grad.iter_mut() {
            *g /= m as f64;
        }

        let eta = ball_radius / (t as f64).sqrt();
        let stepped: Vec<f64> = c
            .iter()
            .zip(grad.iter())
            .map(|(x, g)| x - eta * (g + sigma * rng.standard_normal()))
            .collect();
        let projected =
            geometry::clamp_to_ball(&Point::new(stepped).expect("finite step"), ball_radius);
        c = projected.coords().to_vec();
        for (s, x) in sum.iter_mut().zip(c.iter()) {
            *s += x;
        }
    }

    let avg: Vec<f64> = sum.iter().map(|s| s / RECOVER_STEPS as f64).collect();
    Ok(Point::new(avg)?)
}
