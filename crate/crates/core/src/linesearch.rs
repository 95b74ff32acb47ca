//! Backtracking line search for concave maximization: accept `alpha` when
//! `f(z + alpha d) >= f(z) + c1 * alpha * <grad, d>`, shrinking geometrically
//! otherwise. Overflowing trial evaluations count as rejections.

use crate::dual::PotentialError;
use thiserror::Error;

#[derive(Clone, Copy, Debug)]
pub struct LineSearchParams {
    /// Geometric shrink factor in (0, 1).
    pub shrink: f64,
    /// Sufficient-increase constant in (0, 1).
    pub sufficient_increase: f64,
    pub max_backtracks: usize,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        Self {
            shrink: 0.5,
            sufficient_increase: 1e-4,
            max_backtracks: 50,
        }
    }
}

#[derive(Debug, Error)]
pub enum LineSearchError {
    #[error("no acceptable step within {0} backtracks")]
    Exhausted(usize),
    #[error("search direction has nonpositive slope {0:e}")]
    BadSlope(f64),
}

pub struct Accepted {
    pub alpha: f64,
    pub value: f64,
    pub point: Vec<f64>,
}

/// Runs the backtracking loop from `alpha = 1`. `slope` must be the
/// directional derivative `<grad, direction>` and positive.
pub fn backtrack(
    eval: impl Fn(&[f64]) -> Result<f64, PotentialError>,
    z: &[f64],
    direction: &[f64],
    f0: f64,
    slope: f64,
    params: &LineSearchParams,
) -> Result<Accepted, LineSearchError> {
    if slope <= 0.0 {
        return Err(LineSearchError::BadSlope(slope));
    }
    let mut alpha = 1.0;
    for _ in 0..=params.max_backtracks {
        let trial: Vec<f64> = z
            .iter()
            .zip(direction)
            .map(|(zi, di)| zi + alpha * di)
            .collect();
        if let Ok(value) = eval(&trial) {
            if value >= f0 + params.sufficient_increase * alpha * slope {
                return Ok(Accepted {
                    alpha,
                    value,
                    point: trial,
                });
            }
        }
        alpha *= params.shrink;
    }
    Err(LineSearchError::Exhausted(params.max_backtracks))
}
