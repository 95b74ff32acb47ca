//! Alternating maximization: exact column scaling in `y` followed by a few
//! Newton steps on the remaining dual block, with backtracking line search.

use crate::dual::{dot, gather_block, inf_norm, EntropicDual, PotentialError};
use crate::linesearch::{backtrack, LineSearchError, LineSearchParams};
use crate::numerics::{log_sum_exp_cols, solve_sym_ladder, NumericsError, SparseSymMatrix};
use crate::trace::{Stage, Tracer};
use thiserror::Error;

/// Column feasibility required right after every column scaling.
pub const COLUMN_RESIDUAL_TOL: f64 = 1e-10;

/// Below this gradient scale a failed line search means numerical
/// stationarity rather than a defect.
const STAGNATION_GRAD: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("plan column {col} has no mass")]
    ColumnUnderflow { col: usize },
    #[error("line search failed with gradient norm {grad_inf:e}")]
    LineSearchFailed { grad_inf: f64 },
    #[error("adaptive smoothness search stalled at iteration {iter}")]
    AdaptiveStall { iter: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    Stagnated,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIterations => "max-iterations",
            SolveStatus::Stagnated => "stagnated",
        })
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub z: Vec<f64>,
    pub status: SolveStatus,
}

#[derive(Clone, Copy, Debug)]
pub struct SinkhornConfig {
    pub max_outer: usize,
    /// Newton steps on the non-`y` block per outer iteration.
    pub inner_newton: usize,
    /// Early exit once the full gradient infinity norm drops below this.
    pub grad_tol: f64,
    pub line_search: LineSearchParams,
}

impl SinkhornConfig {
    pub fn new(max_outer: usize, grad_tol: f64) -> Self {
        Self {
            max_outer,
            inner_newton: 3,
            grad_tol,
            line_search: LineSearchParams::default(),
        }
    }
}

/// Exact maximization in `y`: shifts each column potential by
/// `(log c_j - log (P^T 1)_j) / eta`, all in log domain. Returns the
/// recomputed column residual `|P^T 1 - c|_1`, asserted against
/// [`COLUMN_RESIDUAL_TOL`].
pub fn column_scale<D: EntropicDual>(dual: &D, z: &mut [f64]) -> Result<f64, SolverError> {
    let n = dual.sites();
    let eta = dual.eta();
    let c = dual.target_weights().to_vec();
    let lp = dual.log_plan(z);
    let col_lse = log_sum_exp_cols(&lp)
        .map_err(|e| match e {
            NumericsError::EmptyRow(col) => SolverError::ColumnUnderflow { col },
            other => SolverError::Numerics(other),
        })?;
    for j in 0..n {
        z[n + j] += (c[j].ln() - col_lse[j]) / eta;
    }
    // Re-form the plan and verify the marginal was hit.
    let lp = dual.log_plan(z);
    let col_lse = log_sum_exp_cols(&lp)
        .map_err(|e| match e {
            NumericsError::EmptyRow(col) => SolverError::ColumnUnderflow { col },
            other => SolverError::Numerics(other),
        })?;
    let residual: f64 = col_lse
        .iter()
        .zip(&c)
        .map(|(l, cj)| (l.exp() - cj).abs())
        .sum();
    assert!(
        residual <= COLUMN_RESIDUAL_TOL,
        "column scaling left residual {residual:e}"
    );
    Ok(residual)
}

pub(crate) enum StepOutcome {
    Moved { alpha: f64 },
    /// Line search exhausted while already at numerical stationarity.
    Stagnant,
}

/// One safeguarded Newton ascent step on an arbitrary variable block.
///
/// The Newton direction is tried with Armijo backtracking while the
/// predicted increase is measurable against the floating-point resolution
/// of `f`; past that point acceptance switches to gradient-norm
/// contraction, which keeps the quadratic endgame going. Gradient ascent
/// with backtracking is the last resort. A final failure is an error
/// unless the gradient was already at stationarity scale.
pub(crate) fn newton_ascent_step(
    eval: &dyn Fn(&[f64]) -> Result<f64, PotentialError>,
    grad: &dyn Fn(&[f64]) -> Result<Vec<f64>, PotentialError>,
    z: &mut Vec<f64>,
    g: &[f64],
    h: &SparseSymMatrix,
    ls: &LineSearchParams,
) -> Result<StepOutcome, SolverError> {
    let gn = inf_norm(g);
    if gn == 0.0 {
        return Ok(StepOutcome::Moved { alpha: 0.0 });
    }
    let f0 = eval(z)?;

    let mut direction: Vec<f64>;
    let mut slope;
    match solve_sym_ladder(h, g) {
        Ok(sol) => {
            direction = sol.x.iter().map(|v| -v).collect();
            slope = dot(g, &direction);
            if slope <= 0.0 {
                // A solve through an indefinite Hessian can point downhill;
                // the reflected direction is uphill, and as a last resort the
                // gradient itself is.
                direction.iter_mut().for_each(|v| *v = -*v);
                slope = -slope;
                if slope <= 0.0 {
                    direction = g.to_vec();
                    slope = gn * gn;
                }
            }
        }
        Err(NumericsError::SingularSystem { .. }) => {
            direction = g.to_vec();
            slope = gn * gn;
        }
        Err(e) => return Err(e.into()),
    }

    // The objective can only certify progress above its own rounding noise.
    let noise = 4.0 * f64::EPSILON * (1.0 + f0.abs());
    if slope > noise {
        match backtrack(eval, z, &direction, f0, slope, ls) {
            Ok(acc) => {
                *z = acc.point;
                return Ok(StepOutcome::Moved { alpha: acc.alpha });
            }
            Err(LineSearchError::BadSlope(_)) | Err(LineSearchError::Exhausted(_)) => {}
        }
    }

    // Gradient-norm acceptance: backtrack on |grad| contraction instead of
    // the unmeasurable objective increase. The objective may only recede
    // within rounding noise.
    let mut alpha = 1.0;
    for _ in 0..8 {
        let trial: Vec<f64> = z
            .iter()
            .zip(&direction)
            .map(|(a, b)| a + alpha * b)
            .collect();
        if let (Ok(g_trial), Ok(f_trial)) = (grad(&trial), eval(&trial)) {
            if inf_norm(&g_trial) <= 0.9 * gn && f_trial >= f0 - 8.0 * noise {
                *z = trial;
                return Ok(StepOutcome::Moved { alpha });
            }
        }
        alpha *= ls.shrink;
    }

    let slope = gn * gn;
    match backtrack(eval, z, g, f0, slope, ls) {
        Ok(acc) => {
            *z = acc.point;
            Ok(StepOutcome::Moved { alpha: acc.alpha })
        }
        Err(_) => {
            if gn <= STAGNATION_GRAD * (1.0 + f0.abs()) {
                Ok(StepOutcome::Stagnant)
            } else {
                Err(SolverError::LineSearchFailed { grad_inf: gn })
            }
        }
    }
}

/// Newton step on the non-`y` block, using the exact block Hessian (site
/// diagonal plus border, `O(n d^2)` nonzeros). Returns the accepted step
/// size; `0` when the block is already stationary.
pub fn inner_block_step<D: EntropicDual>(
    dual: &D,
    z: &mut [f64],
    ls: &LineSearchParams,
) -> Result<f64, SolverError> {
    let n = dual.sites();
    let g_full = dual.grad(z)?;
    let g_block = gather_block(&g_full, n);
    if inf_norm(&g_block) == 0.0 {
        return Ok(0.0);
    }
    let h = dual.block_hessian(z)?;
    let z_orig = z.to_vec();
    let to_full = |block: &[f64]| -> Vec<f64> {
        let mut full = z_orig.clone();
        full[..n].copy_from_slice(&block[..n]);
        full[2 * n..].copy_from_slice(&block[n..]);
        full
    };
    let eval = |block: &[f64]| dual.eval(&to_full(block));
    let grad = |block: &[f64]| {
        dual.grad(&to_full(block))
            .map(|g| gather_block(&g, n))
    };

    let mut zb = gather_block(z, n);
    let outcome = newton_ascent_step(&eval, &grad, &mut zb, &g_block, &h, ls)?;
    z[..n].copy_from_slice(&zb[..n]);
    z[2 * n..].copy_from_slice(&zb[n..]);
    match outcome {
        StepOutcome::Moved { alpha } => Ok(alpha),
        StepOutcome::Stagnant => Ok(0.0),
    }
}

/// Alternating maximization: one column scaling then `inner_newton` block
/// Newton steps per outer iteration, stopping at `max_outer` or once the
/// full gradient norm reaches `grad_tol`.
pub fn run_sinkhorn<D: EntropicDual>(
    dual: &D,
    z0: &[f64],
    cfg: &SinkhornConfig,
    tracer: &mut Tracer,
) -> Result<SolveResult, SolverError> {
    assert!(cfg.max_outer >= 1 && cfg.inner_newton >= 1, "invalid config");
    let mut z = z0.to_vec();
    let mut status = SolveStatus::MaxIterations;
    for _ in 0..cfg.max_outer {
        let residual = column_scale(dual, &mut z)?;
        tracer.column_residual(residual);
        for _ in 0..cfg.inner_newton {
            inner_block_step(dual, &mut z, &cfg.line_search)?;
        }
        let f = dual.eval(&z)?;
        let g = dual.grad(&z)?;
        let grad_inf = inf_norm(&g);
        let plan = if tracer.wants_plan() {
            Some(dual.plan(&z)?)
        } else {
            None
        };
        tracer.record(Stage::Sinkhorn, f, grad_inf, plan.as_ref());
        if grad_inf <= cfg.grad_tol {
            status = SolveStatus::Converged;
            break;
        }
    }
    Ok(SolveResult { z, status })
}
