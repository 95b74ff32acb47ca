//! Warm-started Newton acceleration: a few alternating-maximization
//! iterations, then full-variable Newton steps on a plan-sparsified Hessian.

use crate::dual::{inf_norm, EntropicDual, HessianMode, PotentialError};
use crate::linesearch::LineSearchParams;
use crate::numerics::{DenseMatrix, SparseSymMatrix};
use crate::sinkhorn::{
    newton_ascent_step, run_sinkhorn, SinkhornConfig, SolveResult, SolveStatus, SolverError,
    StepOutcome,
};
use crate::trace::{Stage, Tracer};

#[derive(Clone, Copy, Debug)]
pub struct SnsConfig {
    /// Warm-up alternating-maximization iterations.
    pub n1: usize,
    /// Newton iterations.
    pub n2: usize,
    /// Plan retention fraction in (0, 1]; `None` takes [`default_rho`].
    pub rho: Option<f64>,
    pub grad_tol: f64,
    /// Block Newton steps per warm-up iteration.
    pub inner_newton: usize,
    pub line_search: LineSearchParams,
}

impl SnsConfig {
    pub fn new(n1: usize, n2: usize, grad_tol: f64) -> Self {
        Self {
            n1,
            n2,
            rho: None,
            grad_tol,
            inner_newton: 3,
            line_search: LineSearchParams::default(),
        }
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        assert!(rho > 0.0 && rho <= 1.0, "retention fraction out of range");
        self.rho = Some(rho);
        self
    }

    pub fn effective_rho(&self, n: usize, d: usize) -> f64 {
        self.rho.unwrap_or_else(|| default_rho(n, d))
    }
}

/// Default retention: five times the basic-solution support bound
/// `(2n - 1 + nd)` entries out of `n^2`, capped at full retention.
pub fn default_rho(n: usize, d: usize) -> f64 {
    let support = (2 * n - 1 + n * d) as f64;
    (5.0 * support / (n * n) as f64).min(1.0)
}

/// Plan-sparsified Hessian: the dense cross blocks keep only the
/// `ceil(rho n^2)` largest plan entries; every other block stays exact.
pub fn sparsify_hessian<D: EntropicDual>(
    dual: &D,
    z: &[f64],
    rho: f64,
) -> Result<SparseSymMatrix, PotentialError> {
    dual.full_hessian(z, HessianMode::Sparsified(rho))
}

/// Runs `n1` alternating-maximization iterations, then up to `n2` sparse
/// Newton iterations on the full dual variable. Line-search breakdown in
/// the Newton stage reports stagnation with the best iterate instead of
/// failing.
pub fn run_sns<D: EntropicDual>(
    dual: &D,
    z0: &[f64],
    cfg: &SnsConfig,
    tracer: &mut Tracer,
) -> Result<SolveResult, SolverError> {
    assert!(cfg.n2 >= 1, "at least one Newton iteration required");
    let rho = cfg.effective_rho(dual.sites(), dual.constraint_dim());

    let mut z = z0.to_vec();
    if cfg.n1 > 0 {
        let warm = SinkhornConfig {
            max_outer: cfg.n1,
            inner_newton: cfg.inner_newton,
            grad_tol: cfg.grad_tol,
            line_search: cfg.line_search,
        };
        let res = run_sinkhorn(dual, &z, &warm, tracer)?;
        z = res.z;
        if res.status == SolveStatus::Converged {
            return Ok(SolveResult {
                z,
                status: SolveStatus::Converged,
            });
        }
    }

    let mut status = SolveStatus::MaxIterations;
    for _ in 0..cfg.n2 {
        let g = dual.grad(&z)?;
        let grad_inf = inf_norm(&g);
        if grad_inf <= cfg.grad_tol {
            status = SolveStatus::Converged;
            break;
        }
        let h = dual.full_hessian(&z, HessianMode::Sparsified(rho))?;
        let eval = |w: &[f64]| dual.eval(w);
        let grad_fn = |w: &[f64]| dual.grad(w);
        let outcome = match newton_ascent_step(&eval, &grad_fn, &mut z, &g, &h, &cfg.line_search) {
            Ok(o) => o,
            Err(SolverError::LineSearchFailed { .. }) => {
                status = SolveStatus::Stagnated;
                break;
            }
            Err(e) => return Err(e),
        };
        let f = dual.eval(&z)?;
        let g_new = dual.grad(&z)?;
        let gn = inf_norm(&g_new);
        let plan = if tracer.wants_plan() {
            Some(dual.plan(&z)?)
        } else {
            None
        };
        tracer.record(Stage::Newton, f, gn, plan.as_ref());
        match outcome {
            StepOutcome::Moved { .. } => {
                if gn <= cfg.grad_tol {
                    status = SolveStatus::Converged;
                    break;
                }
            }
            StepOutcome::Stagnant => {
                status = if gn <= cfg.grad_tol {
                    SolveStatus::Converged
                } else {
                    SolveStatus::Stagnated
                };
                break;
            }
        }
    }
    if status == SolveStatus::MaxIterations {
        let g = dual.grad(&z)?;
        if inf_norm(&g) <= cfg.grad_tol {
            status = SolveStatus::Converged;
        }
    }
    Ok(SolveResult { z, status })
}

/// Reference plan: full-retention Newton from `z_start` driven to
/// `grad_tol`, with a generous iteration cap. Used to measure
/// `|P - P*|_1` trajectories.
pub fn reference_plan<D: EntropicDual>(
    dual: &D,
    z_start: &[f64],
    grad_tol: f64,
    max_newton: usize,
) -> Result<(DenseMatrix, SolveStatus), SolverError> {
    let cfg = SnsConfig {
        n1: 0,
        n2: max_newton,
        rho: Some(1.0),
        grad_tol,
        inner_newton: 3,
        line_search: LineSearchParams::default(),
    };
    let mut tracer = Tracer::disabled();
    let res = run_sns(dual, z_start, &cfg, &mut tracer)?;
    Ok((dual.plan(&res.z)?, res.status))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mot_dual::tests_support::random_mot;
    use crate::mot_dual::{MotDual, MotPotential};
    use crate::smot_dual::tests_support::random_smot;
    use crate::smot_dual::SmotPotential;

    #[test]
    fn default_rho_tracks_support_bound() {
        let rho = default_rho(200, 1);
        assert!((rho - 5.0 * 599.0 / 40_000.0).abs() < 1e-15);
        assert_eq!(default_rho(3, 1), 1.0);
    }

    #[test]
    fn sparsify_delegates_to_top_k() {
        // The retained cross-block pattern must equal the top-k mask of the
        // plan.
        let prob = random_mot(3, 1, 2.0, 77);
        let pot = MotPotential::new(&prob);
        let z = crate::mot_dual::tests_support::random_dual(3, 1, 78).to_flat();
        let rho = 4.0 / 9.0;
        let h = sparsify_hessian(&pot, &z, rho).unwrap();
        let plan = pot.plan(&z).unwrap();
        let top = crate::numerics::top_k_threshold(&plan, 4).unwrap();
        let n = 3;
        // Collect the (i, j) pairs present in the x-y cross block.
        let mut present = vec![false; 9];
        for &(r, c, _) in h.entries() {
            let (r, c) = (r as usize, c as usize);
            if r < n && (n..2 * n).contains(&c) {
                present[r * n + (c - n)] = true;
            }
        }
        assert_eq!(present, top.mask);
    }

    #[test]
    fn sparsified_deviation_within_structural_bound() {
        // One-sided case, d = 1: the cross blocks differ from exact by the
        // dropped plan entries, so the l1 gap is bounded by
        // 2 eta (1 + |v|_inf) |P - P_sparse|_1.
        let prob = random_smot(5, 1, 3.0, 91);
        let pot = SmotPotential::new(&prob);
        let z = crate::smot_dual::tests_support::random_dual(5, 1, 92).to_flat();
        let exact = pot.full_hessian(&z, HessianMode::Exact).unwrap();
        let rho = 0.3;
        let sparse = pot.full_hessian(&z, HessianMode::Sparsified(rho)).unwrap();

        let de = exact.to_dense();
        let ds = sparse.to_dense();
        let gap = (de - ds).abs().sum();

        let plan = pot.plan(&z).unwrap();
        let k = ((rho * 25.0).ceil()) as usize;
        let top = crate::numerics::top_k_threshold(&plan, k).unwrap();
        let dropped: f64 = plan
            .data()
            .iter()
            .zip(&top.mask)
            .filter(|(_, &kept)| !kept)
            .map(|(v, _)| v.abs())
            .sum();
        let vinf = (0..5)
            .map(|j| prob.embeddings.get(j, 0).abs())
            .fold(0.0, f64::max);
        let bound = prob.eta * (1.0 + vinf) * dropped * 2.0;
        assert!(gap <= bound + 1e-12, "gap {gap} vs bound {bound}");
    }

    #[test]
    fn sparsified_nnz_within_retention_budget() {
        let (n, d) = (6, 2);
        let prob = random_mot(n, d, 2.0, 101);
        let pot = MotPotential::new(&prob);
        let z = crate::mot_dual::tests_support::random_dual(n, d, 102).to_flat();
        let rho = 0.25;
        let h = sparsify_hessian(&pot, &z, rho).unwrap();
        let k = (rho * (n * n) as f64).ceil() as usize;
        let exact_blocks = 2 * n + 4 * n * d + n * (2 * d * d + d) + 1;
        assert!(h.nnz_logical() <= 2 * k * (1 + 2 * d) + 2 * exact_blocks);
    }

    #[test]
    fn full_newton_from_origin_converges_quadratically() {
        // rho = 1, n1 = 0 is plain Newton; near the optimum the gradient
        // norm ratio collapses.
        let prob = random_mot(4, 1, 2.0, 111);
        let pot = MotPotential::new(&prob);
        let cfg = SnsConfig::new(0, 40, 1e-12).with_rho(1.0);
        let mut tracer = Tracer::new(None);
        let res = run_sns(&pot, &MotDual::zeros(4, 1).to_flat(), &cfg, &mut tracer).unwrap();
        assert_eq!(res.status, SolveStatus::Converged);
        let trace = tracer.finish();
        let grads: Vec<f64> = trace.rows().iter().map(|r| r.grad_inf).collect();
        // Ratios shrink once inside the quadratic basin.
        let tail: Vec<f64> = grads
            .windows(2)
            .map(|w| w[1] / w[0].max(1e-300))
            .collect();
        assert!(
            tail.windows(2).any(|w| w[1] < 0.5 * w[0]) || grads.len() <= 3,
            "no contraction observed: {grads:?}"
        );
    }

    #[test]
    fn warm_then_newton_converges_on_smot() {
        let prob = random_smot(6, 1, 8.0, 121);
        let pot = SmotPotential::new(&prob);
        let cfg = SnsConfig::new(5, 25, 1e-11);
        let mut tracer = Tracer::new(None);
        let res = run_sns(
            &pot,
            &crate::smot_dual::SmotDual::zeros(6, 1).to_flat(),
            &cfg,
            &mut tracer,
        )
        .unwrap();
        assert_eq!(res.status, SolveStatus::Converged);
        let trace = tracer.finish();
        let stages: Vec<_> = trace.rows().iter().map(|r| r.stage).collect();
        assert!(stages.contains(&Stage::Sinkhorn));
        assert!(stages.contains(&Stage::Newton));
        // Monotone ascent across both stages.
        for w in trace.rows().windows(2) {
            assert!(w[1].objective >= w[0].objective - 1e-12 * (1.0 + w[0].objective.abs()));
        }
    }
}
