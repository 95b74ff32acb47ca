//! Warm initialization through geometrically doubled regularization levels:
//! a few alternating-maximization iterations at each level, carrying the
//! dual variables across levels unchanged.

use crate::mot_dual::{MotDual, MotPotential};
use crate::problem::{MotProblem, SmotProblem};
use crate::sinkhorn::{run_sinkhorn, SinkhornConfig, SolverError};
use crate::smot_dual::{SmotDual, SmotPotential};
use crate::trace::Tracer;

/// Default initial regularization strength for the doubling schedule.
pub const DEFAULT_ETA0: f64 = 12.5;
/// Default iterations at each level.
pub const DEFAULT_ITERS_PER_LEVEL: usize = 5;

/// Geometric regularization ladder `eta0, 2 eta0, 4 eta0, ...` strictly
/// below the target.
#[derive(Clone, Debug)]
pub struct EtaSchedule {
    pub eta0: f64,
    pub eta_target: f64,
    pub iters_per_level: usize,
    pub levels: Vec<f64>,
}

impl EtaSchedule {
    pub fn new(eta0: f64, eta_target: f64, iters_per_level: usize) -> Self {
        assert!(eta0 > 0.0 && eta_target > 0.0, "strengths must be positive");
        let mut levels = Vec::new();
        let mut v = eta0;
        while v < eta_target {
            levels.push(v);
            v *= 2.0;
        }
        Self {
            eta0,
            eta_target,
            iters_per_level,
            levels,
        }
    }

    /// Level count, equal to `ceil(log2(eta_target / eta0))` when the
    /// target exceeds the base.
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// Runs the schedule for the relaxed-equality dual, starting from zero
/// duals and returning the flat variables to use at the target strength.
pub fn warm_init_mot(prob: &MotProblem, schedule: &EtaSchedule) -> Result<Vec<f64>, SolverError> {
    let mut z = MotDual::zeros(prob.n, prob.d).to_flat();
    for &level in &schedule.levels {
        let staged = prob.with_eta(level);
        let pot = MotPotential::new(&staged);
        let cfg = SinkhornConfig {
            max_outer: schedule.iters_per_level,
            inner_newton: 3,
            grad_tol: 0.0,
            line_search: Default::default(),
        };
        let res = run_sinkhorn(&pot, &z, &cfg, &mut Tracer::disabled())?;
        z = res.z;
    }
    Ok(z)
}

/// One-sided counterpart of [`warm_init_mot`].
pub fn warm_init_smot(prob: &SmotProblem, schedule: &EtaSchedule) -> Result<Vec<f64>, SolverError> {
    let mut z = SmotDual::zeros(prob.n, prob.d).to_flat();
    for &level in &schedule.levels {
        let staged = prob.with_eta(level);
        let pot = SmotPotential::new(&staged);
        let cfg = SinkhornConfig {
            max_outer: schedule.iters_per_level,
            inner_newton: 3,
            grad_tol: 0.0,
            line_search: Default::default(),
        };
        let res = run_sinkhorn(&pot, &z, &cfg, &mut Tracer::disabled())?;
        z = res.z;
    }
    Ok(z)
}
