//! Adaptive primal-dual accelerated gradient ascent over a flat dual
//! vector, with the doubling search for the local smoothness constant.

use crate::dual::{dot, inf_norm, DualPotential, PotentialError};
use crate::numerics::DenseMatrix;
use crate::sinkhorn::{SolveStatus, SolverError};
use crate::trace::{Stage, Tracer};

/// Doubling attempts allowed per iteration before giving up.
const MAX_DOUBLINGS: usize = 60;

#[derive(Clone, Copy, Debug)]
pub struct ApdagdConfig {
    pub max_iter: usize,
    /// Early exit once the gradient infinity norm drops below this; zero
    /// disables the check.
    pub grad_tol: f64,
    /// Keep per-iteration snapshots for post-hoc verification.
    pub record_iterates: bool,
}

impl ApdagdConfig {
    pub fn new(max_iter: usize) -> Self {
        Self {
            max_iter,
            grad_tol: 0.0,
            record_iterates: false,
        }
    }
}

/// Snapshot of one accepted iteration.
#[derive(Clone, Debug)]
pub struct ApdagdRecord {
    pub smoothness: f64,
    pub alpha: f64,
    pub beta_before: f64,
    pub beta_after: f64,
    pub probe: Vec<f64>,
    pub next: Vec<f64>,
}

/// Solver state: averaged iterate, gradient aggregate, last probe point,
/// and the adaptive smoothness bookkeeping. `beta` is nondecreasing and
/// the smoothness estimate stays positive.
#[derive(Clone, Debug)]
pub struct ApdagdState {
    /// Averaged iterate (the output sequence).
    pub iterate: Vec<f64>,
    /// Gradient aggregate.
    pub aggregate: Vec<f64>,
    /// Probe point of the last accepted step.
    pub probe: Vec<f64>,
    /// Last accepted step weight.
    pub alpha: f64,
    /// Cumulative step weight.
    pub beta: f64,
    /// Smoothness estimate carried into the next iteration.
    pub smoothness: f64,
    /// Trial constant accepted at the last iteration.
    pub trial: f64,
    /// Accepted iteration count.
    pub iteration: usize,
}

impl ApdagdState {
    fn start(z0: &[f64]) -> Self {
        Self {
            iterate: z0.to_vec(),
            aggregate: z0.to_vec(),
            probe: z0.to_vec(),
            alpha: 0.0,
            beta: 0.0,
            smoothness: 1.0,
            trial: 1.0,
            iteration: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ApdagdResult {
    pub z: Vec<f64>,
    pub status: SolveStatus,
    pub state: ApdagdState,
    pub records: Vec<ApdagdRecord>,
}

/// Supplies a transport plan for reference tracing.
pub type PlanProvider<'a> = &'a dyn Fn(&[f64]) -> Result<DenseMatrix, PotentialError>;

/// Runs the accelerated ascent from `z0` (the aggregate and probe sequences
/// start there too). `plan_of` supplies the transport plan for reference
/// tracing when the potential has one.
pub fn run_apdagd<P: DualPotential + ?Sized>(
    pot: &P,
    z0: &[f64],
    cfg: &ApdagdConfig,
    tracer: &mut Tracer,
    plan_of: Option<PlanProvider>,
) -> Result<ApdagdResult, SolverError> {
    assert!(cfg.max_iter >= 1, "at least one iteration required");
    let dim = pot.dim();
    assert_eq!(z0.len(), dim);

    let mut state = ApdagdState::start(z0);
    let mut records = Vec::new();
    let mut status = SolveStatus::MaxIterations;

    for k in 0..cfg.max_iter {
        if cfg.grad_tol > 0.0 {
            let g = pot.grad(&state.iterate)?;
            if inf_norm(&g) <= cfg.grad_tol {
                status = SolveStatus::Converged;
                break;
            }
        }

        let mut m = state.smoothness / 2.0;
        let mut accepted = false;
        for _ in 0..MAX_DOUBLINGS {
            m *= 2.0;
            let alpha = (1.0 + (1.0 + 4.0 * m * state.beta).sqrt()) / (2.0 * m);
            let beta_next = state.beta + alpha;
            let tau = alpha / beta_next;

            let probe: Vec<f64> = state
                .aggregate
                .iter()
                .zip(&state.iterate)
                .map(|(zt, zk)| tau * zt + (1.0 - tau) * zk)
                .collect();
            let (f_probe, g_probe) = match (pot.eval(&probe), pot.grad(&probe)) {
                (Ok(f), Ok(g)) => (f, g),
                _ => continue, // treat overflow as a failed smoothness guess
            };
            let aggregate_next: Vec<f64> = state
                .aggregate
                .iter()
                .zip(&g_probe)
                .map(|(zt, g)| zt + alpha * g)
                .collect();
            let z_next: Vec<f64> = aggregate_next
                .iter()
                .zip(&state.iterate)
                .map(|(zt, zk)| tau * zt + (1.0 - tau) * zk)
                .collect();
            let f_next = match pot.eval(&z_next) {
                Ok(f) => f,
                Err(_) => continue,
            };
            let diff: Vec<f64> = z_next.iter().zip(&probe).map(|(a, b)| a - b).collect();
            let model = f_probe + dot(&g_probe, &diff) - 0.5 * m * dot(&diff, &diff);
            if f_next >= model {
                if cfg.record_iterates {
                    records.push(ApdagdRecord {
                        smoothness: m,
                        alpha,
                        beta_before: state.beta,
                        beta_after: beta_next,
                        probe: probe.clone(),
                        next: z_next.clone(),
                    });
                }
                state.iterate = z_next;
                state.aggregate = aggregate_next;
                state.probe = probe;
                state.alpha = alpha;
                state.beta = beta_next;
                state.trial = m;
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(SolverError::AdaptiveStall { iter: k });
        }
        state.smoothness = m / 2.0;
        state.iteration = k + 1;

        let f = pot.eval(&state.iterate)?;
        let g = pot.grad(&state.iterate)?;
        let plan = match (tracer.wants_plan(), plan_of) {
            (true, Some(make)) => Some(make(&state.iterate)?),
            _ => None,
        };
        tracer.record(Stage::Apdagd, f, inf_norm(&g), plan.as_ref());
    }

    if status != SolveStatus::Converged && cfg.grad_tol > 0.0 {
        let g = pot.grad(&state.iterate)?;
        if inf_norm(&g) <= cfg.grad_tol {
            status = SolveStatus::Converged;
        }
    }
    Ok(ApdagdResult {
        z: state.iterate.clone(),
        status,
        state,
        records,
    })
}
