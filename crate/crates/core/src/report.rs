//! Run summaries and the expected-position report for ranking plans.

use crate::numerics::DenseMatrix;
use crate::problem::{MotProblem, SmotProblem};
use crate::sinkhorn::SolveStatus;
use crate::trace::{ConvergenceTrace, Stage};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("plan column {0} carries no mass")]
    ZeroColumn(usize),
}

/// Which constraint family a summary reports on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConstraintReport {
    /// `|PV - W|_1` against the budget.
    RelaxedEquality { violation_l1: f64, epsilon: f64 },
    /// Worst (most negative) entry of `PV - W`.
    OneSided { min_slack: f64 },
}

/// Final state of one solve, computed from the recovered plan.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub solver: String,
    pub problem: String,
    pub status: SolveStatus,
    pub objective: f64,
    pub grad_inf: f64,
    pub row_marginal_err_l1: f64,
    pub col_marginal_err_l1: f64,
    pub constraint: ConstraintReport,
    pub iters_sinkhorn: usize,
    pub iters_newton: usize,
    pub max_column_residual: f64,
    pub seed: Option<u64>,
    /// Wall-clock milliseconds, reported only when timing is requested.
    pub wall_ms: Option<f64>,
    pub warm_ms: Option<f64>,
}

fn marginal_errors(plan: &DenseMatrix, r: &[f64], c: &[f64]) -> (f64, f64) {
    let rows = plan.row_sums();
    let cols = plan.col_sums();
    let row_err = rows.iter().zip(r).map(|(a, b)| (a - b).abs()).sum();
    let col_err = cols.iter().zip(c).map(|(a, b)| (a - b).abs()).sum();
    (row_err, col_err)
}

fn constraint_values(plan: &DenseMatrix, v: &DenseMatrix, w: &DenseMatrix) -> DenseMatrix {
    let (n, d) = (w.rows(), w.cols());
    DenseMatrix::from_fn(n, d, |i, k| {
        let pv: f64 = (0..plan.cols()).map(|j| plan.get(i, j) * v.get(j, k)).sum();
        pv - w.get(i, k)
    })
}

impl RunSummary {
    pub fn for_mot(
        prob: &MotProblem,
        plan: &DenseMatrix,
        solver: &str,
        problem: &str,
        status: SolveStatus,
        objective: f64,
        grad_inf: f64,
        trace: &ConvergenceTrace,
        seed: Option<u64>,
    ) -> Self {
        let (row_err, col_err) =
            marginal_errors(plan, &prob.source_weights, &prob.target_weights);
        let violation_l1 = constraint_values(plan, &prob.embeddings, &prob.targets).l1_norm();
        Self {
            solver: solver.to_string(),
            problem: problem.to_string(),
            status,
            objective,
            grad_inf,
            row_marginal_err_l1: row_err,
            col_marginal_err_l1: col_err,
            constraint: ConstraintReport::RelaxedEquality {
                violation_l1,
                epsilon: prob.epsilon,
            },
            iters_sinkhorn: count_stage(trace, Stage::Sinkhorn),
            iters_newton: count_stage(trace, Stage::Newton) + count_stage(trace, Stage::Apdagd),
            max_column_residual: trace.max_column_residual,
            seed,
            wall_ms: None,
            warm_ms: None,
        }
    }

    pub fn for_smot(
        prob: &SmotProblem,
        plan: &DenseMatrix,
        solver: &str,
        problem: &str,
        status: SolveStatus,
        objective: f64,
        grad_inf: f64,
        trace: &ConvergenceTrace,
        seed: Option<u64>,
    ) -> Self {
        let (row_err, col_err) =
            marginal_errors(plan, &prob.source_weights, &prob.target_weights);
        let diffs = constraint_values(plan, &prob.embeddings, &prob.targets);
        let min_slack = diffs.data().iter().cloned().fold(f64::INFINITY, f64::min);
        Self {
            solver: solver.to_string(),
            problem: problem.to_string(),
            status,
            objective,
            grad_inf,
            row_marginal_err_l1: row_err,
            col_marginal_err_l1: col_err,
            constraint: ConstraintReport::OneSided { min_slack },
            iters_sinkhorn: count_stage(trace, Stage::Sinkhorn),
            iters_newton: count_stage(trace, Stage::Newton) + count_stage(trace, Stage::Apdagd),
            max_column_residual: trace.max_column_residual,
            seed,
            wall_ms: None,
            warm_ms: None,
        }
    }

    /// Key-value text document, one `key = value` per line.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        kv("solver", self.solver.clone());
        kv("problem", self.problem.clone());
        kv("status", self.status.to_string());
        kv("objective", format!("{:.17e}", self.objective));
        kv("grad_inf", format!("{:.17e}", self.grad_inf));
        kv(
            "row_marginal_err_l1",
            format!("{:.17e}", self.row_marginal_err_l1),
        );
        kv(
            "col_marginal_err_l1",
            format!("{:.17e}", self.col_marginal_err_l1),
        );
        match self.constraint {
            ConstraintReport::RelaxedEquality {
                violation_l1,
                epsilon,
            } => {
                kv("constraint_violation_l1", format!("{violation_l1:.17e}"));
                kv("epsilon", format!("{epsilon:.17e}"));
            }
            ConstraintReport::OneSided { min_slack } => {
                kv("constraint_min_slack", format!("{min_slack:.17e}"));
            }
        }
        kv("iters_sinkhorn", self.iters_sinkhorn.to_string());
        kv("iters_newton", self.iters_newton.to_string());
        kv(
            "max_column_residual",
            format!("{:.17e}", self.max_column_residual),
        );
        if let Some(seed) = self.seed {
            kv("seed", seed.to_string());
        }
        if let Some(ms) = self.wall_ms {
            kv("wall_ms", format!("{ms:.3}"));
        }
        if let Some(ms) = self.warm_ms {
            kv("warm_ms", format!("{ms:.3}"));
        }
        out
    }
}

fn count_stage(trace: &ConvergenceTrace, stage: Stage) -> usize {
    trace.rows().iter().filter(|r| r.stage == stage).count()
}

/// Barycentric projection of positions: entry `j` is the expected (1-based)
/// position assigned to product `j` under the plan.
pub fn expected_positions(plan: &DenseMatrix) -> Result<Vec<f64>, ReportError> {
    let n = plan.rows();
    let mut out = Vec::with_capacity(plan.cols());
    for j in 0..plan.cols() {
        let mut mass = 0.0;
        let mut weighted = 0.0;
        for k in 0..n {
            let p = plan.get(k, j);
            mass += p;
            weighted += p * (k + 1) as f64;
        }
        if mass <= 0.0 {
            return Err(ReportError::ZeroColumn(j));
        }
        out.push(weighted / mass);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expected_positions_of_identity() {
        let n = 5;
        let plan = DenseMatrix::from_fn(n, n, |i, j| if i == j { 1.0 / n as f64 } else { 0.0 });
        let pos = expected_positions(&plan).unwrap();
        for (j, p) in pos.iter().enumerate() {
            assert!((p - (j + 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn expected_positions_of_uniform_mixing() {
        let n = 7;
        let plan = DenseMatrix::filled(n, n, 1.0 / (n * n) as f64);
        let pos = expected_positions(&plan).unwrap();
        for p in pos {
            assert!((p - (n as f64 + 1.0) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn expected_positions_matches_double_loop() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 9;
        let plan = DenseMatrix::from_fn(n, n, |_, _| rng.gen::<f64>());
        let pos = expected_positions(&plan).unwrap();
        for j in 0..n {
            let mut mass = 0.0;
            let mut weighted = 0.0;
            for k in 0..n {
                mass += plan.get(k, j);
                weighted += plan.get(k, j) * (k + 1) as f64;
            }
            assert!((pos[j] - weighted / mass).abs() < 1e-12);
        }
    }

    #[test]
    fn summary_violation_matches_recovered_primal() {
        use crate::problem::MotProblem;
        let n = 3;
        let uniform = vec![1.0 / 3.0; 3];
        let prob = MotProblem::new(
            DenseMatrix::from_fn(n, n, |i, j| (i + 2 * j) as f64 / 10.0),
            uniform.clone(),
            uniform,
            DenseMatrix::new(n, 1, vec![0.1, 0.5, 0.9]),
            DenseMatrix::new(n, 1, vec![0.2, 0.1, 0.15]),
            0.25,
            2.0,
        )
        .unwrap();
        let plan = DenseMatrix::from_fn(n, n, |i, j| ((i * n + j) as f64 + 1.0) / 45.0);
        let summary = RunSummary::for_mot(
            &prob,
            &plan,
            "sns",
            "consistency",
            SolveStatus::Converged,
            -1.0,
            1e-9,
            &ConvergenceTrace::new(),
            None,
        );
        let mut direct = 0.0;
        for i in 0..n {
            let pv: f64 = (0..n)
                .map(|j| plan.get(i, j) * prob.embeddings.get(j, 0))
                .sum();
            direct += (pv - prob.targets.get(i, 0)).abs();
        }
        match summary.constraint {
            ConstraintReport::RelaxedEquality { violation_l1, .. } => {
                assert!((violation_l1 - direct).abs() <= 1e-12);
            }
            _ => panic!("wrong constraint family"),
        }
    }

    #[test]
    fn zero_column_is_an_error() {
        let mut plan = DenseMatrix::filled(3, 3, 1.0);
        for k in 0..3 {
            plan.set(k, 1, 0.0);
        }
        assert_eq!(expected_positions(&plan), Err(ReportError::ZeroColumn(1)));
    }
}
