//! Per-iteration convergence records and their on-disk format.

use crate::numerics::DenseMatrix;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Sinkhorn,
    Newton,
    Apdagd,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Sinkhorn => "sinkhorn",
            Stage::Newton => "newton",
            Stage::Apdagd => "apdagd",
        })
    }
}

#[derive(Clone, Debug)]
pub struct TraceRow {
    pub iter: usize,
    pub stage: Stage,
    pub objective: f64,
    pub grad_inf: f64,
    pub l1_to_ref: Option<f64>,
    pub wall_ms: f64,
}

/// Iteration history of one solve. Iteration indices are strictly
/// increasing across stages.
#[derive(Clone, Debug, Default)]
pub struct ConvergenceTrace {
    rows: Vec<TraceRow>,
    /// Worst column-marginal residual observed right after a column scaling.
    pub max_column_residual: f64,
}

impl ConvergenceTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: TraceRow) {
        if let Some(last) = self.rows.last() {
            assert!(row.iter > last.iter, "trace iterations must increase");
        }
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn next_iter(&self) -> usize {
        self.rows.last().map(|r| r.iter + 1).unwrap_or(1)
    }

    pub fn merge_column_residual(&mut self, residual: f64) {
        if residual > self.max_column_residual {
            self.max_column_residual = residual;
        }
    }

    /// Header-free delimiter-separated rows
    /// `iter,stage,objective,grad_inf,l1_to_ref,wall_ms`. Wall times are
    /// zeroed unless `include_timings` is set, keeping repeated runs
    /// byte-identical.
    pub fn to_file_string(&self, include_timings: bool) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let l1 = match r.l1_to_ref {
                Some(v) => format!("{v:.17e}"),
                None => "nan".to_string(),
            };
            let wall = if include_timings { r.wall_ms } else { 0.0 };
            out.push_str(&format!(
                "{},{},{:.17e},{:.17e},{},{:.3}\n",
                r.iter, r.stage, r.objective, r.grad_inf, l1, wall
            ));
        }
        out
    }
}

/// Collects rows during a solve; optionally measures the l1 distance of the
/// current plan to a fixed reference plan.
pub struct Tracer<'a> {
    trace: ConvergenceTrace,
    reference: Option<&'a DenseMatrix>,
    clock: Instant,
    enabled: bool,
}

impl<'a> Tracer<'a> {
    pub fn new(reference: Option<&'a DenseMatrix>) -> Self {
        Self {
            trace: ConvergenceTrace::new(),
            reference,
            clock: Instant::now(),
            enabled: true,
        }
    }

    /// Records nothing; used by warm-up stages whose history is discarded.
    pub fn disabled() -> Self {
        Self {
            trace: ConvergenceTrace::new(),
            reference: None,
            clock: Instant::now(),
            enabled: false,
        }
    }

    pub fn record(&mut self, stage: Stage, objective: f64, grad_inf: f64, plan: Option<&DenseMatrix>) {
        if !self.enabled {
            return;
        }
        let l1_to_ref = match (self.reference, plan) {
            (Some(r), Some(p)) => Some(p.l1_distance(r)),
            _ => None,
        };
        let wall_ms = self.clock.elapsed().as_secs_f64() * 1e3;
        self.clock = Instant::now();
        let iter = self.trace.next_iter();
        self.trace.push(TraceRow {
            iter,
            stage,
            objective,
            grad_inf,
            l1_to_ref,
            wall_ms,
        });
    }

    pub fn wants_plan(&self) -> bool {
        self.enabled && self.reference.is_some()
    }

    pub fn column_residual(&mut self, residual: f64) {
        self.trace.merge_column_residual(residual);
    }

    pub fn finish(self) -> ConvergenceTrace {
        self.trace
    }

    pub fn trace(&self) -> &ConvergenceTrace {
        &self.trace
    }
}
