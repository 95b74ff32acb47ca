//! Entropically regularized optimal transport under martingale-type
//! constraints.
//!
//! Two constraint families share one solver stack: a relaxed equality
//! `|PV - W|_1 <= epsilon` and a one-sided `PV >= W`. Both admit concave
//! unconstrained duals that are maximized by
//!
//! - alternating maximization (exact column scaling in `y`, small Newton
//!   steps on the remaining block),
//! - a sparse Newton stage on the full dual with a plan-sparsified Hessian,
//! - an adaptive accelerated gradient baseline,
//!
//! plus a desk-scale simplex oracle for cross-checking against the exact
//! linear programs.

pub mod apdagd;
pub mod dual;
pub mod io;
pub mod linesearch;
pub mod lp;
pub mod mot_dual;
pub mod numerics;
pub mod problem;
pub mod report;
pub mod sinkhorn;
pub mod sns;
pub mod smot_dual;
pub mod trace;
pub mod warm;

pub use dual::{DualPotential, EntropicDual, HessianMode, PotentialError};
pub use numerics::{DenseMatrix, SparseSymMatrix};
pub use problem::{MotProblem, ProblemError, QuantizedDistribution, SmotProblem};
pub use sinkhorn::{SolveResult, SolveStatus, SolverError};
pub use trace::{ConvergenceTrace, Stage, Tracer};
