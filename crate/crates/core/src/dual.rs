//! Shared surface of the two concave dual potentials: flat variable layout,
//! overflow-guarded evaluation, and the operations the solvers need.
//!
//! Both potentials flatten their variables in the fixed order
//! `(x, y, a-columns, [b-columns, u])` so that one solver stack serves both.

use crate::numerics::{DenseMatrix, SparseSymMatrix, EXP_CLAMP};
use thiserror::Error;

/// Which exponential family overflowed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TermClass {
    Plan,
    SlackS,
    SlackT,
    SlackE,
    SlackQ,
}

impl std::fmt::Display for TermClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TermClass::Plan => "plan",
            TermClass::SlackS => "slack-s",
            TermClass::SlackT => "slack-t",
            TermClass::SlackE => "slack-e",
            TermClass::SlackQ => "slack-q",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum PotentialError {
    #[error("potential overflow in {term} term")]
    Overflow { term: TermClass },
    #[error("potential evaluated to a non-finite value")]
    NonFinite,
}

/// Guarded exponential: errors instead of overflowing past `exp(700)`.
#[inline]
pub(crate) fn exp_guard(arg: f64, term: TermClass) -> Result<f64, PotentialError> {
    if arg > EXP_CLAMP {
        Err(PotentialError::Overflow { term })
    } else {
        Ok(arg.exp())
    }
}

/// Hessian assembly mode. `Sparsified(rho)` keeps the `ceil(rho n^2)`
/// largest plan entries in the dense cross blocks and leaves every other
/// block exact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HessianMode {
    Exact,
    Sparsified(f64),
}

/// Value and gradient access over the flat variable layout.
pub trait DualPotential {
    /// Flat variable dimension.
    fn dim(&self) -> usize;
    fn eval(&self, z: &[f64]) -> Result<f64, PotentialError>;
    fn grad(&self, z: &[f64]) -> Result<Vec<f64>, PotentialError>;
}

/// Full solver surface: plan access, exact column scaling, and the block /
/// full Hessians used by the alternating and Newton stages.
pub trait EntropicDual: DualPotential {
    /// Site count `n` (the plan is `n x n`).
    fn sites(&self) -> usize;
    /// Constraint dimension `d`.
    fn constraint_dim(&self) -> usize;
    fn eta(&self) -> f64;
    /// Target weights `c` (column marginal).
    fn target_weights(&self) -> &[f64];
    /// Log-domain intermediate plan for the current duals.
    fn log_plan(&self, z: &[f64]) -> DenseMatrix;
    /// Hessian over the non-`y` block, in the flat order with `y` removed.
    fn block_hessian(&self, z: &[f64]) -> Result<SparseSymMatrix, PotentialError>;
    /// Hessian over all variables.
    fn full_hessian(&self, z: &[f64], mode: HessianMode) -> Result<SparseSymMatrix, PotentialError>;

    /// Linear-domain plan; errors if an entry would overflow.
    fn plan(&self, z: &[f64]) -> Result<DenseMatrix, PotentialError> {
        let lp = self.log_plan(z);
        let mut out = DenseMatrix::zeros(lp.rows(), lp.cols());
        for i in 0..lp.rows() {
            for j in 0..lp.cols() {
                out.set(i, j, exp_guard(lp.get(i, j), TermClass::Plan)?);
            }
        }
        Ok(out)
    }
}

/// Maps an index in the non-`y` block back into the flat layout (the `y`
/// variables occupy `n..2n`).
#[inline]
pub fn block_to_full(block_idx: usize, n: usize) -> usize {
    if block_idx < n {
        block_idx
    } else {
        block_idx + n
    }
}

/// Extracts the non-`y` components of a flat vector.
pub fn gather_block(full: &[f64], n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(full.len() - n);
    out.extend_from_slice(&full[..n]);
    out.extend_from_slice(&full[2 * n..]);
    out
}

/// Adds `alpha * block` into the non-`y` components of `full`.
pub fn scatter_block_add(full: &mut [f64], block: &[f64], alpha: f64, n: usize) {
    for (bi, v) in block.iter().enumerate() {
        full[block_to_full(bi, n)] += alpha * v;
    }
}

/// Infinity norm.
pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
