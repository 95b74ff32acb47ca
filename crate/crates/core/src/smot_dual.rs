//! Dual potential of the one-sided (`PV >= W`) transport problem. Same
//! layout conventions as the relaxed-equality dual, with the `B` and `u`
//! blocks absent: flat order `(x, y, a-columns)`.

use crate::dual::{
    exp_guard, DualPotential, EntropicDual, HessianMode, PotentialError, TermClass,
};
use crate::numerics::{
    log_sum_exp_all, top_k_threshold, DenseMatrix, SparseSymMatrix, EXP_CLAMP,
};
use crate::problem::SmotProblem;

#[derive(Clone, Debug, PartialEq)]
pub struct SmotDual {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub a: DenseMatrix,
}

impl SmotDual {
    pub fn zeros(n: usize, d: usize) -> Self {
        Self {
            x: vec![0.0; n],
            y: vec![0.0; n],
            a: DenseMatrix::zeros(n, d),
        }
    }

    pub fn flat_dim(n: usize, d: usize) -> usize {
        2 * n + n * d
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let (n, d) = (self.x.len(), self.a.cols());
        let mut z = Vec::with_capacity(Self::flat_dim(n, d));
        z.extend_from_slice(&self.x);
        z.extend_from_slice(&self.y);
        for k in 0..d {
            for i in 0..n {
                z.push(self.a.get(i, k));
            }
        }
        z
    }

    pub fn from_flat(z: &[f64], n: usize, d: usize) -> Self {
        assert_eq!(z.len(), Self::flat_dim(n, d));
        Self {
            x: z[..n].to_vec(),
            y: z[n..2 * n].to_vec(),
            a: DenseMatrix::from_fn(n, d, |i, k| z[2 * n + k * n + i]),
        }
    }
}

#[inline]
fn idx_a(n: usize, i: usize, k: usize) -> usize {
    2 * n + k * n + i
}

/// Log-domain intermediate plan `eta (-C + A V^T + x 1^T + 1 y^T) - 1`.
pub fn log_plan_flat(prob: &SmotProblem, z: &[f64]) -> DenseMatrix {
    let (n, d) = (prob.n, prob.d);
    let eta = prob.eta;
    let mut out = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let xi = z[i];
        for j in 0..n {
            let mut s = -prob.cost.get(i, j) + xi + z[n + j];
            for k in 0..d {
                s += z[idx_a(n, i, k)] * prob.embeddings.get(j, k);
            }
            out.set(i, j, eta * s - 1.0);
        }
    }
    out
}

fn slack_values(prob: &SmotProblem, z: &[f64]) -> Result<Vec<f64>, PotentialError> {
    let (n, d) = (prob.n, prob.d);
    let mut s = Vec::with_capacity(n * d);
    for k in 0..d {
        for i in 0..n {
            s.push(exp_guard(
                -prob.eta * z[idx_a(n, i, k)] - 1.0,
                TermClass::SlackS,
            )?);
        }
    }
    Ok(s)
}

pub fn eval_g_flat(prob: &SmotProblem, z: &[f64]) -> Result<f64, PotentialError> {
    let (n, d) = (prob.n, prob.d);
    let eta = prob.eta;
    let lp = log_plan_flat(prob, z);
    let lse = log_sum_exp_all(&lp).unwrap_or(f64::NEG_INFINITY);
    if lse > EXP_CLAMP {
        return Err(PotentialError::Overflow {
            term: TermClass::Plan,
        });
    }
    let plan_term = if lse == f64::NEG_INFINITY {
        0.0
    } else {
        -lse.exp() / eta
    };
    let slacks = slack_values(prob, z)?;
    let mut linear = 0.0;
    for i in 0..n {
        linear += z[i] * prob.source_weights[i] + z[n + i] * prob.target_weights[i];
    }
    for k in 0..d {
        for i in 0..n {
            linear += z[idx_a(n, i, k)] * prob.targets.get(i, k);
        }
    }
    let g = plan_term + linear - slacks.iter().sum::<f64>() / eta;
    if g.is_finite() {
        Ok(g)
    } else {
        Err(PotentialError::NonFinite)
    }
}

pub fn eval_g(prob: &SmotProblem, z: &SmotDual) -> Result<f64, PotentialError> {
    eval_g_flat(prob, &z.to_flat())
}

struct PlanSums {
    plan: DenseMatrix,
    row_sums: Vec<f64>,
    col_sums: Vec<f64>,
    pv: Vec<f64>,
}

fn plan_sums(prob: &SmotProblem, lp: &DenseMatrix) -> Result<PlanSums, PotentialError> {
    let (n, d) = (prob.n, prob.d);
    let mut plan = DenseMatrix::zeros(n, n);
    let mut row_sums = vec![0.0; n];
    let mut col_sums = vec![0.0; n];
    let mut pv = vec![0.0; n * d];
    for i in 0..n {
        for j in 0..n {
            let p = exp_guard(lp.get(i, j), TermClass::Plan)?;
            plan.set(i, j, p);
            row_sums[i] += p;
            col_sums[j] += p;
            for k in 0..d {
                pv[k * n + i] += p * prob.embeddings.get(j, k);
            }
        }
    }
    Ok(PlanSums {
        plan,
        row_sums,
        col_sums,
        pv,
    })
}

pub fn grad_g_flat(prob: &SmotProblem, z: &[f64]) -> Result<Vec<f64>, PotentialError> {
    let (n, d) = (prob.n, prob.d);
    let lp = log_plan_flat(prob, z);
    let sums = plan_sums(prob, &lp)?;
    let slacks = slack_values(prob, z)?;
    let mut g = vec![0.0; SmotDual::flat_dim(n, d)];
    for i in 0..n {
        g[i] = prob.source_weights[i] - sums.row_sums[i];
        g[n + i] = prob.target_weights[i] - sums.col_sums[i];
    }
    for k in 0..d {
        for i in 0..n {
            let ki = k * n + i;
            g[idx_a(n, i, k)] = prob.targets.get(i, k) - sums.pv[ki] + slacks[ki];
        }
    }
    if g.iter().all(|v| v.is_finite()) {
        Ok(g)
    } else {
        Err(PotentialError::NonFinite)
    }
}

pub fn grad_g(prob: &SmotProblem, z: &SmotDual) -> Result<SmotDual, PotentialError> {
    let g = grad_g_flat(prob, &z.to_flat())?;
    Ok(SmotDual::from_flat(&g, prob.n, prob.d))
}

fn plan_vv(prob: &SmotProblem, plan: &DenseMatrix) -> Vec<f64> {
    let (n, d) = (prob.n, prob.d);
    let pairs = d * (d + 1) / 2;
    let mut out = vec![0.0; pairs * n];
    for i in 0..n {
        for j in 0..n {
            let p = plan.get(i, j);
            if p == 0.0 {
                continue;
            }
            let mut pair = 0;
            for k in 0..d {
                let vk = prob.embeddings.get(j, k);
                for k2 in k..d {
                    out[pair * n + i] += p * vk * prob.embeddings.get(j, k2);
                    pair += 1;
                }
            }
        }
    }
    out
}

#[inline]
fn pair_index(d: usize, k: usize, k2: usize) -> usize {
    debug_assert!(k <= k2);
    k * d - k * (k + 1) / 2 + k2
}

pub fn hessian_g_flat(
    prob: &SmotProblem,
    z: &[f64],
    mode: HessianMode,
) -> Result<SparseSymMatrix, PotentialError> {
    let (n, d) = (prob.n, prob.d);
    let eta = prob.eta;
    let lp = log_plan_flat(prob, z);
    let sums = plan_sums(prob, &lp)?;
    let slacks = slack_values(prob, z)?;
    let pvv = plan_vv(prob, &sums.plan);

    let cross = match mode {
        HessianMode::Exact => sums.plan.clone(),
        HessianMode::Sparsified(rho) => {
            assert!(rho > 0.0 && rho <= 1.0, "retention fraction out of range");
            let k = ((rho * (n * n) as f64).ceil() as usize).clamp(1, n * n);
            let top = top_k_threshold(&sums.plan, k).expect("k validated");
            let mut m = DenseMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    if top.mask[i * n + j] {
                        m.set(i, j, sums.plan.get(i, j));
                    }
                }
            }
            m
        }
    };

    let dim = SmotDual::flat_dim(n, d);
    let mut h = SparseSymMatrix::with_capacity(dim, (1 + d) * n * n + 3 * n * d + 2 * n);
    for i in 0..n {
        h.push(i, i, -eta * sums.row_sums[i]);
        for j in 0..n {
            h.push(i, n + j, -eta * cross.get(i, j));
        }
    }
    for k in 0..d {
        for i in 0..n {
            h.push(i, idx_a(n, i, k), -eta * sums.pv[k * n + i]);
        }
    }
    for j in 0..n {
        h.push(n + j, n + j, -eta * sums.col_sums[j]);
    }
    for k in 0..d {
        for j in 0..n {
            let vk = prob.embeddings.get(j, k);
            if vk == 0.0 {
                continue;
            }
            for i in 0..n {
                let p = cross.get(i, j);
                if p != 0.0 {
                    h.push(n + j, idx_a(n, i, k), -eta * vk * p);
                }
            }
        }
    }
    for k in 0..d {
        for k2 in k..d {
            let pair = pair_index(d, k, k2);
            for i in 0..n {
                let mut v = -eta * pvv[pair * n + i];
                if k == k2 {
                    v -= eta * slacks[k * n + i];
                }
                h.push(idx_a(n, i, k), idx_a(n, i, k2), v);
            }
        }
    }
    Ok(h)
}

pub fn hessian_g(
    prob: &SmotProblem,
    z: &SmotDual,
    mode: HessianMode,
) -> Result<SparseSymMatrix, PotentialError> {
    hessian_g_flat(prob, &z.to_flat(), mode)
}

/// Hessian restricted to `(x, A)`: site-diagonal blocks only.
pub fn block_hessian_g_flat(
    prob: &SmotProblem,
    z: &[f64],
) -> Result<SparseSymMatrix, PotentialError> {
    let (n, d) = (prob.n, prob.d);
    let eta = prob.eta;
    let lp = log_plan_flat(prob, z);
    let sums = plan_sums(prob, &lp)?;
    let slacks = slack_values(prob, z)?;
    let pvv = plan_vv(prob, &sums.plan);

    let ba = |i: usize, k: usize| n + k * n + i;
    let dim = n + n * d;
    let mut h = SparseSymMatrix::with_capacity(dim, n * (1 + 2 * d));
    for i in 0..n {
        h.push(i, i, -eta * sums.row_sums[i]);
    }
    for k in 0..d {
        for i in 0..n {
            h.push(i, ba(i, k), -eta * sums.pv[k * n + i]);
        }
    }
    for k in 0..d {
        for k2 in k..d {
            let pair = pair_index(d, k, k2);
            for i in 0..n {
                let mut v = -eta * pvv[pair * n + i];
                if k == k2 {
                    v -= eta * slacks[k * n + i];
                }
                h.push(ba(i, k), ba(i, k2), v);
            }
        }
    }
    Ok(h)
}

/// Recovers `(P, S)` from the duals; at a maximizer `S = PV - W >= 0`.
pub fn recover_primal_smot(
    prob: &SmotProblem,
    z: &SmotDual,
) -> Result<(DenseMatrix, DenseMatrix), PotentialError> {
    let zf = z.to_flat();
    let lp = log_plan_flat(prob, &zf);
    let sums = plan_sums(prob, &lp)?;
    let slacks = slack_values(prob, &zf)?;
    let s = DenseMatrix::from_fn(prob.n, prob.d, |i, k| slacks[k * prob.n + i]);
    Ok((sums.plan, s))
}

pub struct SmotPotential<'a> {
    prob: &'a SmotProblem,
}

impl<'a> SmotPotential<'a> {
    pub fn new(prob: &'a SmotProblem) -> Self {
        Self { prob }
    }

    pub fn problem(&self) -> &SmotProblem {
        self.prob
    }
}

impl DualPotential for SmotPotential<'_> {
    fn dim(&self) -> usize {
        SmotDual::flat_dim(self.prob.n, self.prob.d)
    }

    fn eval(&self, z: &[f64]) -> Result<f64, PotentialError> {
        eval_g_flat(self.prob, z)
    }

    fn grad(&self, z: &[f64]) -> Result<Vec<f64>, PotentialError> {
        grad_g_flat(self.prob, z)
    }
}

impl EntropicDual for SmotPotential<'_> {
    fn sites(&self) -> usize {
        self.prob.n
    }

    fn constraint_dim(&self) -> usize {
        self.prob.d
    }

    fn eta(&self) -> f64 {
        self.prob.eta
    }

    fn target_weights(&self) -> &[f64] {
        &self.prob.target_weights
    }

    fn log_plan(&self, z: &[f64]) -> DenseMatrix {
        log_plan_flat(self.prob, z)
    }

    fn block_hessian(&self, z: &[f64]) -> Result<SparseSymMatrix, PotentialError> {
        block_hessian_g_flat(self.prob, z)
    }

    fn full_hessian(&self, z: &[f64], mode: HessianMode) -> Result<SparseSymMatrix, PotentialError> {
        hessian_g_flat(self.prob, z, mode)
    }
}
