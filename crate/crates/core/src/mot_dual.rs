//! Dual potential of the relaxed-equality transport problem: value,
//! gradient, exact and sparsified block Hessians, and primal recovery.
//!
//! Variables are `(x, y, A, B, u)` with `x, y` the marginal potentials,
//! `A, B` the per-site constraint potentials, and `u` the budget potential.
//! The flat layout is `(x, y, a-columns, b-columns, u)`, shared with the
//! solvers and with the one-sided variant.

use crate::dual::{
    exp_guard, DualPotential, EntropicDual, HessianMode, PotentialError, TermClass,
};
use crate::numerics::{
    log_sum_exp_all, top_k_threshold, DenseMatrix, SparseSymMatrix, EXP_CLAMP,
};
use crate::problem::MotProblem;

/// Dual variables in structured form.
#[derive(Clone, Debug, PartialEq)]
pub struct MotDual {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub a: DenseMatrix,
    pub b: DenseMatrix,
    pub u: f64,
}

impl MotDual {
    pub fn zeros(n: usize, d: usize) -> Self {
        Self {
            x: vec![0.0; n],
            y: vec![0.0; n],
            a: DenseMatrix::zeros(n, d),
            b: DenseMatrix::zeros(n, d),
            u: 0.0,
        }
    }

    pub fn flat_dim(n: usize, d: usize) -> usize {
        2 * n + 2 * n * d + 1
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
        for k in 0..d {
            for i in 0..n {
                z.push(self.b.get(i, k));
            }
        }
        z.push(self.u);
        z
    }

    pub fn from_flat(z: &[f64], n: usize, d: usize) -> Self {
        assert_eq!(z.len(), Self::flat_dim(n, d));
        let a = DenseMatrix::from_fn(n, d, |i, k| z[2 * n + k * n + i]);
        let b = DenseMatrix::from_fn(n, d, |i, k| z[2 * n + n * d + k * n + i]);
        Self {
            x: z[..n].to_vec(),
            y: z[n..2 * n].to_vec(),
            a,
            b,
            u: z[2 * n + 2 * n * d],
        }
    }

    pub fn all_finite(&self) -> bool {
        self.x.iter().chain(self.y.iter()).all(|v| v.is_finite())
            && self.a.all_finite()
            && self.b.all_finite()
            && self.u.is_finite()
    }
}

/// Recovered primal block: plan plus the slack variables of the entropic
/// program.
#[derive(Clone, Debug)]
pub struct PrimalRecovery {
    pub plan: DenseMatrix,
    pub s: DenseMatrix,
    pub t: DenseMatrix,
    pub e: DenseMatrix,
    pub q: f64,
}

#[inline]
fn idx_a(n: usize, i: usize, k: usize) -> usize {
    2 * n + k * n + i
}

#[inline]
fn idx_b(n: usize, d: usize, i: usize, k: usize) -> usize {
    2 * n + n * d + k * n + i
}

#[inline]
fn idx_u(n: usize, d: usize) -> usize {
    2 * n + 2 * n * d
}

/// Log-domain intermediate plan
/// `eta (-C + (A + B) V^T + x 1^T + 1 y^T) - 1`.
pub fn log_plan_flat(prob: &MotProblem, z: &[f64]) -> DenseMatrix {
    let (n, d) = (prob.n, prob.d);
    let eta = prob.eta;
    let mut out = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let xi = z[i];
        for j in 0..n {
            let mut s = -prob.cost.get(i, j) + xi + z[n + j];
            for k in 0..d {
                s += (z[idx_a(n, i, k)] + z[idx_b(n, d, i, k)]) * prob.embeddings.get(j, k);
            }
            out.set(i, j, eta * s - 1.0);
        }
    }
    out
}

pub fn log_plan(prob: &MotProblem, z: &MotDual) -> DenseMatrix {
    log_plan_flat(prob, &z.to_flat())
}

struct SlackValues {
    s: Vec<f64>, // n*d, column-major in k
    t: Vec<f64>,
    e: Vec<f64>,
    q: f64,
}

fn slack_values(prob: &MotProblem, z: &[f64]) -> Result<SlackValues, PotentialError> {
    let (n, d) = (prob.n, prob.d);
    let eta = prob.eta;
    let u = z[idx_u(n, d)];
    let mut s = Vec::with_capacity(n * d);
    let mut t = Vec::with_capacity(n * d);
    let mut e = Vec::with_capacity(n * d);
    for k in 0..d {
        for i in 0..n {
            let aik = z[idx_a(n, i, k)];
            let bik = z[idx_b(n, d, i, k)];
            s.push(exp_guard(eta * aik - 1.0, TermClass::SlackS)?);
            t.push(exp_guard(-eta * bik - 1.0, TermClass::SlackT)?);
            e.push(exp_guard(eta * (u - aik + bik) - 1.0, TermClass::SlackE)?);
        }
    }
    let q = exp_guard(eta * u - 1.0, TermClass::SlackQ)?;
    Ok(SlackValues { s, t, e, q })
}

/// Dual objective value; overflow-safe via log-domain reduction of the plan
/// term and guarded exponentials everywhere else.
pub fn eval_f_flat(prob: &MotProblem, z: &[f64]) -> Result<f64, PotentialError> {
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
    let slack_term =
        -(slacks.s.iter().sum::<f64>() + slacks.t.iter().sum::<f64>() + slacks.e.iter().sum::<f64>() + slacks.q)
            / eta;

    let mut linear = 0.0;
    for i in 0..n {
        linear += z[i] * prob.source_weights[i];
        linear += z[n + i] * prob.target_weights[i];
    }
    for k in 0..d {
        for i in 0..n {
            linear += (z[idx_a(n, i, k)] + z[idx_b(n, d, i, k)]) * prob.targets.get(i, k);
        }
    }
    linear += prob.epsilon * z[idx_u(n, d)];

    let f = plan_term + linear + slack_term;
    if f.is_finite() {
        Ok(f)
    } else {
        Err(PotentialError::NonFinite)
    }
}

pub fn eval_f(prob: &MotProblem, z: &MotDual) -> Result<f64, PotentialError> {
    eval_f_flat(prob, &z.to_flat())
}

/// Materializes the plan and its marginal/constraint aggregates.
struct PlanSums {
    plan: DenseMatrix,
    row_sums: Vec<f64>,
    col_sums: Vec<f64>,
    /// `(P V)_{ik}`, column-major in k.
    pv: Vec<f64>,
}

fn plan_sums(prob: &MotProblem, lp: &DenseMatrix) -> Result<PlanSums, PotentialError> {
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

/// Gradient in the flat layout.
pub fn grad_f_flat(prob: &MotProblem, z: &[f64]) -> Result<Vec<f64>, PotentialError> {
    let (n, d) = (prob.n, prob.d);
    let lp = log_plan_flat(prob, z);
    let sums = plan_sums(prob, &lp)?;
    let slacks = slack_values(prob, z)?;
    let mut g = vec![0.0; MotDual::flat_dim(n, d)];
    for i in 0..n {
        g[i] = prob.source_weights[i] - sums.row_sums[i];
        g[n + i] = prob.target_weights[i] - sums.col_sums[i];
    }
    for k in 0..d {
        for i in 0..n {
            let ki = k * n + i;
            let w = prob.targets.get(i, k);
            g[idx_a(n, i, k)] = w - sums.pv[ki] - slacks.s[ki] + slacks.e[ki];
            g[idx_b(n, d, i, k)] = w - sums.pv[ki] + slacks.t[ki] - slacks.e[ki];
        }
    }
    g[idx_u(n, d)] = prob.epsilon - slacks.q - slacks.e.iter().sum::<f64>();
    if g.iter().all(|v| v.is_finite()) {
        Ok(g)
    } else {
        Err(PotentialError::NonFinite)
    }
}

pub fn grad_f(prob: &MotProblem, z: &MotDual) -> Result<MotDual, PotentialError> {
    let g = grad_f_flat(prob, &z.to_flat())?;
    Ok(MotDual::from_flat(&g, prob.n, prob.d))
}

/// `sum_j P_ij v_jk v_jk'` for every site and every (k, k') pair with
/// k <= k'; indexed by `pair(k, k') * n + i`.
fn plan_vv(prob: &MotProblem, plan: &DenseMatrix) -> Vec<f64> {
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
    // Upper-triangle pair order: (0,0), (0,1), ..., (0,d-1), (1,1), ...
    debug_assert!(k <= k2);
    k * d - k * (k + 1) / 2 + k2
}

/// Exact or plan-sparsified Hessian over the flat variable ordering.
pub fn hessian_f_flat(
    prob: &MotProblem,
    z: &[f64],
    mode: HessianMode,
) -> Result<SparseSymMatrix, PotentialError> {
    let (n, d) = (prob.n, prob.d);
    let eta = prob.eta;
    let lp = log_plan_flat(prob, z);
    let sums = plan_sums(prob, &lp)?;
    let slacks = slack_values(prob, z)?;
    let pvv = plan_vv(prob, &sums.plan);

    // Cross blocks use the sparsified plan; everything else uses the full one.
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

    let dim = MotDual::flat_dim(n, d);
    let mut h = SparseSymMatrix::with_capacity(dim, (1 + 2 * d) * n * n + 6 * n * d + 2 * n + 1);

    // x diagonal and x-y cross block.
    for i in 0..n {
        h.push(i, i, -eta * sums.row_sums[i]);
        for j in 0..n {
            h.push(i, n + j, -eta * cross.get(i, j));
        }
    }
    // x-a and x-b diagonal couplings (full plan).
    for k in 0..d {
        for i in 0..n {
            let pv = sums.pv[k * n + i];
            h.push(i, idx_a(n, i, k), -eta * pv);
            h.push(i, idx_b(n, d, i, k), -eta * pv);
        }
    }
    // y diagonal and y-a / y-b cross blocks (sparsified plan).
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
                    h.push(n + j, idx_b(n, d, i, k), -eta * vk * p);
                }
            }
        }
    }
    // a-a, a-b, b-b site-diagonal blocks.
    for k in 0..d {
        for k2 in k..d {
            let pair = pair_index(d, k, k2);
            for i in 0..n {
                let base = -eta * pvv[pair * n + i];
                let ki = k * n + i;
                if k == k2 {
                    h.push(
                        idx_a(n, i, k),
                        idx_a(n, i, k2),
                        base - eta * (slacks.s[ki] + slacks.e[ki]),
                    );
                    h.push(
                        idx_b(n, d, i, k),
                        idx_b(n, d, i, k2),
                        base - eta * (slacks.t[ki] + slacks.e[ki]),
                    );
                } else {
                    h.push(idx_a(n, i, k), idx_a(n, i, k2), base);
                    h.push(idx_b(n, d, i, k), idx_b(n, d, i, k2), base);
                }
            }
        }
    }
    // a-b blocks over every (k, k') pair; the e-term appears only at k = k'.
    for k in 0..d {
        for k2 in 0..d {
            let pair = pair_index(d, k.min(k2), k.max(k2));
            for i in 0..n {
                let mut v = -eta * pvv[pair * n + i];
                if k == k2 {
                    v += eta * slacks.e[k * n + i];
                }
                h.push(idx_a(n, i, k), idx_b(n, d, i, k2), v);
            }
        }
    }
    // Couplings to u.
    let iu = idx_u(n, d);
    for k in 0..d {
        for i in 0..n {
            let e = slacks.e[k * n + i];
            h.push(idx_a(n, i, k), iu, eta * e);
            h.push(idx_b(n, d, i, k), iu, -eta * e);
        }
    }
    h.push(iu, iu, -eta * (slacks.q + slacks.e.iter().sum::<f64>()));
    Ok(h)
}

pub fn hessian_f(
    prob: &MotProblem,
    z: &MotDual,
    mode: HessianMode,
) -> Result<SparseSymMatrix, PotentialError> {
    hessian_f_flat(prob, &z.to_flat(), mode)
}

/// Hessian restricted to the alternating-maximization block `(x, A, B, u)`.
/// With `y` excluded it has only site-diagonal and border couplings:
/// `O(n d^2)` nonzeros.
pub fn block_hessian_f_flat(
    prob: &MotProblem,
    z: &[f64],
) -> Result<SparseSymMatrix, PotentialError> {
    let (n, d) = (prob.n, prob.d);
    let eta = prob.eta;
    let lp = log_plan_flat(prob, z);
    let sums = plan_sums(prob, &lp)?;
    let slacks = slack_values(prob, z)?;
    let pvv = plan_vv(prob, &sums.plan);

    // Block layout: x at 0..n, a-columns, b-columns, u last.
    let ba = |i: usize, k: usize| n + k * n + i;
    let bb = |i: usize, k: usize| n + n * d + k * n + i;
    let bu = n + 2 * n * d;
    let dim = bu + 1;
    let mut h = SparseSymMatrix::with_capacity(dim, n * (2 + 6 * d) + 1);

    for i in 0..n {
        h.push(i, i, -eta * sums.row_sums[i]);
    }
    for k in 0..d {
        for i in 0..n {
            let pv = sums.pv[k * n + i];
            h.push(i, ba(i, k), -eta * pv);
            h.push(i, bb(i, k), -eta * pv);
        }
    }
    for k in 0..d {
        for k2 in k..d {
            let pair = pair_index(d, k, k2);
            for i in 0..n {
                let base = -eta * pvv[pair * n + i];
                let ki = k * n + i;
                if k == k2 {
                    h.push(ba(i, k), ba(i, k2), base - eta * (slacks.s[ki] + slacks.e[ki]));
                    h.push(bb(i, k), bb(i, k2), base - eta * (slacks.t[ki] + slacks.e[ki]));
                } else {
                    h.push(ba(i, k), ba(i, k2), base);
                    h.push(bb(i, k), bb(i, k2), base);
                }
            }
        }
    }
    for k in 0..d {
        for k2 in 0..d {
            let pair = pair_index(d, k.min(k2), k.max(k2));
            for i in 0..n {
                let mut v = -eta * pvv[pair * n + i];
                if k == k2 {
                    v += eta * slacks.e[k * n + i];
                }
                h.push(ba(i, k), bb(i, k2), v);
            }
        }
    }
    for k in 0..d {
        for i in 0..n {
            let e = slacks.e[k * n + i];
            h.push(ba(i, k), bu, eta * e);
            h.push(bb(i, k), bu, -eta * e);
        }
    }
    h.push(bu, bu, -eta * (slacks.q + slacks.e.iter().sum::<f64>()));
    Ok(h)
}

/// Recovers the primal block from the duals: the plan plus the slack
/// variables that are exponentials of the constraint potentials.
pub fn recover_primal(prob: &MotProblem, z: &MotDual) -> Result<PrimalRecovery, PotentialError> {
    let zf = z.to_flat();
    let (n, d) = (prob.n, prob.d);
    let lp = log_plan_flat(prob, &zf);
    let sums = plan_sums(prob, &lp)?;
    let slacks = slack_values(prob, &zf)?;
    let unpack = |v: &[f64]| DenseMatrix::from_fn(n, d, |i, k| v[k * n + i]);
    Ok(PrimalRecovery {
        plan: sums.plan,
        s: unpack(&slacks.s),
        t: unpack(&slacks.t),
        e: unpack(&slacks.e),
        q: slacks.q,
    })
}

fn xlogx(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v * v.ln()
    }
}

/// Entropic primal objective `C . P + H(P, S, T, E, q) / eta`.
pub fn primal_objective(prob: &MotProblem, rec: &PrimalRecovery) -> f64 {
    let cost: f64 = prob
        .cost
        .data()
        .iter()
        .zip(rec.plan.data())
        .map(|(c, p)| c * p)
        .sum();
    let mut entropy: f64 = rec.plan.data().iter().map(|&p| xlogx(p)).sum();
    for m in [&rec.s, &rec.t, &rec.e] {
        entropy += m.data().iter().map(|&v| xlogx(v)).sum::<f64>();
    }
    entropy += xlogx(rec.q);
    cost + entropy / prob.eta
}

/// Potential adapter used by the generic solvers.
pub struct MotPotential<'a> {
    prob: &'a MotProblem,
}

impl<'a> MotPotential<'a> {
    pub fn new(prob: &'a MotProblem) -> Self {
        Self { prob }
    }

    pub fn problem(&self) -> &MotProblem {
        self.prob
    }
}

impl DualPotential for MotPotential<'_> {
    fn dim(&self) -> usize {
        MotDual::flat_dim(self.prob.n, self.prob.d)
    }

    fn eval(&self, z: &[f64]) -> Result<f64, PotentialError> {
        eval_f_flat(self.prob, z)
    }

    fn grad(&self, z: &[f64]) -> Result<Vec<f64>, PotentialError> {
        grad_f_flat(self.prob, z)
    }
}

impl EntropicDual for MotPotential<'_> {
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
        block_hessian_f_flat(self.prob, z)
    }

    fn full_hessian(&self, z: &[f64], mode: HessianMode) -> Result<SparseSymMatrix, PotentialError> {
        hessian_f_flat(self.prob, z, mode)
    }
}

#[cfg(test)]
pub(crate) mod fd {
    //! Finite-difference oracles shared by the consistency tests.

    pub fn fd_gradient(
        f: &dyn Fn(&[f64]) -> f64,
        z: &[f64],
        step: f64,
    ) -> Vec<f64> {
        let mut g = Vec::with_capacity(z.len());
        let mut zp = z.to_vec();
        for i in 0..z.len() {
            let orig = zp[i];
            zp[i] = orig + step;
            let fp = f(&zp);
            zp[i] = orig - step;
            let fm = f(&zp);
            zp[i] = orig;
            g.push((fp - fm) / (2.0 * step));
        }
        g
    }

    pub fn fd_hessian(
        grad: &dyn Fn(&[f64]) -> Vec<f64>,
        z: &[f64],
        step: f64,
    ) -> Vec<Vec<f64>> {
        let dim = z.len();
        let mut h = vec![vec![0.0; dim]; dim];
        let mut zp = z.to_vec();
        for i in 0..dim {
            let orig = zp[i];
            zp[i] = orig + step;
            let gp = grad(&zp);
            zp[i] = orig - step;
            let gm = grad(&zp);
            zp[i] = orig;
            for j in 0..dim {
                h[i][j] = (gp[j] - gm[j]) / (2.0 * step);
            }
        }
        h
    }
}
