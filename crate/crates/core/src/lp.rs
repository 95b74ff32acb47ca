//! Desk-scale linear programming oracle: a dense two-phase simplex with
//! Bland's rule, standard-form assembly for both constraint families, an
//! exhaustive basic-solution enumerator for cross-checking, and the
//! regularization-decay probe.

use crate::dual::inf_norm;
use crate::mot_dual::MotPotential;
use crate::numerics::DenseMatrix;
use crate::problem::MotProblem;
use crate::problem::SmotProblem;
use crate::sinkhorn::{SolveStatus, SolverError};
use crate::sns::{run_sns, SnsConfig};
use crate::trace::Tracer;
use crate::warm::{warm_init_mot, EtaSchedule};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Oracle scale cap: beyond this the dense tableau is the wrong tool.
pub const MAX_ORACLE_SITES: usize = 16;

const PIVOT_TOL: f64 = 1e-10;
const COST_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("oracle limited to n <= {MAX_ORACLE_SITES}, got {0}")]
    TooLarge(usize),
    #[error("simplex exceeded {0} pivots")]
    PivotLimit(usize),
    #[error("optimal basis violates constraints by {0:e}")]
    CertificateFailure(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// `min c^T x` subject to `A x = b`, `x >= 0`.
#[derive(Clone, Debug)]
pub struct StandardLp {
    pub a: DenseMatrix,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SimplexSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Reduced costs of every column at the final basis.
    pub reduced_costs: Vec<f64>,
    /// Dual multipliers for the original rows (zero on dropped redundant
    /// rows).
    pub dual: Vec<f64>,
}

struct Tableau {
    rows: Vec<Vec<f64>>, // coefficient rows
    rhs: Vec<f64>,
    basis: Vec<usize>,
    obj: Vec<f64>, // reduced-cost row
}

impl Tableau {
    fn pivot(&mut self, r: usize, j: usize) {
        let piv = self.rows[r][j];
        let inv = 1.0 / piv;
        for v in &mut self.rows[r] {
            *v *= inv;
        }
        self.rhs[r] *= inv;
        self.rows[r][j] = 1.0; // exact

        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r];
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let factor = self.rows[i][j];
            if factor != 0.0 {
                for (v, p) in self.rows[i].iter_mut().zip(&pivot_row) {
                    *v -= factor * p;
                }
                self.rows[i][j] = 0.0;
                self.rhs[i] -= factor * pivot_rhs;
            }
        }
        let factor = self.obj[j];
        if factor != 0.0 {
            for (v, p) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= factor * p;
            }
            self.obj[j] = 0.0;
        }
        self.basis[r] = j;
    }

    /// Bland's rule: enter the lowest-index improving column, leave by the
    /// minimum ratio with ties broken toward the lowest basic index.
    fn bland_step(&mut self, ncols: usize) -> Result<bool, LpStatus> {
        let mut entering = None;
        for j in 0..ncols {
            if self.obj[j] < -COST_TOL {
                entering = Some(j);
                break;
            }
        }
        let Some(j) = entering else {
            return Ok(false); // optimal
        };
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..self.rows.len() {
            let a = self.rows[r][j];
            if a > PIVOT_TOL {
                let ratio = self.rhs[r] / a;
                match leave {
                    None => leave = Some((r, ratio)),
                    Some((br, bratio)) => {
                        if ratio < bratio - PIVOT_TOL
                            || ((ratio - bratio).abs() <= PIVOT_TOL
                                && self.basis[r] < self.basis[br])
                        {
                            leave = Some((r, ratio));
                        }
                    }
                }
            }
        }
        match leave {
            Some((r, _)) => {
                self.pivot(r, j);
                Ok(true)
            }
            None => Err(LpStatus::Unbounded),
        }
    }
}

/// Two-phase dense simplex with Bland's anti-cycling rule.
pub fn simplex_bland(lp: &StandardLp) -> Result<SimplexSolution, LpError> {
    let m = lp.b.len();
    let nv = lp.c.len();
    assert_eq!(lp.a.rows(), m);
    assert_eq!(lp.a.cols(), nv);

    // Rows enter phase 1 with nonnegative right-hand sides.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for i in 0..m {
        let mut row: Vec<f64> = lp.a.row(i).to_vec();
        let mut bi = lp.b[i];
        if bi < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
            bi = -bi;
        }
        row.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
        rows.push(row);
        rhs.push(bi);
    }

    // Phase 1: drive the artificial basis out.
    let total = nv + m;
    let mut obj = vec![0.0; total];
    for row in &rows {
        for j in 0..total {
            obj[j] -= row[j];
        }
    }
    let mut t = Tableau {
        rows,
        rhs,
        basis: (nv..total).collect(),
        obj,
    };
    let pivot_cap = 50_000 + 200 * total;
    let mut pivots = 0;
    loop {
        match t.bland_step(total) {
            Ok(true) => {
                pivots += 1;
                if pivots > pivot_cap {
                    return Err(LpError::PivotLimit(pivot_cap));
                }
            }
            Ok(false) => break,
            Err(_) => break, // phase 1 is bounded below by zero
        }
    }
    let phase1: f64 = t
        .basis
        .iter()
        .zip(&t.rhs)
        .map(|(&bv, &b)| if bv >= nv { b } else { 0.0 })
        .sum();
    if phase1 > FEAS_TOL {
        return Ok(SimplexSolution {
            status: LpStatus::Infeasible,
            x: vec![0.0; nv],
            objective: f64::INFINITY,
            reduced_costs: vec![0.0; nv],
            dual: vec![0.0; m],
        });
    }

    // Remove artificials still basic at zero: pivot them out where a
    // structural column is available, otherwise the row is redundant.
    let mut keep = vec![true; t.rows.len()];
    for r in 0..t.rows.len() {
        if t.basis[r] >= nv {
            let mut found = None;
            for j in 0..nv {
                if t.rows[r][j].abs() > PIVOT_TOL {
                    found = Some(j);
                    break;
                }
            }
            match found {
                Some(j) => t.pivot(r, j),
                None => keep[r] = false,
            }
        }
    }
    {
        let mut filtered_rows = Vec::new();
        let mut filtered_rhs = Vec::new();
        let mut filtered_basis = Vec::new();
        for r in 0..t.rows.len() {
            if keep[r] {
                // Drop artificial columns entirely.
                let mut row = std::mem::take(&mut t.rows[r]);
                row.truncate(nv);
                filtered_rows.push(row);
                filtered_rhs.push(t.rhs[r]);
                filtered_basis.push(t.basis[r]);
            }
        }
        t.rows = filtered_rows;
        t.rhs = filtered_rhs;
        t.basis = filtered_basis;
    }

    // Phase 2 pricing from the real costs.
    let mut obj = lp.c.clone();
    for (r, row) in t.rows.iter().enumerate() {
        let cb = lp.c[t.basis[r]];
        if cb != 0.0 {
            for j in 0..nv {
                obj[j] -= cb * row[j];
            }
        }
    }
    for (r, _) in t.rows.iter().enumerate() {
        obj[t.basis[r]] = 0.0;
        let _ = r;
    }
    t.obj = obj;

    let mut pivots = 0;
    loop {
        match t.bland_step(nv) {
            Ok(true) => {
                pivots += 1;
                if pivots > pivot_cap {
                    return Err(LpError::PivotLimit(pivot_cap));
                }
            }
            Ok(false) => break,
            Err(LpStatus::Unbounded) => {
                return Ok(SimplexSolution {
                    status: LpStatus::Unbounded,
                    x: vec![0.0; nv],
                    objective: f64::NEG_INFINITY,
                    reduced_costs: vec![0.0; nv],
                    dual: vec![0.0; m],
                });
            }
            Err(_) => unreachable!(),
        }
    }

    let mut x = vec![0.0; nv];
    for (r, &bv) in t.basis.iter().enumerate() {
        x[bv] = t.rhs[r].max(0.0);
    }
    let objective: f64 = x.iter().zip(&lp.c).map(|(xi, ci)| xi * ci).sum();

    // Dual multipliers: the basis prices out exactly, so `B^T y = c_B` is
    // consistent over the original rows (underdetermined when rows were
    // redundant); take the minimum-norm solution.
    let mk = t.basis.len();
    let mut bt = DMatrix::zeros(mk, m);
    for (col, &bv) in t.basis.iter().enumerate() {
        for i in 0..m {
            bt[(col, i)] = lp.a.get(i, bv);
        }
    }
    let cb = DVector::from_iterator(mk, t.basis.iter().map(|&bv| lp.c[bv]));
    let dual: Vec<f64> = match bt.svd(true, true).solve(&cb, 1e-11) {
        Ok(y) => y.iter().copied().collect(),
        Err(_) => vec![0.0; m],
    };
    let mut reduced_costs = lp.c.clone();
    for j in 0..nv {
        for i in 0..m {
            reduced_costs[j] -= dual[i] * lp.a.get(i, j);
        }
    }

    Ok(SimplexSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        reduced_costs,
        dual,
    })
}

/// Exhaustively scans basic solutions of a standard-form LP and returns
/// the best feasible one. Reference oracle; only viable for tiny systems.
pub fn enumerate_optimal(lp: &StandardLp) -> Option<(f64, Vec<f64>)> {
    let m = lp.b.len();
    let nv = lp.c.len();

    // Row-reduce [A | b] to find an independent row subset.
    let mut aug = DMatrix::zeros(m, nv + 1);
    for i in 0..m {
        for j in 0..nv {
            aug[(i, j)] = lp.a.get(i, j);
        }
        aug[(i, nv)] = lp.b[i];
    }
    let mut pivot_rows = Vec::new();
    let mut used = vec![false; m];
    for col in 0..nv {
        let mut best: Option<(usize, f64)> = None;
        for r in 0..m {
            if !used[r] {
                let v = aug[(r, col)].abs();
                if v > 1e-11 && best.map(|(_, bv)| v > bv).unwrap_or(true) {
                    best = Some((r, v));
                }
            }
        }
        if let Some((r, _)) = best {
            used[r] = true;
            pivot_rows.push(r);
            let piv = aug[(r, col)];
            for r2 in 0..m {
                if r2 != r {
                    let f = aug[(r2, col)] / piv;
                    if f != 0.0 {
                        for j in 0..=nv {
                            let v = aug[(r, j)];
                            aug[(r2, j)] -= f * v;
                        }
                    }
                }
            }
        }
    }
    // Inconsistent leftover rows mean the system is infeasible.
    for r in 0..m {
        if !used[r] && aug[(r, nv)].abs() > 1e-8 {
            return None;
        }
    }
    let rank = pivot_rows.len();
    let rows: Vec<usize> = pivot_rows;

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut combo: Vec<usize> = (0..rank).collect();
    loop {
        // Solve the square basic system for this column choice.
        let mut bmat = DMatrix::zeros(rank, rank);
        for (ri, &orig) in rows.iter().enumerate() {
            for (ci, &col) in combo.iter().enumerate() {
                bmat[(ri, ci)] = lp.a.get(orig, col);
            }
        }
        let rhs = DVector::from_iterator(rank, rows.iter().map(|&r| lp.b[r]));
        let lu = bmat.full_piv_lu();
        if let Some(xb) = lu.solve(&rhs) {
            if xb.iter().all(|&v| v >= -FEAS_TOL && v.is_finite()) {
                let mut x = vec![0.0; nv];
                let mut obj = 0.0;
                for (ci, &col) in combo.iter().enumerate() {
                    x[col] = xb[ci].max(0.0);
                    obj += lp.c[col] * x[col];
                }
                // Verify against all original rows (guards near-singular
                // bases whose solve drifted).
                let mut worst: f64 = 0.0;
                for i in 0..m {
                    let lhs: f64 = (0..nv).map(|j| lp.a.get(i, j) * x[j]).sum();
                    worst = worst.max((lhs - lp.b[i]).abs());
                }
                if worst <= 1e-7 && best.as_ref().map(|(b, _)| obj < *b).unwrap_or(true) {
                    best = Some((obj, x));
                }
            }
        }

        // Next combination in lexicographic order.
        let mut idx = rank;
        loop {
            if idx == 0 {
                return best;
            }
            idx -= 1;
            if combo[idx] != idx + nv - rank {
                combo[idx] += 1;
                for j in idx + 1..rank {
                    combo[j] = combo[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// LP oracle result for the transport problems.
#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub plan: Option<DenseMatrix>,
    /// Violation slack block (relaxed-equality problem only).
    pub slack: Option<DenseMatrix>,
    pub objective: f64,
    pub simplex: SimplexSolution,
}

/// Standard form of the relaxed-equality problem: variables
/// `[P, E, q, s, t]` with marginal rows, the budget row
/// `sum(E) + q = eps`, and the two-sided violation rows.
pub fn mot_standard_form(prob: &MotProblem) -> StandardLp {
    let (n, d) = (prob.n, prob.d);
    let nv = n * n + 3 * n * d + 1;
    let m = 2 * n + 1 + 2 * n * d;
    let p_at = |i: usize, j: usize| i * n + j;
    let e_at = |i: usize, k: usize| n * n + i * d + k;
    let q_at = n * n + n * d;
    let s_at = |i: usize, k: usize| n * n + n * d + 1 + i * d + k;
    let t_at = |i: usize, k: usize| n * n + 2 * n * d + 1 + i * d + k;

    let mut a = DenseMatrix::zeros(m, nv);
    let mut b = vec![0.0; m];
    let mut row = 0;
    for i in 0..n {
        for j in 0..n {
            a.set(row, p_at(i, j), 1.0);
        }
        b[row] = prob.source_weights[i];
        row += 1;
    }
    for j in 0..n {
        for i in 0..n {
            a.set(row, p_at(i, j), 1.0);
        }
        b[row] = prob.target_weights[j];
        row += 1;
    }
    for i in 0..n {
        for k in 0..d {
            a.set(row, e_at(i, k), 1.0);
        }
    }
    a.set(row, q_at, 1.0);
    b[row] = prob.epsilon;
    row += 1;
    for i in 0..n {
        for k in 0..d {
            for j in 0..n {
                a.set(row, p_at(i, j), prob.embeddings.get(j, k));
            }
            a.set(row, e_at(i, k), -1.0);
            a.set(row, s_at(i, k), 1.0);
            b[row] = prob.targets.get(i, k);
            row += 1;
        }
    }
    for i in 0..n {
        for k in 0..d {
            for j in 0..n {
                a.set(row, p_at(i, j), prob.embeddings.get(j, k));
            }
            a.set(row, e_at(i, k), 1.0);
            a.set(row, t_at(i, k), -1.0);
            b[row] = prob.targets.get(i, k);
            row += 1;
        }
    }
    debug_assert_eq!(row, m);

    let mut c = vec![0.0; nv];
    for i in 0..n {
        for j in 0..n {
            c[p_at(i, j)] = prob.cost.get(i, j);
        }
    }
    StandardLp { a, b, c }
}

/// Standard form of the one-sided problem: variables `[P, surplus]`.
pub fn smot_standard_form(prob: &SmotProblem) -> StandardLp {
    let (n, d) = (prob.n, prob.d);
    let nv = n * n + n * d;
    let m = 2 * n + n * d;
    let p_at = |i: usize, j: usize| i * n + j;
    let t_at = |i: usize, k: usize| n * n + i * d + k;

    let mut a = DenseMatrix::zeros(m, nv);
    let mut b = vec![0.0; m];
    let mut row = 0;
    for i in 0..n {
        for j in 0..n {
            a.set(row, p_at(i, j), 1.0);
        }
        b[row] = prob.source_weights[i];
        row += 1;
    }
    for j in 0..n {
        for i in 0..n {
            a.set(row, p_at(i, j), 1.0);
        }
        b[row] = prob.target_weights[j];
        row += 1;
    }
    for i in 0..n {
        for k in 0..d {
            for j in 0..n {
                a.set(row, p_at(i, j), prob.embeddings.get(j, k));
            }
            a.set(row, t_at(i, k), -1.0);
            b[row] = prob.targets.get(i, k);
            row += 1;
        }
    }
    debug_assert_eq!(row, m);

    let mut c = vec![0.0; nv];
    for i in 0..n {
        for j in 0..n {
            c[p_at(i, j)] = prob.cost.get(i, j);
        }
    }
    StandardLp { a, b, c }
}

fn extract_plan(x: &[f64], n: usize) -> DenseMatrix {
    DenseMatrix::from_fn(n, n, |i, j| x[i * n + j])
}

fn check_constraints(lp: &StandardLp, x: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..lp.b.len() {
        let lhs: f64 = (0..lp.c.len()).map(|j| lp.a.get(i, j) * x[j]).sum();
        worst = worst.max((lhs - lp.b[i]).abs());
    }
    for &v in x {
        worst = worst.max((-v).max(0.0));
    }
    worst
}

/// Solves the relaxed-equality LP exactly at desk scale.
pub fn solve_lp_mot(prob: &MotProblem) -> Result<LpSolution, LpError> {
    if prob.n > MAX_ORACLE_SITES {
        return Err(LpError::TooLarge(prob.n));
    }
    let lp = mot_standard_form(prob);
    let sol = simplex_bland(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Ok(LpSolution {
            status: sol.status,
            plan: None,
            slack: None,
            objective: sol.objective,
            simplex: sol,
        });
    }
    let worst = check_constraints(&lp, &sol.x);
    if worst > FEAS_TOL {
        return Err(LpError::CertificateFailure(worst));
    }
    let (n, d) = (prob.n, prob.d);
    let plan = extract_plan(&sol.x, n);
    let slack = DenseMatrix::from_fn(n, d, |i, k| sol.x[n * n + i * d + k]);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        plan: Some(plan),
        slack: Some(slack),
        objective: sol.objective,
        simplex: sol,
    })
}

/// Solves the one-sided LP exactly at desk scale.
pub fn solve_lp_smot(prob: &SmotProblem) -> Result<LpSolution, LpError> {
    if prob.n > MAX_ORACLE_SITES {
        return Err(LpError::TooLarge(prob.n));
    }
    let lp = smot_standard_form(prob);
    let sol = simplex_bland(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Ok(LpSolution {
            status: sol.status,
            plan: None,
            slack: None,
            objective: sol.objective,
            simplex: sol,
        });
    }
    let worst = check_constraints(&lp, &sol.x);
    if worst > FEAS_TOL {
        return Err(LpError::CertificateFailure(worst));
    }
    let plan = extract_plan(&sol.x, prob.n);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        plan: Some(plan),
        slack: None,
        objective: sol.objective,
        simplex: sol,
    })
}

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("probe requires n <= 8, got {0}")]
    TooLarge(usize),
    #[error("linear program is {0:?}")]
    NotSolvable(LpStatus),
    #[error("linear program optimum is not unique (plans differ by {0:e} under jitter)")]
    OracleAmbiguity(f64),
    #[error("entropic solve at eta = {eta} ended {status}")]
    SolverStalled { eta: f64, status: SolveStatus },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Potential(#[from] crate::dual::PotentialError),
}

/// One measurement of the regularization path.
#[derive(Clone, Copy, Debug)]
pub struct DecayPoint {
    pub eta: f64,
    pub gap: f64,
}

/// For each regularization strength, solves the entropic problem to high
/// accuracy with full-retention Newton and reports the l1 gap to the LP
/// optimum. Requires a unique LP solution, checked by re-solving under a
/// 1e-9 cost jitter.
pub fn theorem1_decay_probe(
    template: &MotProblem,
    etas: &[f64],
) -> Result<Vec<DecayPoint>, ProbeError> {
    if template.n > 8 {
        return Err(ProbeError::TooLarge(template.n));
    }
    let lp_sol = solve_lp_mot(template)?;
    if lp_sol.status != LpStatus::Optimal {
        return Err(ProbeError::NotSolvable(lp_sol.status));
    }
    let reference = lp_sol.plan.expect("optimal solution carries a plan");

    // Uniqueness check: a tiny generic cost perturbation must not move the
    // optimal vertex.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut jittered = template.clone();
    let jitter =
        DenseMatrix::from_fn(template.n, template.n, |_, _| 1e-9 * (2.0 * rng.gen::<f64>() - 1.0));
    jittered.cost = DenseMatrix::from_fn(template.n, template.n, |i, j| {
        template.cost.get(i, j) + jitter.get(i, j)
    });
    let lp_jit = solve_lp_mot(&jittered)?;
    if lp_jit.status != LpStatus::Optimal {
        return Err(ProbeError::NotSolvable(lp_jit.status));
    }
    let moved = lp_jit
        .plan
        .expect("optimal solution carries a plan")
        .l1_distance(&reference);
    if moved > 1e-4 {
        return Err(ProbeError::OracleAmbiguity(moved));
    }

    let mut out = Vec::with_capacity(etas.len());
    for &eta in etas {
        let prob = template.with_eta(eta);
        let schedule = EtaSchedule::new(12.5_f64.min(eta), eta, 5);
        let z0 = warm_init_mot(&prob, &schedule)?;
        let pot = MotPotential::new(&prob);
        let cfg = SnsConfig::new(10, 120, 1e-13).with_rho(1.0);
        let mut tracer = Tracer::disabled();
        let res = run_sns(&pot, &z0, &cfg, &mut tracer)?;
        if res.status != SolveStatus::Converged {
            // Accept numerically stationary iterates whose gradient is close
            // to the target; everything else is a hard failure.
            let g = crate::mot_dual::grad_f_flat(&prob, &res.z)?;
            if inf_norm(&g) > 1e-9 {
                return Err(ProbeError::SolverStalled {
                    eta,
                    status: res.status,
                });
            }
        }
        let plan = crate::dual::EntropicDual::plan(&pot, &res.z)?;
        out.push(DecayPoint {
            eta,
            gap: plan.l1_distance(&reference),
        });
    }
    Ok(out)
}

/// Template for the decay probe: uniform marginals, seeded uniform cost,
/// and constraint targets consistent with the independent coupling so that
/// any violation budget is feasible.
pub fn decay_template(
    n: usize,
    seed: u64,
    epsilon: f64,
) -> Result<MotProblem, crate::problem::ProblemError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cost = DenseMatrix::from_fn(n, n, |_, _| rng.gen::<f64>());
    let uniform = vec![1.0 / n as f64; n];
    let v = DenseMatrix::from_fn(n, 1, |_, _| rng.gen::<f64>() - 0.5);
    let vbar: f64 = (0..n).map(|j| uniform[j] * v.get(j, 0)).sum();
    let w = DenseMatrix::from_fn(n, 1, |i, _| uniform[i] * vbar);
    MotProblem::new(cost, uniform.clone(), uniform, v, w, epsilon, 1.0)
}

/// Least-squares affine fit of `log(gap)` against `eta`; returns
/// `(slope, r_squared)`.
pub fn log_gap_fit(points: &[DecayPoint]) -> (f64, f64) {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.eta).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.gap.max(1e-300).ln()).collect();
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let p = intercept + slope * x;
            (y - p) * (y - p)
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - ybar) * (y - ybar)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    (slope, r2)
}
