//! Shared numeric kernels: dense/sparse matrix carriers, log-domain row
//! reductions, top-k selection, and regularized symmetric linear solves.
//!
//! Everything here is deterministic for fixed inputs: reductions run in a
//! fixed order and the factorizations below do not depend on timing or
//! thread scheduling.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Largest argument fed to `exp`; anything above this would overflow `f64`.
pub const EXP_CLAMP: f64 = 700.0;

/// Regularization ladder for symmetric solves on possibly singular Hessians.
/// Callers escalate through these until a solve passes the residual check.
pub const REG_LADDER: [f64; 4] = [0.0, 1e-12, 1e-9, 1e-6];

/// Relative residual required from [`solve_sym`] before a solution is
/// accepted without escalating the regularizer.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum NumericsError {
    #[error("row {0} has no entry above negative infinity")]
    EmptyRow(usize),
    #[error("k = {k} outside 1..={max}")]
    InvalidK { k: usize, max: usize },
    #[error("system is singular at regularization {reg:e}")]
    SingularSystem { reg: f64 },
}

/// Row-major dense matrix of `f64`. Log-domain matrices may carry `-inf`
/// entries; everything else is expected to be finite.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "dense matrix shape mismatch");
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    /// Builds entry-by-entry from a function of (row, col).
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Entry-wise l1 norm of the difference.
    pub fn l1_distance(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    /// Entry-wise l1 norm.
    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    /// Row sums as a vector.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    /// Column sums as a vector.
    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (j, v) in self.row(i).iter().enumerate() {
                out[j] += v;
            }
        }
        out
    }

    /// `self * v` for a vector of length `cols`.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

fn log_sum_exp(entries: impl Iterator<Item = f64> + Clone) -> Option<f64> {
    let max = entries
        .clone()
        .fold(f64::NEG_INFINITY, |acc, v| if v > acc { v } else { acc });
    if max == f64::NEG_INFINITY {
        return None;
    }
    let sum: f64 = entries.map(|v| (v - max).exp()).sum();
    Some(max + sum.ln())
}

/// Per-row `log(sum_j exp(m_ij))` with max subtraction. Rows whose entries
/// are all equal come out exact; a row of all `-inf` is an error.
pub fn log_sum_exp_rows(m: &DenseMatrix) -> Result<Vec<f64>, NumericsError> {
    (0..m.rows())
        .map(|i| log_sum_exp(m.row(i).iter().copied()).ok_or(NumericsError::EmptyRow(i)))
        .collect()
}

/// Column counterpart of [`log_sum_exp_rows`].
pub fn log_sum_exp_cols(m: &DenseMatrix) -> Result<Vec<f64>, NumericsError> {
    (0..m.cols())
        .map(|j| {
            log_sum_exp((0..m.rows()).map(|i| m.get(i, j))).ok_or(NumericsError::EmptyRow(j))
        })
        .collect()
}

/// Log-sum-exp over every entry of the matrix. `None` when all entries are
/// `-inf`.
pub fn log_sum_exp_all(m: &DenseMatrix) -> Option<f64> {
    log_sum_exp(m.data().iter().copied())
}

/// Result of a top-k selection: the k-th largest value and a row-major mask
/// of the kept entries.
#[derive(Clone, Debug)]
pub struct TopK {
    pub threshold: f64,
    pub mask: Vec<bool>,
}

impl TopK {
    pub fn kept(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }
}

/// Selects exactly `k` entries of largest value. Ties resolve in row-major
/// index order: earlier indices win.
pub fn top_k_threshold(m: &DenseMatrix, k: usize) -> Result<TopK, NumericsError> {
    let len = m.len();
    if k < 1 || k > len {
        return Err(NumericsError::InvalidK { k, max: len });
    }
    let mut order: Vec<usize> = (0..len).collect();
    let data = m.data();
    // Sort by value descending; equal values keep ascending index order.
    order.sort_by(|&a, &b| {
        data[b]
            .partial_cmp(&data[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut mask = vec![false; len];
    for &idx in &order[..k] {
        mask[idx] = true;
    }
    Ok(TopK {
        threshold: data[order[k - 1]],
        mask,
    })
}

/// Symmetric sparse matrix stored as upper-triangle triplets; the mirrored
/// lower-triangle entries are implied.
#[derive(Clone, Debug)]
pub struct SparseSymMatrix {
    dim: usize,
    entries: Vec<(u32, u32, f64)>,
}

impl SparseSymMatrix {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, cap: usize) -> Self {
        Self {
            dim,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Pushes an upper-triangle entry. Callers keep (row, col) unique.
    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row <= col && col < self.dim);
        if value != 0.0 {
            self.entries.push((row as u32, col as u32, value));
        }
    }

    pub fn entries(&self) -> &[(u32, u32, f64)] {
        &self.entries
    }

    /// Stored (upper-triangle) nonzero count.
    pub fn nnz_stored(&self) -> usize {
        self.entries.len()
    }

    /// Nonzero count of the full symmetric matrix implied by the storage.
    pub fn nnz_logical(&self) -> usize {
        let off = self.entries.iter().filter(|(r, c, _)| r != c).count();
        self.entries.len() + off
    }

    /// Checks index ranges, upper-triangle storage, duplicates, and finiteness.
    pub fn validate(&self) -> Result<(), String> {
        let mut seen = std::collections::HashSet::new();
        for &(r, c, v) in &self.entries {
            if r > c || (c as usize) >= self.dim {
                return Err(format!("entry ({r}, {c}) out of range for dim {}", self.dim));
            }
            if !v.is_finite() {
                return Err(format!("entry ({r}, {c}) is not finite"));
            }
            if !seen.insert((r, c)) {
                return Err(format!("duplicate entry ({r}, {c})"));
            }
        }
        Ok(())
    }

    /// `y = H x` using the implied symmetric completion.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        let mut y = vec![0.0; self.dim];
        for &(r, c, v) in &self.entries {
            let (r, c) = (r as usize, c as usize);
            y[r] += v * x[c];
            if r != c {
                y[c] += v * x[r];
            }
        }
        y
    }

    /// Dense copy of the full symmetric matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.entries {
            let (r, c) = (r as usize, c as usize);
            m[(r, c)] = v;
            if r != c {
                m[(c, r)] = v;
            }
        }
        m
    }
}

/// Solution of a regularized symmetric solve with its achieved relative
/// residual.
#[derive(Clone, Debug)]
pub struct SymSolve {
    pub x: Vec<f64>,
    pub residual: f64,
}

fn relative_residual(h: &SparseSymMatrix, reg: f64, x: &[f64], b: &[f64]) -> f64 {
    let hx = h.matvec(x);
    let mut worst: f64 = 0.0;
    let mut bmax: f64 = 1.0;
    for i in 0..b.len() {
        worst = worst.max((hx[i] - reg * x[i] - b[i]).abs());
        bmax = bmax.max(b[i].abs());
    }
    worst / bmax
}

/// Solves `(H - reg I) x = b` for symmetric `H`. Tries a Cholesky
/// factorization of `reg I - H` first (the Hessians handled here are
/// negative definite in the interior), then falls back to a pivoted LU of
/// `H - reg I`. The returned residual lets callers escalate `reg`.
pub fn solve_sym(h: &SparseSymMatrix, b: &[f64], reg: f64) -> Result<SymSolve, NumericsError> {
    assert_eq!(b.len(), h.dim());
    let n = h.dim();
    let bvec = DVector::from_column_slice(b);

    // reg I - H is positive definite whenever H - reg I is negative definite.
    let mut k = h.to_dense();
    k.neg_mut();
    for i in 0..n {
        k[(i, i)] += reg;
    }
    if let Some(chol) = k.clone().cholesky() {
        let x = -chol.solve(&bvec);
        let x: Vec<f64> = x.iter().copied().collect();
        if x.iter().all(|v| v.is_finite()) {
            let residual = relative_residual(h, reg, &x, b);
            return Ok(SymSolve { x, residual });
        }
    }

    // Indefinite or numerically non-PD: pivoted LU on H - reg I.
    k.neg_mut();
    let lu = k.full_piv_lu();
    match lu.solve(&bvec) {
        Some(x) => {
            let x: Vec<f64> = x.iter().copied().collect();
            if !x.iter().all(|v| v.is_finite()) {
                return Err(NumericsError::SingularSystem { reg });
            }
            let residual = relative_residual(h, reg, &x, b);
            Ok(SymSolve { x, residual })
        }
        None => Err(NumericsError::SingularSystem { reg }),
    }
}

/// Escalates through [`REG_LADDER`] until a solve meets
/// [`SOLVE_RESIDUAL_TOL`]; otherwise returns the best-effort solution with
/// the smallest residual.
pub fn solve_sym_ladder(h: &SparseSymMatrix, b: &[f64]) -> Result<SymSolve, NumericsError> {
    let mut best: Option<SymSolve> = None;
    for &reg in &REG_LADDER {
        match solve_sym(h, b, reg) {
            Ok(sol) => {
                let sane = sol.x.iter().all(|v| v.abs() < 1e12);
                if sol.residual <= SOLVE_RESIDUAL_TOL && sane {
                    return Ok(sol);
                }
                if best
                    .as_ref()
                    .map(|b| sol.residual < b.residual)
                    .unwrap_or(true)
                    && sane
                {
                    best = Some(sol);
                }
            }
            Err(NumericsError::SingularSystem { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    best.ok_or(NumericsError::SingularSystem {
        reg: *REG_LADDER.last().unwrap(),
    })
}
