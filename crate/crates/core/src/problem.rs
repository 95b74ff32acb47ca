//! Problem instances: cost matrix, marginals, and the martingale-type
//! constraint data `(V, W)`, plus builders for the three experiment
//! families (option pricing, balanced assignment, stochastic ranking).

use crate::numerics::DenseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("weights must be strictly positive")]
    InvalidWeight,
    #[error("weights must sum to one (off by {0:e})")]
    UnnormalizedWeights(f64),
    #[error("{0} must be finite")]
    NonFinite(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Transport under the relaxed equality constraint `|PV - W|_1 <= epsilon`.
#[derive(Clone, Debug)]
pub struct MotProblem {
    pub n: usize,
    pub d: usize,
    /// Cost matrix, `n x n`.
    pub cost: DenseMatrix,
    /// Source weights `r`, strictly positive, summing to one.
    pub source_weights: Vec<f64>,
    /// Target weights `c`, strictly positive, summing to one.
    pub target_weights: Vec<f64>,
    /// Target embeddings `V`, `n x d`: row `j` is the embedding of site `j`.
    pub embeddings: DenseMatrix,
    /// Per-site constraint targets `W`, `n x d`: row `i` is `r_i * w_i`.
    pub targets: DenseMatrix,
    /// Constraint violation budget.
    pub epsilon: f64,
    /// Entropic regularization strength.
    pub eta: f64,
}

impl MotProblem {
    pub fn new(
        cost: DenseMatrix,
        source_weights: Vec<f64>,
        target_weights: Vec<f64>,
        embeddings: DenseMatrix,
        targets: DenseMatrix,
        epsilon: f64,
        eta: f64,
    ) -> Result<Self, ProblemError> {
        let n = source_weights.len();
        let d = embeddings.cols();
        validate_common(&cost, &source_weights, &target_weights, &embeddings, &targets)?;
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(ProblemError::InvalidParameter(format!(
                "epsilon = {epsilon} must be nonnegative"
            )));
        }
        validate_eta(eta)?;
        Ok(Self {
            n,
            d,
            cost,
            source_weights,
            target_weights,
            embeddings,
            targets,
            epsilon,
            eta,
        })
    }

    pub fn with_eta(&self, eta: f64) -> Self {
        let mut p = self.clone();
        p.eta = eta;
        p
    }
}

/// Transport under the one-sided constraint `PV >= W`.
#[derive(Clone, Debug)]
pub struct SmotProblem {
    pub n: usize,
    pub d: usize,
    pub cost: DenseMatrix,
    pub source_weights: Vec<f64>,
    pub target_weights: Vec<f64>,
    pub embeddings: DenseMatrix,
    pub targets: DenseMatrix,
    pub eta: f64,
}

impl SmotProblem {
    pub fn new(
        cost: DenseMatrix,
        source_weights: Vec<f64>,
        target_weights: Vec<f64>,
        embeddings: DenseMatrix,
        targets: DenseMatrix,
        eta: f64,
    ) -> Result<Self, ProblemError> {
        let n = source_weights.len();
        let d = embeddings.cols();
        validate_common(&cost, &source_weights, &target_weights, &embeddings, &targets)?;
        validate_eta(eta)?;
        Ok(Self {
            n,
            d,
            cost,
            source_weights,
            target_weights,
            embeddings,
            targets,
            eta,
        })
    }

    pub fn with_eta(&self, eta: f64) -> Self {
        let mut p = self.clone();
        p.eta = eta;
        p
    }
}

fn validate_eta(eta: f64) -> Result<(), ProblemError> {
    if !eta.is_finite() || eta <= 0.0 {
        return Err(ProblemError::InvalidParameter(format!(
            "eta = {eta} must be positive"
        )));
    }
    Ok(())
}

fn validate_common(
    cost: &DenseMatrix,
    r: &[f64],
    c: &[f64],
    v: &DenseMatrix,
    w: &DenseMatrix,
) -> Result<(), ProblemError> {
    let n = r.len();
    let d = v.cols();
    if c.len() != n || cost.rows() != n || cost.cols() != n {
        return Err(ProblemError::SizeMismatch(format!(
            "cost {}x{}, r {}, c {}",
            cost.rows(),
            cost.cols(),
            n,
            c.len()
        )));
    }
    if v.rows() != n || w.rows() != n || w.cols() != d {
        return Err(ProblemError::SizeMismatch(format!(
            "V {}x{}, W {}x{} for n = {n}",
            v.rows(),
            v.cols(),
            w.rows(),
            w.cols()
        )));
    }
    if !cost.all_finite() {
        return Err(ProblemError::NonFinite("cost matrix"));
    }
    if !v.all_finite() || !w.all_finite() {
        return Err(ProblemError::NonFinite("constraint matrices"));
    }
    for weights in [r, c] {
        if weights.iter().any(|&x| !x.is_finite() || x <= 0.0) {
            return Err(ProblemError::InvalidWeight);
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(ProblemError::UnnormalizedWeights(total - 1.0));
        }
    }
    Ok(())
}

/// A weighted point cloud approximating a continuous distribution.
#[derive(Clone, Debug)]
pub struct QuantizedDistribution {
    /// `n x d` matrix, one point per row.
    pub points: DenseMatrix,
    /// Strictly positive weights summing to one.
    pub weights: Vec<f64>,
}

impl QuantizedDistribution {
    pub fn new(points: DenseMatrix, weights: Vec<f64>) -> Result<Self, ProblemError> {
        if points.rows() != weights.len() {
            return Err(ProblemError::SizeMismatch(format!(
                "{} points vs {} weights",
                points.rows(),
                weights.len()
            )));
        }
        if weights.iter().any(|&x| !x.is_finite() || x <= 0.0) {
            return Err(ProblemError::InvalidWeight);
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(ProblemError::UnnormalizedWeights(total - 1.0));
        }
        Ok(Self { points, weights })
    }

    /// 1-d helper: equally weighted points.
    pub fn uniform_1d(points: Vec<f64>) -> Result<Self, ProblemError> {
        let n = points.len();
        let w = vec![1.0 / n as f64; n];
        Self::new(DenseMatrix::new(n, 1, points), w)
    }
}

/// Assembles a constrained transport problem from two quantized
/// distributions: `C_ij = cost(w_i, v_j)`, `V` rows are the target points,
/// and `W` row `i` is `r_i * w_i`.
pub fn build_mot(
    source: &QuantizedDistribution,
    target: &QuantizedDistribution,
    cost_fn: impl Fn(&[f64], &[f64]) -> f64,
    epsilon: f64,
    eta: f64,
) -> Result<MotProblem, ProblemError> {
    let n = source.weights.len();
    let d = source.points.cols();
    if target.weights.len() != n || target.points.cols() != d {
        return Err(ProblemError::SizeMismatch(format!(
            "source {}x{}, target {}x{}",
            n,
            d,
            target.weights.len(),
            target.points.cols()
        )));
    }
    let cost = DenseMatrix::from_fn(n, n, |i, j| cost_fn(source.points.row(i), target.points.row(j)));
    let embeddings = target.points.clone();
    let targets = DenseMatrix::from_fn(n, d, |i, k| source.weights[i] * source.points.get(i, k));
    MotProblem::new(
        cost,
        source.weights.clone(),
        target.weights.clone(),
        embeddings,
        targets,
        epsilon,
        eta,
    )
}

/// Standard normal CDF.
fn normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal density.
fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Antiderivative of the standard normal CDF: `G(z) = z Phi(z) + phi(z)`.
fn normal_cdf_integral(z: f64) -> f64 {
    z * normal_cdf(z) + normal_pdf(z)
}

const PRICING_SIGMA: f64 = 1e-2;

/// Distribution function of `X + Y` with `X ~ Unif[0,1]` and
/// `Y ~ N(0, sigma^2)`: the convolution integral has the closed form
/// `sigma * (G(t / sigma) - G((t - 1) / sigma))`.
pub fn pricing_target_cdf(t: f64) -> f64 {
    PRICING_SIGMA
        * (normal_cdf_integral(t / PRICING_SIGMA)
            - normal_cdf_integral((t - 1.0) / PRICING_SIGMA))
}

/// Quantile of the smoothed target law by bisection to width 1e-12.
pub fn pricing_target_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (-1.0_f64, 2.0_f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if pricing_target_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Option-pricing instance: uniform source on `[0,1]` quantized at midpoint
/// masses, target law equal to the source smoothed by centered Gaussian
/// noise of variance 1e-4, absolute-difference payoff, and a default
/// violation budget of `2/n`.
pub fn build_option_pricing(
    n: usize,
    epsilon: Option<f64>,
    eta: f64,
) -> Result<MotProblem, ProblemError> {
    if n < 2 {
        return Err(ProblemError::InvalidParameter(format!(
            "n = {n} must be at least 2"
        )));
    }
    let source_points: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let target_points: Vec<f64> = (0..n)
        .map(|j| pricing_target_quantile((j as f64 + 0.5) / n as f64))
        .collect();
    let source = QuantizedDistribution::uniform_1d(source_points)?;
    let target = QuantizedDistribution::uniform_1d(target_points)?;
    let eps = epsilon.unwrap_or(2.0 / n as f64);
    build_mot(&source, &target, |w, v| (w[0] - v[0]).abs(), eps, eta)
}

/// Balanced-assignment instance: uniform marginals, i.i.d. uniform random
/// costs from a seeded generator, and a single balance constraint requiring
/// the first `size_a` and next `size_b` sites to receive equal mass.
pub fn build_balance(
    n: usize,
    size_a: usize,
    size_b: usize,
    epsilon: f64,
    eta: f64,
    seed: u64,
) -> Result<MotProblem, ProblemError> {
    if size_a == 0 || size_b == 0 || size_a + size_b > n {
        return Err(ProblemError::InvalidParameter(format!(
            "group sizes {size_a} + {size_b} must be positive and at most n = {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cost = DenseMatrix::from_fn(n, n, |_, _| rng.gen::<f64>());
    let uniform = vec![1.0 / n as f64; n];
    let embeddings = DenseMatrix::from_fn(n, 1, |j, _| {
        if j < size_a {
            n as f64 / size_a as f64
        } else if j < size_a + size_b {
            -(n as f64) / size_b as f64
        } else {
            0.0
        }
    });
    let targets = DenseMatrix::zeros(n, 1);
    MotProblem::new(
        cost,
        uniform.clone(),
        uniform,
        embeddings,
        targets,
        epsilon,
        eta,
    )
}

/// Ranking instance with explicit relevance scores and utilities. Rows are
/// ranking positions (1-based in the discount), columns are products.
pub fn build_ranking_from_scores(
    scores: &[f64],
    utilities: &[f64],
    k_top: usize,
    w_top: f64,
    eta: f64,
) -> Result<SmotProblem, ProblemError> {
    let n = scores.len();
    if utilities.len() != n {
        return Err(ProblemError::SizeMismatch(format!(
            "{n} scores vs {} utilities",
            utilities.len()
        )));
    }
    if k_top > n {
        return Err(ProblemError::InvalidParameter(format!(
            "k_top = {k_top} exceeds n = {n}"
        )));
    }
    let discount = |i: usize| (2.0 + i as f64).log2(); // position i+1
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let ideal_dcg: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, s)| s / discount(i))
        .sum();
    if ideal_dcg <= 0.0 {
        return Err(ProblemError::InvalidParameter(
            "scores must have positive ideal gain".into(),
        ));
    }
    let alpha = 1.0 / ideal_dcg;
    let cost = DenseMatrix::from_fn(n, n, |i, j| alpha * (-scores[j]) / discount(i));
    let uniform = vec![1.0 / n as f64; n];
    let embeddings = DenseMatrix::new(n, 1, utilities.to_vec());
    // Position thresholds scale by the row mass, matching the quantized
    // constraint convention `W row i = r_i * w_i`.
    let targets = DenseMatrix::from_fn(n, 1, |i, _| {
        if i < k_top {
            w_top / n as f64
        } else {
            0.0
        }
    });
    SmotProblem::new(cost, uniform.clone(), uniform, embeddings, targets, eta)
}

/// Seeded ranking instance: scores and utilities drawn i.i.d. `Unif[0,1]`,
/// normalized discounted-gain cost, diversity thresholds on the top
/// positions.
pub fn build_ranking(
    n: usize,
    k_top: usize,
    w_top: f64,
    eta: f64,
    seed: u64,
) -> Result<SmotProblem, ProblemError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scores: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    let utilities: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    build_ranking_from_scores(&scores, &utilities, k_top, w_top, eta)
}

/// Default top-position count for the ranking experiment (positions 1..=39).
pub const RANKING_K_TOP: usize = 39;
/// Default diversity threshold for the ranking experiment.
pub const RANKING_W_TOP: f64 = 0.3;
