//! Closed-form Gaussian information bottleneck.
//!
//! For jointly Gaussian `(X, Y)` the optimal encoder `T = A X + xi`,
//! `xi ~ N(0, I)`, is built from the left eigenvectors `v_i` of
//! `Sigma_{x|y} Sigma_x^{-1}` sorted by ascending eigenvalue `lambda_i`.
//! Dimension `i` switches on at the critical tradeoff
//! `beta_i^c = 1 / (1 - lambda_i)`, after which its row of `A` is
//! `alpha_i v_i^T` with
//!
//! ```text
//! alpha_i = sqrt((beta (1 - lambda_i) - 1) / (lambda_i r_i)),   r_i = v_i^T Sigma_x v_i
//! ```
//!
//! The left-eigenvector problem is solved as the symmetric-definite pencil
//! `Sigma_{x|y} v = lambda Sigma_x v` by whitening with the Cholesky factor
//! of `Sigma_x`. Eigenvectors come out `Sigma_x`-orthonormal, so `r_i = 1`
//! up to rounding; the computed `r_i` is still reported and used.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;

/// Default relative ridge added to `Sigma_x`: `eps * trace / d`.
pub const DEFAULT_REGULARIZATION: f64 = 1e-6;

/// Cap for `alpha_i` where the formula is singular (`lambda_i = 0`) or overflows.
pub const ALPHA_MAX: f64 = 1e6;

/// Generalized eigenvalues may leave `[0, 1]` by at most this much before
/// the joint is rejected as inconsistent.
const LAMBDA_TOLERANCE: f64 = 1e-6;

/// Eigenvalues this close to 1 are treated as exactly 1 (never active).
const LAMBDA_ONE_SNAP: f64 = 1e-12;

/// Marginal and conditional covariance of a jointly Gaussian `(X, Y)`,
/// seen from the `X` side.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianJoint {
    sigma_x: DMatrix<f64>,
    sigma_x_given_y: DMatrix<f64>,
    regularization: f64,
    ridge_shift: f64,
}

impl GaussianJoint {
    /// Symmetrizes both matrices and adds `regularization * trace / d` to the
    /// diagonal of `sigma_x`. Pass 0 for exact population covariances.
    pub fn new(
        sigma_x: DMatrix<f64>,
        sigma_x_given_y: DMatrix<f64>,
        regularization: f64,
    ) -> Result<Self> {
        let d = sigma_x.nrows();
        if d == 0 || !sigma_x.is_square() || sigma_x_given_y.shape() != (d, d) {
            return Err(Error::Dimension(format!(
                "covariances must be square and equal-sized, got {:?} and {:?}",
                sigma_x.shape(),
                sigma_x_given_y.shape()
            )));
        }
        if !(regularization.is_finite() && regularization >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "regularization must be >= 0, got {regularization}"
            )));
        }
        if sigma_x
            .iter()
            .chain(sigma_x_given_y.iter())
            .any(|x| !x.is_finite())
        {
            return Err(Error::Validation(
                "covariance has non-finite entries".into(),
            ));
        }
        let mut sigma_x = sigma_x;
        let mut sigma_x_given_y = sigma_x_given_y;
        linalg::symmetrize(&mut sigma_x);
        linalg::symmetrize(&mut sigma_x_given_y);
        let ridge_shift = linalg::ridge_shift(&sigma_x, regularization);
        linalg::add_diagonal(&mut sigma_x, ridge_shift);
        linalg::cholesky(&sigma_x, "Sigma_x")?;
        Ok(Self {
            sigma_x,
            sigma_x_given_y,
            regularization,
            ridge_shift,
        })
    }

    /// Regularized marginal covariance.
    pub fn sigma_x(&self) -> &DMatrix<f64> {
        &self.sigma_x
    }

    pub fn sigma_x_given_y(&self) -> &DMatrix<f64> {
        &self.sigma_x_given_y
    }

    /// Relative ridge `eps` requested at construction.
    pub fn regularization(&self) -> f64 {
        self.regularization
    }

    /// Absolute diagonal shift that `eps` resolved to.
    pub fn ridge_shift(&self) -> f64 {
        self.ridge_shift
    }

    pub fn dim(&self) -> usize {
        self.sigma_x.nrows()
    }
}

/// What the relevance variable `Y` looks like.
#[derive(Debug, Clone, Copy)]
pub enum Relevance<'a> {
    /// Row-aligned continuous features.
    Continuous(&'a DMatrix<f64>),
    /// Dense class labels in `[0, K)`.
    Labels(&'a [usize]),
}

/// Estimates `(Sigma_x, Sigma_{x|y})` from samples.
///
/// Continuous `Y` uses the Schur complement
/// `Sigma_x - Sigma_xy Sigma_y^{-1} Sigma_yx` (unbiased divisors, the same
/// relative ridge on `Sigma_y`); labels use the pooled within-class scatter
/// against the total scatter, both with divisor `N`, so
/// `Sigma_{x|y} <= Sigma_x` holds exactly.
pub fn conditional_covariance(
    x: &DMatrix<f64>,
    relevance: Relevance<'_>,
    regularization: f64,
) -> Result<GaussianJoint> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::Validation("need at least 2 samples".into()));
    }
    match relevance {
        Relevance::Continuous(y) => {
            if y.nrows() != n {
                return Err(Error::Dimension(format!(
                    "row counts differ: {} vs {}",
                    n,
                    y.nrows()
                )));
            }
            let sigma_x = linalg::covariance(x);
            let mut sigma_y = linalg::covariance(y);
            let shift = linalg::ridge_shift(&sigma_y, regularization);
            linalg::add_diagonal(&mut sigma_y, shift);
            let sigma_yx = linalg::cross_covariance(y, x, (n - 1) as f64);
            let chol = linalg::cholesky(&sigma_y, "Sigma_y")?;
            let whitened = chol
                .l_dirty()
                .solve_lower_triangular(&sigma_yx)
                .ok_or_else(|| Error::Conditioning("Sigma_y is singular".into()))?;
            let mut cond = &sigma_x - whitened.transpose() * whitened;
            linalg::symmetrize(&mut cond);
            GaussianJoint::new(sigma_x, cond, regularization)
        }
        Relevance::Labels(labels) => {
            if labels.len() != n {
                return Err(Error::Dimension(format!(
                    "{} labels for {} rows",
                    labels.len(),
                    n
                )));
            }
            let k = labels.iter().copied().max().map_or(0, |m| m + 1);
            let (means, _) = linalg::class_means(x, labels, k);
            let mut residual = x.clone();
            for (i, &l) in labels.iter().enumerate() {
                let mut row = residual.row_mut(i);
                row -= means.row(l);
            }
            let nf = n as f64;
            let centered = linalg::centered(x);
            let mut sigma_x = centered.transpose() * &centered / nf;
            let mut within = residual.transpose() * &residual / nf;
            linalg::symmetrize(&mut sigma_x);
            linalg::symmetrize(&mut within);
            GaussianJoint::new(sigma_x, within, regularization)
        }
    }
}

/// Generalized spectrum of `(Sigma_{x|y}, Sigma_x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GibSpectrum {
    /// Ascending, clamped to `[0, 1]`.
    pub lambdas: Vec<f64>,
    /// Row `i` is the left eigenvector `v_i^T`.
    pub vectors: DMatrix<f64>,
    /// `r_i = v_i^T Sigma_x v_i`.
    pub r: Vec<f64>,
    /// Relative ridge of the joint this was computed from.
    pub regularization: f64,
}

pub fn gib_spectrum(joint: &GaussianJoint) -> Result<GibSpectrum> {
    let d = joint.dim();
    let chol = linalg::cholesky(joint.sigma_x(), "Sigma_x")?;
    let l = chol.l();
    // C = L^{-1} Sigma_{x|y} L^{-T}
    let half = l
        .solve_lower_triangular(joint.sigma_x_given_y())
        .ok_or_else(|| Error::Conditioning("Sigma_x factor is singular".into()))?;
    let mut whitened = l
        .solve_lower_triangular(&half.transpose())
        .ok_or_else(|| Error::Conditioning("Sigma_x factor is singular".into()))?;
    linalg::symmetrize(&mut whitened);

    let eig = SymmetricEigen::new(whitened);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut lambdas = Vec::with_capacity(d);
    let mut vectors = DMatrix::<f64>::zeros(d, d);
    let mut r = Vec::with_capacity(d);
    for (row, &idx) in order.iter().enumerate() {
        let raw = eig.eigenvalues[idx];
        if !(-LAMBDA_TOLERANCE..=1.0 + LAMBDA_TOLERANCE).contains(&raw) {
            return Err(Error::Conditioning(format!(
                "generalized eigenvalue {raw} outside [0, 1]: Sigma_x|y is not bounded by Sigma_x"
            )));
        }
        let lambda = if raw >= 1.0 - LAMBDA_ONE_SNAP {
            1.0
        } else {
            raw.max(0.0)
        };
        // v = L^{-T} w
        let w = eig.eigenvectors.column(idx).into_owned();
        let mut v = l
            .tr_solve_lower_triangular(&w)
            .ok_or_else(|| Error::Conditioning("Sigma_x factor is singular".into()))?;
        let scale = v.amax();
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12 * scale) {
            if *first < 0.0 {
                v.neg_mut();
            }
        }
        let ri = (joint.sigma_x() * &v).dot(&v);
        lambdas.push(lambda);
        vectors.row_mut(row).copy_from(&v.transpose());
        r.push(ri);
    }
    Ok(GibSpectrum {
        lambdas,
        vectors,
        r,
        regularization: joint.regularization(),
    })
}

impl GibSpectrum {
    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    pub fn critical_betas(&self) -> Vec<f64> {
        critical_betas(self)
    }

    /// Number of dimensions that can ever become active (`lambda_i < 1`).
    pub fn feasible_rank(&self) -> usize {
        self.lambdas.iter().filter(|&&l| l < 1.0).count()
    }

    /// `I(X;Y) = 1/2 sum ln(1/lambda_i)` over `lambda_i > 0`, in nats.
    pub fn mutual_information(&self) -> f64 {
        0.5 * self
            .lambdas
            .iter()
            .filter(|&&l| l > 0.0)
            .map(|l| -l.ln())
            .sum::<f64>()
    }

    /// Largest relative residual of `v_i^T Sigma_{x|y} = lambda_i v_i^T Sigma_x`.
    pub fn max_residual(&self, joint: &GaussianJoint) -> f64 {
        let left = &self.vectors * joint.sigma_x_given_y();
        let right = &self.vectors * joint.sigma_x();
        (0..self.dim())
            .map(|i| {
                let res = left.row(i) - right.row(i) * self.lambdas[i];
                res.norm() / right.row(i).norm().max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    }

    pub fn report(&self) -> SpectrumReport {
        SpectrumReport {
            lambdas: self.lambdas.clone(),
            critical_betas: self.critical_betas(),
            r: self.r.clone(),
            regularization_used: self.regularization,
        }
    }
}

/// JSON form of a spectrum. Infinite critical betas serialize as `null`.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub lambdas: Vec<f64>,
    pub critical_betas: Vec<f64>,
    pub r: Vec<f64>,
    pub regularization_used: f64,
}

/// `beta_i^c = 1 / (1 - lambda_i)`, `+inf` where `lambda_i = 1`.
pub fn critical_betas(spectrum: &GibSpectrum) -> Vec<f64> {
    spectrum
        .lambdas
        .iter()
        .map(|&l| {
            if l >= 1.0 {
                f64::INFINITY
            } else {
                1.0 / (1.0 - l)
            }
        })
        .collect()
}

/// The IB-optimal linear encoder at one tradeoff value.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub beta: f64,
    /// `active_rank x d`; row `j` is `alpha_j v_j^T`.
    pub matrix_a: DMatrix<f64>,
    pub active_rank: usize,
    pub alphas: Vec<f64>,
    /// Indices into the spectrum of the active rows that hit `ALPHA_MAX`.
    pub capped: Vec<usize>,
}

impl Projection {
    /// `alpha_i / mean(alpha)`; empty when no dimension is active.
    pub fn alphas_normalized(&self) -> Vec<f64> {
        if self.alphas.is_empty() {
            return Vec::new();
        }
        let mean = self.alphas.iter().sum::<f64>() / self.alphas.len() as f64;
        self.alphas.iter().map(|a| a / mean).collect()
    }
}

/// Rows `alpha_i v_i^T` for every `i` with `beta (1 - lambda_i) > 1`.
pub fn projection_matrix(spectrum: &GibSpectrum, beta: f64) -> Result<Projection> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "beta must be positive and finite, got {beta}"
        )));
    }
    let d = spectrum.dim();
    let mut alphas = Vec::new();
    let mut capped = Vec::new();
    for (i, &lambda) in spectrum.lambdas.iter().enumerate() {
        let gain = beta * (1.0 - lambda) - 1.0;
        if lambda >= 1.0 || gain <= 0.0 {
            // ascending lambdas: nothing further can be active
            break;
        }
        let alpha = if lambda > 0.0 {
            (gain / (lambda * spectrum.r[i])).sqrt()
        } else {
            f64::INFINITY
        };
        if alpha.is_finite() && alpha <= ALPHA_MAX {
            alphas.push(alpha);
        } else {
            alphas.push(ALPHA_MAX);
            capped.push(i);
        }
    }
    let p = alphas.len();
    let mut matrix_a = DMatrix::<f64>::zeros(p, d);
    for (i, &alpha) in alphas.iter().enumerate() {
        matrix_a
            .row_mut(i)
            .copy_from(&(spectrum.vectors.row(i) * alpha));
    }
    Ok(Projection {
        beta,
        matrix_a,
        active_rank: p,
        alphas,
        capped,
    })
}

/// One point of the information curve, in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InfoPoint {
    pub beta: f64,
    pub i_tx: f64,
    pub i_ty: f64,
}

/// `I(T;X) = 1/2 log det(A Sigma_x A^T + I)` and
/// `I(T;Y) = I(T;X) - 1/2 log det(A Sigma_{x|y} A^T + I)`.
pub fn gaussian_info(projection: &Projection, joint: &GaussianJoint) -> Result<InfoPoint> {
    if projection.active_rank == 0 {
        return Ok(InfoPoint {
            beta: projection.beta,
            i_tx: 0.0,
            i_ty: 0.0,
        });
    }
    if projection.matrix_a.ncols() != joint.dim() {
        return Err(Error::Dimension(format!(
            "projection has {} columns, joint has dimension {}",
            projection.matrix_a.ncols(),
            joint.dim()
        )));
    }
    let a = &projection.matrix_a;
    let p = projection.active_rank;
    let eye = DMatrix::<f64>::identity(p, p);
    let mut marginal = a * joint.sigma_x() * a.transpose() + &eye;
    let mut conditional = a * joint.sigma_x_given_y() * a.transpose() + &eye;
    linalg::symmetrize(&mut marginal);
    linalg::symmetrize(&mut conditional);
    let i_tx = (0.5 * linalg::log_det_spd(&marginal, "A Sigma_x A^T + I")?).max(0.0);
    let residual = 0.5 * linalg::log_det_spd(&conditional, "A Sigma_x|y A^T + I")?;
    let i_ty = (i_tx - residual).clamp(0.0, i_tx);
    Ok(InfoPoint {
        beta: projection.beta,
        i_tx,
        i_ty,
    })
}

/// Pointwise `gaussian_info` over a positive, ascending `beta` grid.
pub fn information_curve(
    spectrum: &GibSpectrum,
    joint: &GaussianJoint,
    betas: &[f64],
) -> Result<Vec<InfoPoint>> {
    if betas.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
        return Err(Error::InvalidArgument("beta grid must be positive".into()));
    }
    if betas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("beta grid must be ascending".into()));
    }
    betas
        .par_iter()
        .map(|&beta| gaussian_info(&projection_matrix(spectrum, beta)?, joint))
        .collect()
}

/// Log-spaced beta grid between `lo` and `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..points)
                .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
                .collect()
        }
    }
}

/// How to choose the operating point on the curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Target {
    ExplicitBeta(f64),
    Rank(usize),
    RelevanceFraction(f64),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::ExplicitBeta(b) => write!(f, "beta={b}"),
            Target::Rank(k) => write!(f, "rank={k}"),
            Target::RelevanceFraction(p) => write!(f, "relevance_fraction={p}"),
        }
    }
}

/// Beta strictly below the first transition.
fn beta_below_first(critical: &[f64]) -> f64 {
    match critical.first() {
        Some(&b) if b.is_finite() => 0.5 * b,
        _ => 1.0,
    }
}

/// Beta placed inside the rank-`k` phase interval: the geometric mean of
/// `beta_k^c` and `beta_{k+1}^c`, or `2 beta_k^c` when `k` is the last
/// finite transition.
pub fn beta_for_rank(spectrum: &GibSpectrum, rank: usize) -> Result<f64> {
    let critical = spectrum.critical_betas();
    let feasible = spectrum.feasible_rank();
    if rank > feasible {
        return Err(Error::Target(format!(
            "rank {rank} requested but only {feasible} dimensions have lambda < 1"
        )));
    }
    if rank == 0 {
        return Ok(beta_below_first(&critical));
    }
    let lower = critical[rank - 1];
    Ok(match critical.get(rank) {
        Some(&upper) if upper.is_finite() => (lower * upper).sqrt(),
        _ => 2.0 * lower,
    })
}

pub fn rank_for_target(
    spectrum: &GibSpectrum,
    joint: &GaussianJoint,
    target: Target,
) -> Result<Projection> {
    match target {
        Target::ExplicitBeta(beta) => projection_matrix(spectrum, beta),
        Target::Rank(rank) => {
            let beta = beta_for_rank(spectrum, rank)?;
            let projection = projection_matrix(spectrum, beta)?;
            if projection.active_rank != rank {
                return Err(Error::Target(format!(
                    "rank {rank} splits a degenerate eigenvalue cluster (beta_{rank}^c = beta_{}^c); \
                     got active rank {}",
                    rank + 1,
                    projection.active_rank
                )));
            }
            Ok(projection)
        }
        Target::RelevanceFraction(fraction) => {
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(Error::Target(format!(
                    "relevance fraction {fraction} outside (0, 1)"
                )));
            }
            let goal = fraction * spectrum.mutual_information();
            let feasible = spectrum.feasible_rank();
            if feasible == 0 {
                return projection_matrix(spectrum, beta_below_first(&spectrum.critical_betas()));
            }
            for rank in 1..=feasible {
                let projection = projection_matrix(spectrum, beta_for_rank(spectrum, rank)?)?;
                if gaussian_info(&projection, joint)?.i_ty >= goal {
                    return Ok(projection);
                }
            }
            // full rank not yet enough at the default placement: push beta up
            let mut beta = beta_for_rank(spectrum, feasible)?;
            for _ in 0..64 {
                beta *= 2.0;
                let projection = projection_matrix(spectrum, beta)?;
                if gaussian_info(&projection, joint)?.i_ty >= goal {
                    return Ok(projection);
                }
            }
            Err(Error::Target(format!(
                "relevance fraction {fraction} not reachable"
            )))
        }
    }
}
