//! Linear identifiability between two row-aligned representations:
//! canonical correlations, the least-squares map `Z1 ≈ Z2 A^T`, and how
//! often two classifiers are right on the same samples.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::repr_io::RepresentationSet;

/// Default relative ridge on both auto-covariances: `eps * trace / d`.
pub const DEFAULT_CCA_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CcaOptions {
    pub ridge: f64,
}

impl Default for CcaOptions {
    fn default() -> Self {
        Self {
            ridge: DEFAULT_CCA_RIDGE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CcaResult {
    /// Descending, in `[0, 1]`, length `min(d1, d2, N)`.
    pub correlations: Vec<f64>,
    pub top_k: usize,
    pub mean_top_k: f64,
    /// Population standard deviation of the leading `top_k`.
    pub std_top_k: f64,
    pub var_top_k: f64,
    pub regularization: f64,
}

fn check_rows(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<usize> {
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "row counts differ: {} vs {}",
            a.nrows(),
            b.nrows()
        )));
    }
    if a.nrows() < 2 {
        return Err(Error::Validation("need at least 2 rows".into()));
    }
    Ok(a.nrows())
}

pub fn cca(
    a: &RepresentationSet,
    b: &RepresentationSet,
    top_k: usize,
    options: &CcaOptions,
) -> Result<CcaResult> {
    cca_features(a.features(), b.features(), top_k, options)
}

/// Canonical correlations from the singular values of the whitened
/// cross-covariance `L_a^{-1} Sigma_ab L_b^{-T}`.
pub fn cca_features(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    top_k: usize,
    options: &CcaOptions,
) -> Result<CcaResult> {
    let n = check_rows(a, b)?;
    let (da, db) = (a.ncols(), b.ncols());
    if top_k == 0 || top_k > da.min(db) {
        return Err(Error::InvalidArgument(format!(
            "top_k must be in [1, {}], got {top_k}",
            da.min(db)
        )));
    }
    let mut saa = linalg::covariance(a);
    let mut sbb = linalg::covariance(b);
    let shift_a = linalg::ridge_shift(&saa, options.ridge);
    let shift_b = linalg::ridge_shift(&sbb, options.ridge);
    linalg::add_diagonal(&mut saa, shift_a);
    linalg::add_diagonal(&mut sbb, shift_b);
    let sab = linalg::cross_covariance(a, b, (n - 1) as f64);

    let la = linalg::cholesky(&saa, "Sigma_aa")?.l();
    let lb = linalg::cholesky(&sbb, "Sigma_bb")?.l();
    let left = la
        .solve_lower_triangular(&sab)
        .ok_or_else(|| Error::Conditioning("Sigma_aa is singular".into()))?;
    let whitened = lb
        .solve_lower_triangular(&left.transpose())
        .ok_or_else(|| Error::Conditioning("Sigma_bb is singular".into()))?;

    let mut correlations: Vec<f64> = whitened
        .singular_values()
        .iter()
        .map(|s| s.clamp(0.0, 1.0))
        .collect();
    correlations.sort_by(|x, y| y.total_cmp(x));
    correlations.truncate(da.min(db).min(n));

    let k = top_k.min(correlations.len());
    let (mean, std) = linalg::mean_std(&correlations[..k]);
    Ok(CcaResult {
        correlations,
        top_k: k,
        mean_top_k: mean,
        std_top_k: std,
        var_top_k: std * std,
        regularization: options.ridge,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    /// `d1 x d2` map with `Z1 - mean ≈ (Z2 - mean) A^T`.
    pub matrix_a: DMatrix<f64>,
    /// Sample covariance of the residuals, `d1 x d1`.
    pub residual_cov: DMatrix<f64>,
    /// Explained-variance fraction per `Z1` coordinate.
    pub r2_per_dim: Vec<f64>,
    /// Relative ridge that was applied to `Sigma_22` (0 when `N > d2`).
    pub ridge: f64,
}

/// Ridge used by `linear_fit` when there are no more rows than `Z2` columns.
const UNDERDETERMINED_RIDGE: f64 = 1e-8;

/// Least-squares fit of `Z1 = Z2 A^T + xi` on centered data.
pub fn linear_fit(z1: &RepresentationSet, z2: &RepresentationSet) -> Result<LinearFit> {
    linear_fit_features(z1.features(), z2.features())
}

pub fn linear_fit_features(z1: &DMatrix<f64>, z2: &DMatrix<f64>) -> Result<LinearFit> {
    let n = check_rows(z1, z2)?;
    let c1 = linalg::centered(z1);
    let c2 = linalg::centered(z2);
    let mut gram = c2.transpose() * &c2;
    linalg::symmetrize(&mut gram);
    let ridge = if n > z2.ncols() {
        0.0
    } else {
        UNDERDETERMINED_RIDGE
    };
    let shift = linalg::ridge_shift(&gram, ridge);
    linalg::add_diagonal(&mut gram, shift);
    let chol = linalg::cholesky(&gram, "Z2^T Z2")?;
    let at = chol.solve(&(c2.transpose() * &c1));
    let residual = &c1 - &c2 * &at;

    let denom = (n - 1) as f64;
    let mut residual_cov = residual.transpose() * &residual / denom;
    linalg::symmetrize(&mut residual_cov);
    let r2_per_dim = (0..z1.ncols())
        .map(|j| {
            let total = c1.column(j).norm_squared() / denom;
            if total > 0.0 {
                1.0 - residual_cov[(j, j)] / total
            } else {
                0.0
            }
        })
        .collect();
    Ok(LinearFit {
        matrix_a: at.transpose(),
        residual_cov,
        r2_per_dim,
        ridge,
    })
}

/// Fraction of samples both predictors classify correctly.
pub fn joint_correct_fraction(
    predictions_a: &[usize],
    predictions_b: &[usize],
    truth: &[usize],
) -> Result<f64> {
    if predictions_a.len() != truth.len() || predictions_b.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "lengths differ: {}, {}, {}",
            predictions_a.len(),
            predictions_b.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("no predictions".into()));
    }
    let both = predictions_a
        .iter()
        .zip(predictions_b)
        .zip(truth)
        .filter(|((a, b), t)| a == t && b == t)
        .count();
    Ok(both as f64 / truth.len() as f64)
}

/// Fraction of predictions equal to the truth.
pub fn accuracy(predictions: &[usize], truth: &[usize]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} labels",
            predictions.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("no predictions".into()));
    }
    let hits = predictions
        .iter()
        .zip(truth)
        .filter(|(p, t)| p == t)
        .count();
    Ok(hits as f64 / truth.len() as f64)
}
