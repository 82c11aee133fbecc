//! Empirical Gaussian copula: rank transform, normal scores, copula
//! correlation, and the meta-Gaussian bottleneck built on them.
//!
//! Ranks are scaled by `1/(N+1)` so every `u` is strictly inside `(0, 1)`;
//! ties get their average rank. Because everything downstream depends on
//! the data only through ranks, any strictly increasing per-coordinate
//! warp of the inputs leaves every result bit-for-bit unchanged.

mod mgib;
mod quantile;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;

pub use mgib::{apply_projection, mgib_solve, MgibOptions, MgibReport, MgibSolution};
pub use quantile::{normal_cdf, normal_quantile};

/// Average 1-based ranks of a slice; ties share the mean of their positions.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1 ..= end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

fn map_columns<F>(m: &DMatrix<f64>, f: F) -> DMatrix<f64>
where
    F: Fn(Vec<f64>) -> Vec<f64> + Sync,
{
    let columns: Vec<Vec<f64>> = (0..m.ncols())
        .into_par_iter()
        .map(|j| f(m.column(j).iter().copied().collect()))
        .collect();
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| columns[j][i])
}

/// Per-column scaled ranks `rank / (N + 1)`.
pub fn rank_transform(features: &DMatrix<f64>) -> DMatrix<f64> {
    let scale = 1.0 / (features.nrows() + 1) as f64;
    map_columns(features, |col| {
        average_ranks(&col).into_iter().map(|r| r * scale).collect()
    })
}

/// Elementwise standard-normal quantile of a `u` matrix.
pub fn normal_scores(u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(bad) = u.iter().find(|x| !(**x > 0.0 && **x < 1.0)) {
        return Err(Error::Domain(format!(
            "normal scores need entries in (0, 1), found {bad}"
        )));
    }
    Ok(u.map(|p| normal_quantile(p).expect("range checked above")))
}

/// Pearson correlation of the columns; unit diagonal by construction.
pub fn correlation(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let cov = linalg::covariance(m);
    let d = cov.nrows();
    let mut std = Vec::with_capacity(d);
    for j in 0..d {
        let v = cov[(j, j)];
        if !(v > 0.0) {
            return Err(Error::DegenerateColumn { column: j });
        }
        std.push(v.sqrt());
    }
    let mut corr = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            1.0
        } else {
            cov[(i, j)] / (std[i] * std[j])
        }
    });
    linalg::symmetrize(&mut corr);
    Ok(corr)
}

/// Correlation of `[A B]` split into its blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCorrelation {
    pub aa: DMatrix<f64>,
    pub bb: DMatrix<f64>,
    pub ab: DMatrix<f64>,
}

pub fn copula_correlation(
    scores_a: &DMatrix<f64>,
    scores_b: &DMatrix<f64>,
) -> Result<BlockCorrelation> {
    if scores_a.nrows() != scores_b.nrows() {
        return Err(Error::Dimension(format!(
            "row counts differ: {} vs {}",
            scores_a.nrows(),
            scores_b.nrows()
        )));
    }
    let da = scores_a.ncols();
    let db = scores_b.ncols();
    let full = correlation(&linalg::hstack(scores_a, scores_b))?;
    Ok(BlockCorrelation {
        aa: full.view((0, 0), (da, da)).into_owned(),
        bb: full.view((da, da), (db, db)).into_owned(),
        ab: full.view((0, da), (da, db)).into_owned(),
    })
}

/// Ranks, normal scores and copula correlation of one representation.
#[derive(Debug, Clone, PartialEq)]
pub struct CopulaModel {
    pub u: DMatrix<f64>,
    pub scores: DMatrix<f64>,
    pub correlation: DMatrix<f64>,
}

impl CopulaModel {
    pub fn fit(features: &DMatrix<f64>) -> Result<Self> {
        if features.nrows() < 2 {
            return Err(Error::Validation("copula needs at least 2 rows".into()));
        }
        let u = rank_transform(features);
        let scores = normal_scores(&u)?;
        let correlation = correlation(&scores)?;
        Ok(Self {
            u,
            scores,
            correlation,
        })
    }
}

/// Empirical CDF of one reference column, interpolated linearly between
/// distinct reference values.
#[derive(Debug, Clone)]
struct ColumnCdf {
    values: Vec<f64>,
    ranks: Vec<f64>,
    scale: f64,
}

impl ColumnCdf {
    fn new(column: &[f64]) -> Self {
        let n = column.len();
        let ranks = average_ranks(column);
        let mut pairs: Vec<(f64, f64)> = column.iter().copied().zip(ranks).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.dedup_by(|a, b| a.0 == b.0);
        let (values, ranks) = pairs.into_iter().unzip();
        Self {
            values,
            ranks,
            scale: 1.0 / (n + 1) as f64,
        }
    }

    fn eval(&self, x: f64) -> f64 {
        let last = self.values.len() - 1;
        if x < self.values[0] {
            return 0.5 * self.scale;
        }
        if x > self.values[last] {
            return 1.0 - 0.5 * self.scale;
        }
        match self.values.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => self.ranks[i] * self.scale,
            Err(i) => {
                let (lo, hi) = (i - 1, i);
                let t = (x - self.values[lo]) / (self.values[hi] - self.values[lo]);
                (self.ranks[lo] + t * (self.ranks[hi] - self.ranks[lo])) * self.scale
            }
        }
    }
}

/// Maps new samples into `(0, 1)` through the per-column empirical CDF of a
/// reference matrix. Reference values map to their own scaled rank;
/// samples outside the reference range are clamped to `0.5/(N+1)` and
/// `1 - 0.5/(N+1)`.
pub fn reference_ranks(new: &DMatrix<f64>, reference: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if new.ncols() != reference.ncols() {
        return Err(Error::Dimension(format!(
            "new samples have {} columns, reference has {}",
            new.ncols(),
            reference.ncols()
        )));
    }
    if reference.nrows() == 0 {
        return Err(Error::Validation("empty reference".into()));
    }
    if new.iter().any(|x| x.is_nan()) {
        return Err(Error::Validation("NaN in new samples".into()));
    }
    let columns: Vec<Vec<f64>> = (0..new.ncols())
        .into_par_iter()
        .map(|j| {
            let reference: Vec<f64> = reference.column(j).iter().copied().collect();
            let cdf = ColumnCdf::new(&reference);
            new.column(j).iter().map(|&x| cdf.eval(x)).collect()
        })
        .collect();
    Ok(DMatrix::from_fn(new.nrows(), new.ncols(), |i, j| {
        columns[j][i]
    }))
}

/// Normal scores of new samples under a reference's empirical marginals.
pub fn reference_scores(new: &DMatrix<f64>, reference: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    normal_scores(&reference_ranks(new, reference)?)
}
