//! Reference mutual-information values used to cross-check the bottleneck
//! solvers: the exact Gaussian identity and an equal-frequency binned
//! estimator with Miller-Madow bias correction.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MiMethod {
    ClosedForm,
    Binned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MiEstimate {
    pub nats: f64,
    pub method: MiMethod,
    pub bins: Option<usize>,
    pub n: usize,
}

/// Plug-in entropy (nats) of a histogram with total `n`. Counts are summed
/// in sorted order so the result depends only on the multiset of counts.
pub(crate) fn entropy_from_counts(counts: &[usize], n: usize) -> f64 {
    let mut sorted: Vec<usize> = counts.iter().copied().filter(|&c| c > 0).collect();
    sorted.sort_unstable();
    let nf = n as f64;
    -sorted
        .iter()
        .map(|&c| {
            let p = c as f64 / nf;
            p * p.ln()
        })
        .sum::<f64>()
}

/// Empirical label entropy `-sum p_k ln p_k` in nats.
pub fn label_entropy(labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::InvalidArgument("label entropy of no labels".into()));
    }
    let k = labels.iter().copied().max().unwrap_or(0) + 1;
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    Ok(entropy_from_counts(&counts, labels.len()).max(0.0))
}

fn check_dims(dims: &[usize], d: usize, which: &str) -> Result<()> {
    if dims.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{which} index set is empty"
        )));
    }
    if let Some(&bad) = dims.iter().find(|&&i| i >= d) {
        return Err(Error::Dimension(format!(
            "{which} index {bad} outside a {d}-dimensional covariance"
        )));
    }
    Ok(())
}

fn principal(cov: &DMatrix<f64>, dims: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(dims.len(), dims.len(), |i, j| cov[(dims[i], dims[j])])
}

/// `I(A;B) = 1/2 ln(det S_a det S_b / det S_ab)` for jointly Gaussian blocks.
pub fn gaussian_mi_closed_form(
    joint_cov: &DMatrix<f64>,
    dims_a: &[usize],
    dims_b: &[usize],
) -> Result<MiEstimate> {
    let d = joint_cov.nrows();
    if joint_cov.ncols() != d {
        return Err(Error::Dimension("joint covariance must be square".into()));
    }
    check_dims(dims_a, d, "a")?;
    check_dims(dims_b, d, "b")?;
    if dims_a.iter().any(|i| dims_b.contains(i)) {
        return Err(Error::InvalidArgument("index sets overlap".into()));
    }
    let mut cov = joint_cov.clone();
    linalg::symmetrize(&mut cov);
    let joint: Vec<usize> = dims_a.iter().chain(dims_b).copied().collect();
    let la = linalg::log_det_spd(&principal(&cov, dims_a), "Sigma_a")?;
    let lb = linalg::log_det_spd(&principal(&cov, dims_b), "Sigma_b")?;
    let lab = linalg::log_det_spd(&principal(&cov, &joint), "Sigma_ab")?;
    Ok(MiEstimate {
        nats: (0.5 * (la + lb - lab)).max(0.0),
        method: MiMethod::ClosedForm,
        bins: None,
        n: 0,
    })
}

pub const MIN_BINS: usize = 8;
pub const MAX_BINS: usize = 64;
pub const MIN_BINNED_SAMPLES: usize = 1000;

/// Equal-frequency bin of every entry of one column. Tied values share
/// their average rank and therefore land in the same bin.
fn quantile_bins(column: &[f64], bins: usize) -> Vec<usize> {
    let n = column.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| column[a].total_cmp(&column[b]));
    let mut out = vec![0usize; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && column[order[end]] == column[order[start]] {
            end += 1;
        }
        // 0-based average position of the tie group
        let position = (start + end - 1) as f64 / 2.0;
        let bin = (((position + 0.5) * bins as f64 / n as f64) as usize).min(bins - 1);
        for &i in &order[start..end] {
            out[i] = bin;
        }
        start = end;
    }
    out
}

/// Joint cell index of every row after per-column quantile binning.
fn cells(m: &DMatrix<f64>, bins: usize) -> Vec<usize> {
    let per_column: Vec<Vec<usize>> = m
        .column_iter()
        .map(|c| quantile_bins(c.as_slice(), bins))
        .collect();
    (0..m.nrows())
        .map(|i| per_column.iter().fold(0, |acc, col| acc * bins + col[i]))
        .collect()
}

fn histogram<K: std::hash::Hash + Eq>(keys: impl Iterator<Item = K>) -> Vec<usize> {
    let mut counts: HashMap<K, usize> = HashMap::new();
    for k in keys {
        *counts.entry(k).or_insert(0) += 1;
    }
    counts.into_values().collect()
}

fn miller_madow(counts: &[usize], n: usize) -> f64 {
    entropy_from_counts(counts, n) + (counts.len() as f64 - 1.0) / (2.0 * n as f64)
}

/// Binned MI before clamping at zero.
fn binned_mi_raw(a: &DMatrix<f64>, b: &DMatrix<f64>, bins: usize) -> Result<f64> {
    let n = a.nrows();
    if b.nrows() != n {
        return Err(Error::Dimension(format!(
            "row counts differ: {n} vs {}",
            b.nrows()
        )));
    }
    if a.ncols() == 0 || b.ncols() == 0 {
        return Err(Error::InvalidArgument(
            "binned MI needs at least one column per side".into(),
        ));
    }
    if a.ncols() > 2 || b.ncols() > 2 {
        return Err(Error::Unsupported(format!(
            "binned MI supports at most 2 columns per side, got {} and {}",
            a.ncols(),
            b.ncols()
        )));
    }
    if !(MIN_BINS..=MAX_BINS).contains(&bins) {
        return Err(Error::InvalidArgument(format!(
            "bins must be in [{MIN_BINS}, {MAX_BINS}], got {bins}"
        )));
    }
    if n < MIN_BINNED_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "binned MI needs at least {MIN_BINNED_SAMPLES} samples, got {n}"
        )));
    }
    if a.iter().chain(b.iter()).any(|x| x.is_nan()) {
        return Err(Error::Validation("NaN in binned MI input".into()));
    }
    let ca = cells(a, bins);
    let cb = cells(b, bins);
    let ha = miller_madow(&histogram(ca.iter().copied()), n);
    let hb = miller_madow(&histogram(cb.iter().copied()), n);
    let hab = miller_madow(&histogram(ca.iter().copied().zip(cb.iter().copied())), n);
    Ok(ha + hb - hab)
}

/// Equal-frequency binned MI with Miller-Madow correction, clamped at 0.
///
/// Symmetric in its arguments bit for bit.
pub fn binned_mi(
    samples_a: &DMatrix<f64>,
    samples_b: &DMatrix<f64>,
    bins: usize,
) -> Result<MiEstimate> {
    let raw = binned_mi_raw(samples_a, samples_b, bins)?;
    Ok(MiEstimate {
        nats: raw.max(0.0),
        method: MiMethod::Binned,
        bins: Some(bins),
        n: samples_a.nrows(),
    })
}

/// The binned estimate before clamping, for calibrating the bias correction.
pub fn binned_mi_unclamped(
    samples_a: &DMatrix<f64>,
    samples_b: &DMatrix<f64>,
    bins: usize,
) -> Result<f64> {
    binned_mi_raw(samples_a, samples_b, bins)
}
