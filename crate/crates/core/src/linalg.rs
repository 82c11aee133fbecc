//! Dense linear-algebra helpers shared by the analysis modules.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows().max(1) as f64;
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

pub fn centered(m: &DMatrix<f64>) -> DMatrix<f64> {
    let means = column_means(m);
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    out
}

/// Cross-covariance of the columns of two row-aligned matrices.
///
/// `denominator` is the sample-count divisor (`N` or `N - 1`).
pub fn cross_covariance(a: &DMatrix<f64>, b: &DMatrix<f64>, denominator: f64) -> DMatrix<f64> {
    let ca = centered(a);
    let cb = centered(b);
    (ca.transpose() * cb) / denominator
}

/// Sample covariance with the `N - 1` divisor, symmetrized.
pub fn covariance(m: &DMatrix<f64>) -> DMatrix<f64> {
    let denom = (m.nrows().max(2) - 1) as f64;
    let mut c = cross_covariance(m, m, denom);
    symmetrize(&mut c);
    c
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Shift applied by a relative ridge: `eps * trace / d`.
pub fn ridge_shift(m: &DMatrix<f64>, eps: f64) -> f64 {
    let d = m.nrows();
    if d == 0 || eps == 0.0 {
        return 0.0;
    }
    eps * m.trace() / d as f64
}

pub fn add_diagonal(m: &mut DMatrix<f64>, shift: f64) {
    if shift != 0.0 {
        for i in 0..m.nrows() {
            m[(i, i)] += shift;
        }
    }
}

pub fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone())
        .ok_or_else(|| Error::Conditioning(format!("{what} is not positive definite")))
}

/// log det of an SPD matrix via its Cholesky factor.
pub fn log_det_spd(m: &DMatrix<f64>, what: &str) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let chol = cholesky(m, what)?;
    Ok(2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|x| x.ln())
            .sum::<f64>())
}

/// Orthonormal `rows x cols` frame (`cols <= rows`) from the QR factorization
/// of a standard-normal matrix, with the signs of R's diagonal fixed positive
/// so the frame is Haar distributed.
pub fn haar_frame<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    assert!(cols <= rows, "frame needs cols <= rows");
    if cols == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let g = DMatrix::<f64>::from_fn(rows, cols, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Per-class means by running update, so a class of identical rows has
/// exactly that row as its mean. Returns the `K x d` means and class sizes.
pub fn class_means(
    features: &DMatrix<f64>,
    labels: &[usize],
    k: usize,
) -> (DMatrix<f64>, Vec<usize>) {
    let d = features.ncols();
    let mut means = DMatrix::<f64>::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        let c = counts[l] as f64;
        for j in 0..d {
            let m = means[(l, j)];
            means[(l, j)] = m + (features[(i, j)] - m) / c;
        }
    }
    (means, counts)
}

/// Rows of `m` at the given indices, in order.
pub fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

/// Horizontal concatenation of two row-aligned matrices.
pub fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    debug_assert_eq!(a.nrows(), b.nrows());
    let (n, da) = a.shape();
    DMatrix::from_fn(n, da + b.ncols(), |i, j| {
        if j < da {
            a[(i, j)]
        } else {
            b[(i, j - da)]
        }
    })
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
