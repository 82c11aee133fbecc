use nalgebra::DMatrix;

use crate::error::{Error, Result};

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Supervised contrastive loss of a batch, summed over anchors.
///
/// Rows are scaled to unit length first, so every similarity lies in
/// `[-1, 1]`. For anchor `i` the positives are the other rows with the same
/// label and the contrast set is every row except `i`.
pub fn supcon_loss(embeddings: &DMatrix<f64>, labels: &[usize]) -> Result<f64> {
    let n = embeddings.nrows();
    if labels.len() != n {
        return Err(Error::Dimension(format!(
            "{} labels for {n} embeddings",
            labels.len()
        )));
    }
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "contrastive batch needs at least 3 rows, got {n}"
        )));
    }
    let mut z = embeddings.clone();
    for (i, mut row) in z.row_iter_mut().enumerate() {
        let norm = row.norm();
        if !norm.is_finite() {
            return Err(Error::Validation(format!("embedding {i} is not finite")));
        }
        if norm == 0.0 {
            return Err(Error::Domain(format!("embedding {i} has zero norm")));
        }
        row /= norm;
    }
    let sim = &z * z.transpose();

    let mut total = 0.0;
    for i in 0..n {
        let positives: Vec<usize> = (0..n)
            .filter(|&j| j != i && labels[j] == labels[i])
            .collect();
        if positives.is_empty() {
            return Err(Error::Validation(format!(
                "anchor {i} (label {}) has no positive in the batch",
                labels[i]
            )));
        }
        let contrast = log_sum_exp((0..n).filter(|&a| a != i).map(|a| sim[(i, a)]));
        let positive = log_sum_exp(positives.iter().map(|&p| sim[(i, p)]));
        total += contrast - positive + (positives.len() as f64).ln();
    }
    Ok(total)
}
