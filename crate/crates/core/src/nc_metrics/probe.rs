//! Multinomial logistic-regression probe trained with L-BFGS.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::repr_io::RepresentationSet;

pub const DEFAULT_PROBE_L2: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeOptions {
    /// Weight penalty `l2/2 * ||W||^2` (the bias is not penalized).
    pub l2: f64,
    /// Stop once the gradient norm is at most this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            l2: DEFAULT_PROBE_L2,
            tolerance: 1e-6,
            max_iterations: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeResult {
    pub predictions: Vec<usize>,
    pub accuracy: f64,
    pub train_accuracy: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

const HISTORY: usize = 10;
const ARMIJO: f64 = 1e-4;

/// Softmax cross-entropy on standardized features with a bias column.
struct Objective {
    /// `N x (d+1)`, last column all ones.
    x: DMatrix<f64>,
    labels: Vec<usize>,
    classes: usize,
    l2: f64,
}

impl Objective {
    fn dim(&self) -> usize {
        self.x.ncols() * self.classes
    }

    fn weights(&self, w: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.x.ncols(), self.classes, w.as_slice())
    }

    fn value_and_gradient(&self, w: &DVector<f64>) -> (f64, DVector<f64>) {
        let wm = self.weights(w);
        let mut logits = &self.x * &wm;
        let n = self.x.nrows() as f64;
        let mut loss = 0.0;
        for (i, mut row) in logits.row_iter_mut().enumerate() {
            let max = row.max();
            row.add_scalar_mut(-max);
            let lz = row.iter().map(|v| v.exp()).sum::<f64>().ln();
            loss += lz - row[self.labels[i]];
            row.apply(|v| *v = (*v - lz).exp());
            row[self.labels[i]] -= 1.0;
        }
        let mut grad = self.x.transpose() * logits / n;
        loss /= n;
        let bias = self.x.ncols() - 1;
        for k in 0..self.classes {
            for j in 0..bias {
                let wjk = wm[(j, k)];
                loss += 0.5 * self.l2 * wjk * wjk;
                grad[(j, k)] += self.l2 * wjk;
            }
        }
        (loss, DVector::from_column_slice(grad.as_slice()))
    }
}

fn standardizer(x: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let means: Vec<f64> = linalg::column_means(x).iter().copied().collect();
    let scales = x
        .column_iter()
        .zip(&means)
        .map(|(c, m)| {
            let var = c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.nrows() as f64;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    (means, scales)
}

fn design(x: &DMatrix<f64>, means: &[f64], scales: &[f64]) -> DMatrix<f64> {
    let d = x.ncols();
    DMatrix::from_fn(x.nrows(), d + 1, |i, j| {
        if j == d {
            1.0
        } else {
            (x[(i, j)] - means[j]) / scales[j]
        }
    })
}

fn argmax_rows(logits: &DMatrix<f64>) -> Vec<usize> {
    logits
        .row_iter()
        .map(|row| {
            let mut best = 0;
            for k in 1..row.len() {
                if row[k] > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Two-loop recursion for the L-BFGS search direction.
fn direction(
    grad: &DVector<f64>,
    history: &VecDeque<(DVector<f64>, DVector<f64>, f64)>,
) -> DVector<f64> {
    let mut q = -grad;
    let mut coeffs = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * s.dot(&q);
        q.axpy(-a, y, 1.0);
        coeffs.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        q *= s.dot(y) / y.dot(y);
    }
    for ((s, y, rho), a) in history.iter().zip(coeffs.into_iter().rev()) {
        let b = rho * y.dot(&q);
        q.axpy(a - b, s, 1.0);
    }
    q
}

/// Minimizes the objective from zero; returns weights, iterations and the
/// final gradient norm.
fn minimize(obj: &Objective, options: &ProbeOptions) -> Result<(DVector<f64>, usize, f64)> {
    let mut w = DVector::<f64>::zeros(obj.dim());
    let (mut f, mut g) = obj.value_and_gradient(&w);
    let mut history = VecDeque::with_capacity(HISTORY);
    let mut iterations = 0;
    loop {
        let gnorm = g.norm();
        if gnorm <= options.tolerance {
            return Ok((w, iterations, gnorm));
        }
        if iterations >= options.max_iterations {
            return Err(Error::Convergence {
                iterations,
                grad_norm: gnorm,
            });
        }
        let mut p = direction(&g, &history);
        let mut slope = g.dot(&p);
        if slope >= 0.0 {
            history.clear();
            p = -&g;
            slope = -gnorm * gnorm;
        }
        let mut step = if history.is_empty() {
            (1.0 / gnorm).min(1.0)
        } else {
            1.0
        };
        let accepted = loop {
            let candidate = &w + &p * step;
            let (fc, gc) = obj.value_and_gradient(&candidate);
            if fc <= f + ARMIJO * step * slope {
                break Some((candidate, fc, gc));
            }
            step *= 0.5;
            if step < 1e-20 {
                break None;
            }
        };
        let Some((next, fc, gc)) = accepted else {
            if history.is_empty() {
                return Err(Error::Convergence {
                    iterations,
                    grad_norm: gnorm,
                });
            }
            history.clear();
            continue;
        };
        let s = &next - &w;
        let y = &gc - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if history.len() == HISTORY {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        w = next;
        f = fc;
        g = gc;
        iterations += 1;
    }
}

/// Trains on `train` from zero weights and predicts `test`.
///
/// Features are standardized with the training means and deviations;
/// constant columns are left at zero. Fully deterministic.
pub fn linear_probe(
    train: &RepresentationSet,
    test: &RepresentationSet,
    options: &ProbeOptions,
) -> Result<ProbeResult> {
    if train.dim() != test.dim() {
        return Err(Error::Dimension(format!(
            "train has {} columns, test has {}",
            train.dim(),
            test.dim()
        )));
    }
    if !(options.l2 >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "l2 must be non-negative, got {}",
            options.l2
        )));
    }
    if test.class_count() > train.class_count() {
        return Err(Error::Validation(format!(
            "test has {} classes, train only {}",
            test.class_count(),
            train.class_count()
        )));
    }
    let (means, scales) = standardizer(train.features());
    let obj = Objective {
        x: design(train.features(), &means, &scales),
        labels: train.labels().to_vec(),
        classes: train.class_count(),
        l2: options.l2,
    };
    let (w, iterations, grad_norm) = minimize(&obj, options)?;
    let wm = obj.weights(&w);

    let train_pred = argmax_rows(&(&obj.x * &wm));
    let predictions = argmax_rows(&(design(test.features(), &means, &scales) * &wm));
    Ok(ProbeResult {
        accuracy: crate::identifiability::accuracy(&predictions, test.labels())?,
        train_accuracy: crate::identifiability::accuracy(&train_pred, train.labels())?,
        predictions,
        iterations,
        grad_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_matches_finite_differences() {
        let x = DMatrix::from_row_slice(
            5,
            3,
            &[
                0.1, -1.0, 1.0, 0.7, 0.3, 1.0, -0.4, 0.9, 1.0, 1.2, -0.2, 1.0, -0.8, -0.5, 1.0,
            ],
        );
        let obj = Objective {
            x,
            labels: vec![0, 1, 2, 1, 0],
            classes: 3,
            l2: 0.1,
        };
        let w = DVector::from_fn(obj.dim(), |i, _| (i as f64 * 0.37).sin());
        let (_, g) = obj.value_and_gradient(&w);
        let h = 1e-6;
        for i in 0..obj.dim() {
            let mut up = w.clone();
            up[i] += h;
            let mut down = w.clone();
            down[i] -= h;
            let fd = (obj.value_and_gradient(&up).0 - obj.value_and_gradient(&down).0) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8, "coordinate {i}");
        }
    }
}
