//! Neural-collapse geometry of labelled representations.
//!
//! NC1 compares within-class to between-class scatter, the equinorm and
//! equiangularity statistics describe how close the centered class means
//! are to a simplex equiangular tight frame, and NC4 checks whether a
//! trained linear probe behaves like a nearest-class-mean rule. Scatter
//! matrices use the `1/N` divisor so that `Sigma_W + Sigma_B` is exactly
//! the (biased) total covariance.

mod probe;
mod supcon;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info_oracle::{entropy_from_counts, label_entropy};
use crate::linalg;
use crate::repr_io::{split_train_test, RepresentationSet};

pub use probe::{linear_probe, ProbeOptions, ProbeResult, DEFAULT_PROBE_L2};
pub use supcon::supcon_loss;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassStatistics {
    /// `K x d`, one mean per row.
    pub means: DMatrix<f64>,
    pub global_mean: DVector<f64>,
    pub within: DMatrix<f64>,
    pub between: DMatrix<f64>,
    pub counts: Vec<usize>,
}

pub fn class_statistics(set: &RepresentationSet) -> ClassStatistics {
    let x = set.features();
    let (n, d) = x.shape();
    let nf = n as f64;
    let (means, counts) = linalg::class_means(x, set.labels(), set.class_count());
    let global_mean = linalg::column_means(x);

    let mut residual = x.clone();
    for (i, &l) in set.labels().iter().enumerate() {
        let mut row = residual.row_mut(i);
        row -= means.row(l);
    }
    let mut within = residual.transpose() * &residual / nf;
    linalg::symmetrize(&mut within);

    let mut between = DMatrix::<f64>::zeros(d, d);
    for (k, &c) in counts.iter().enumerate() {
        let diff = means.row(k).transpose() - &global_mean;
        between += (&diff * diff.transpose()) * (c as f64 / nf);
    }
    linalg::symmetrize(&mut between);

    ClassStatistics {
        means,
        global_mean,
        within,
        between,
        counts,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Nc1Variant {
    /// `Tr(Sigma_W) / Tr(Sigma_B)`.
    #[default]
    TraceRatio,
    /// `Tr(Sigma_W Sigma_B^+) / K`.
    Pseudoinverse,
}

impl std::str::FromStr for Nc1Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trace-ratio" | "trace" => Ok(Self::TraceRatio),
            "pseudoinverse" | "pinv" => Ok(Self::Pseudoinverse),
            other => Err(Error::InvalidArgument(format!(
                "unknown NC1 variant `{other}` (expected trace-ratio or pseudoinverse)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct NcOptions {
    pub nc1_variant: Nc1Variant,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NcReport {
    pub class_count: usize,
    pub equinorm_std: f64,
    pub angle_std_deg: f64,
    pub mean_cos: f64,
    pub target_cos: f64,
    pub nc1: f64,
    pub nc1_variant: Nc1Variant,
    pub ncm_accuracy: f64,
    pub nc4_agreement: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairAngle {
    pub class_a: usize,
    pub class_b: usize,
    pub cos: f64,
    pub angle_deg: f64,
}

fn centered_means(means: &DMatrix<f64>, global_mean: &DVector<f64>) -> DMatrix<f64> {
    let mut out = means.clone();
    for mut row in out.row_iter_mut() {
        row -= global_mean.transpose();
    }
    out
}

fn pair_angles_of(centered: &DMatrix<f64>) -> Vec<PairAngle> {
    let k = centered.nrows();
    let norms: Vec<f64> = centered.row_iter().map(|r| r.norm()).collect();
    let mut out = Vec::with_capacity(k * k.saturating_sub(1) / 2);
    for a in 0..k {
        for b in (a + 1)..k {
            let denom = norms[a] * norms[b];
            let cos = if denom > 0.0 {
                (centered.row(a).dot(&centered.row(b)) / denom).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            out.push(PairAngle {
                class_a: a,
                class_b: b,
                cos,
                angle_deg: cos.acos().to_degrees(),
            });
        }
    }
    out
}

/// Angles between every pair of centered class means, `a < b`.
pub fn pairwise_angles(set: &RepresentationSet) -> Vec<PairAngle> {
    let (means, _) = linalg::class_means(set.features(), set.labels(), set.class_count());
    let global = linalg::column_means(set.features());
    pair_angles_of(&centered_means(&means, &global))
}

fn trace_within(set: &RepresentationSet, means: &DMatrix<f64>) -> f64 {
    let x = set.features();
    let total: f64 = set
        .labels()
        .iter()
        .enumerate()
        .map(|(i, &l)| (x.row(i) - means.row(l)).norm_squared())
        .sum();
    total / set.len() as f64
}

fn trace_between(centered: &DMatrix<f64>, counts: &[usize], n: usize) -> f64 {
    counts
        .iter()
        .enumerate()
        .map(|(k, &c)| centered.row(k).norm_squared() * c as f64)
        .sum::<f64>()
        / n as f64
}

fn pseudoinverse_nc1(stats: &ClassStatistics) -> f64 {
    let eig = stats.between.clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b));
    if top <= 0.0 {
        return if stats.within.trace() > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
    }
    let cutoff = top * 1e-10;
    let d = stats.between.nrows();
    let mut pinv = DMatrix::<f64>::zeros(d, d);
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev > cutoff {
            let v = eig.eigenvectors.column(i);
            pinv += (v * v.transpose()) / ev;
        }
    }
    (&stats.within * pinv).trace().max(0.0) / stats.counts.len() as f64
}

pub fn nc_report(
    set: &RepresentationSet,
    probe_predictions: Option<&[usize]>,
    options: &NcOptions,
) -> Result<NcReport> {
    let k = set.class_count();
    if k < 2 {
        return Err(Error::Validation(
            "NC metrics need at least 2 classes".into(),
        ));
    }
    let x = set.features();
    let (means, counts) = linalg::class_means(x, set.labels(), k);
    let global = linalg::column_means(x);
    let centered = centered_means(&means, &global);

    let norms: Vec<f64> = centered.row_iter().map(|r| r.norm()).collect();
    let (norm_mean, norm_std) = linalg::mean_std(&norms);
    let equinorm_std = if norm_mean > 0.0 {
        norm_std / norm_mean
    } else {
        0.0
    };

    let pairs = pair_angles_of(&centered);
    let cosines: Vec<f64> = pairs.iter().map(|p| p.cos).collect();
    let angles: Vec<f64> = pairs.iter().map(|p| p.angle_deg).collect();
    let (mean_cos, _) = linalg::mean_std(&cosines);
    let (_, angle_std_deg) = linalg::mean_std(&angles);

    let nc1 = match options.nc1_variant {
        Nc1Variant::TraceRatio => {
            let tw = trace_within(set, &means);
            let tb = trace_between(&centered, &counts, set.len());
            if tb > 0.0 {
                tw / tb
            } else if tw > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        }
        Nc1Variant::Pseudoinverse => pseudoinverse_nc1(&class_statistics(set)),
    };

    let ncm = NearestClassMean::from_means(means);
    let ncm_predictions = ncm.predict(x)?;
    let ncm_accuracy = crate::identifiability::accuracy(&ncm_predictions, set.labels())?;
    let nc4_agreement = match probe_predictions {
        None => None,
        Some(p) => {
            if p.len() != set.len() {
                return Err(Error::Dimension(format!(
                    "{} probe predictions for {} samples",
                    p.len(),
                    set.len()
                )));
            }
            crate::identifiability::accuracy(p, &ncm_predictions).ok()
        }
    };

    Ok(NcReport {
        class_count: k,
        equinorm_std,
        angle_std_deg,
        mean_cos,
        target_cos: -1.0 / (k as f64 - 1.0),
        nc1,
        nc1_variant: options.nc1_variant,
        ncm_accuracy,
        nc4_agreement,
    })
}

/// Nearest-class-mean rule; ties go to the smallest class index.
#[derive(Debug, Clone, PartialEq)]
pub struct NearestClassMean {
    means: DMatrix<f64>,
}

impl NearestClassMean {
    pub fn fit(train: &RepresentationSet) -> Self {
        let (means, _) = linalg::class_means(train.features(), train.labels(), train.class_count());
        Self { means }
    }

    pub fn from_means(means: DMatrix<f64>) -> Self {
        Self { means }
    }

    pub fn means(&self) -> &DMatrix<f64> {
        &self.means
    }

    pub fn predict(&self, features: &DMatrix<f64>) -> Result<Vec<usize>> {
        if features.ncols() != self.means.ncols() {
            return Err(Error::Dimension(format!(
                "features have {} columns, class means have {}",
                features.ncols(),
                self.means.ncols()
            )));
        }
        Ok((0..features.nrows())
            .into_par_iter()
            .map(|i| {
                let row = features.row(i);
                let mut best = 0;
                let mut best_dist = f64::INFINITY;
                for (k, mean) in self.means.row_iter().enumerate() {
                    let dist = (row - mean).norm_squared();
                    if dist < best_dist {
                        best = k;
                        best_dist = dist;
                    }
                }
                best
            })
            .collect())
    }
}

pub fn ncm_classify(train: &RepresentationSet, test_features: &DMatrix<f64>) -> Result<Vec<usize>> {
    NearestClassMean::fit(train).predict(test_features)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IbGapOptions {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for IbGapOptions {
    fn default() -> Self {
        Self {
            train_fraction: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IbGap {
    pub label_entropy_nats: f64,
    pub mutual_info_nats: f64,
    pub delta: f64,
}

/// `H(Y)` from the label frequencies and `I(Z;Y)` as the plug-in mutual
/// information of the held-out NCM confusion matrix, capped at `H(Y)`.
pub fn ib_gap(set: &RepresentationSet, options: &IbGapOptions) -> Result<IbGap> {
    let h = label_entropy(set.labels())?;
    let (train, test) = split_train_test(set, options.train_fraction, options.seed)?;
    let predicted = ncm_classify(&train, test.features())?;
    let k = set.class_count();
    let n = test.len();

    let mut joint = vec![0usize; k * k];
    let mut truth = vec![0usize; k];
    let mut guess = vec![0usize; k];
    for (&y, &p) in test.labels().iter().zip(&predicted) {
        joint[y * k + p] += 1;
        truth[y] += 1;
        guess[p] += 1;
    }
    let mi = entropy_from_counts(&truth, n) + entropy_from_counts(&guess, n)
        - entropy_from_counts(&joint, n);
    let mi = mi.clamp(0.0, h);
    Ok(IbGap {
        label_entropy_nats: h,
        mutual_info_nats: mi,
        delta: h - mi,
    })
}
