//! Synthetic representations with known geometry: exact simplex ETFs,
//! isotropic Gaussian mixtures around them, noisy invertible linear images,
//! and strictly monotone per-coordinate warps.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::repr_io::RepresentationSet;

/// Largest condition number accepted for a mixing matrix.
pub const MAX_MIXING_CONDITION: f64 = 100.0;

/// Singular values of generated mixing matrices are log-uniform on
/// `[1 / MIXING_SPREAD, MIXING_SPREAD]`.
const MIXING_SPREAD: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtfSpec {
    pub class_count: usize,
    pub ambient_dim: usize,
    pub norm: f64,
}

impl EtfSpec {
    pub fn new(class_count: usize, ambient_dim: usize, norm: f64) -> Self {
        Self {
            class_count,
            ambient_dim,
            norm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_count < 2 {
            return Err(Error::InvalidArgument(format!(
                "simplex needs at least 2 classes, got {}",
                self.class_count
            )));
        }
        if self.ambient_dim + 1 < self.class_count {
            return Err(Error::Dimension(format!(
                "a {}-simplex needs dimension >= {}, got {}",
                self.class_count,
                self.class_count - 1,
                self.ambient_dim
            )));
        }
        if !(self.norm.is_finite() && self.norm > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "vertex norm must be positive, got {}",
                self.norm
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixtureSpec {
    pub etf: EtfSpec,
    pub within_std: f64,
    pub samples_per_class: usize,
    pub seed: u64,
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<()> {
        self.etf.validate()?;
        if !(self.within_std.is_finite() && self.within_std >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "within-class std must be >= 0, got {}",
                self.within_std
            )));
        }
        if self.samples_per_class < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 samples per class, got {}",
                self.samples_per_class
            )));
        }
        Ok(())
    }
}

/// Orthonormal basis of the sum-zero subspace of R^K (Helmert contrasts),
/// as a `K x (K-1)` matrix.
fn helmert_basis(k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k, k - 1, |i, j| {
        let m = (j + 1) as f64;
        let scale = 1.0 / (m * (m + 1.0)).sqrt();
        match i.cmp(&(j + 1)) {
            std::cmp::Ordering::Less => scale,
            std::cmp::Ordering::Equal => -m * scale,
            std::cmp::Ordering::Greater => 0.0,
        }
    })
}

/// `K x d` matrix whose rows form a simplex ETF: equal norms, pairwise
/// cosine `-1/(K-1)`, embedded in `d` dimensions by a seeded Haar frame.
pub fn simplex_etf(spec: &EtfSpec, seed: u64) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let k = spec.class_count;
    // rows of sqrt(K/(K-1)) (I - J/K), expressed in the Helmert basis
    let scale = spec.norm * (k as f64 / (k - 1) as f64).sqrt();
    let coords = helmert_basis(k) * scale;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frame = linalg::haar_frame(spec.ambient_dim, k - 1, &mut rng);
    Ok(coords * frame.transpose())
}

/// Draws `n` samples per class from `N(mu_k, sigma^2 I)` around a simplex
/// ETF. Rows are grouped by class, class 0 first.
pub fn sample_mixture(spec: &MixtureSpec) -> Result<RepresentationSet> {
    spec.validate()?;
    let means = simplex_etf(&spec.etf, spec.seed)?;
    let (k, d, n) = (
        spec.etf.class_count,
        spec.etf.ambient_dim,
        spec.samples_per_class,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let mut features = DMatrix::<f64>::zeros(k * n, d);
    let mut labels = Vec::with_capacity(k * n);
    for class in 0..k {
        for s in 0..n {
            let row = class * n + s;
            for j in 0..d {
                let noise: f64 = if spec.within_std > 0.0 {
                    spec.within_std * rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                features[(row, j)] = means[(class, j)] + noise;
            }
            labels.push(class);
        }
    }
    let name = format!(
        "etf-mixture(K={k},d={d},n={n},sigma={},norm={},seed={})",
        spec.within_std, spec.etf.norm, spec.seed
    );
    RepresentationSet::new(features, labels, k, name)
}

/// Seeded `d x d` mixing matrix `U diag(s) V^T` with Haar `U`, `V` and
/// log-uniform singular values, so its condition number stays below
/// `MIXING_SPREAD^2`.
pub fn mixing_matrix(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let u = linalg::haar_frame(d, d, &mut rng);
        let v = linalg::haar_frame(d, d, &mut rng);
        let log_spread = MIXING_SPREAD.ln();
        let s = DVector::from_fn(d, |_, _| (rng.random_range(-log_spread..=log_spread)).exp());
        let cond = s.max() / s.min();
        if cond <= MAX_MIXING_CONDITION {
            return u * DMatrix::from_diagonal(&s) * v.transpose();
        }
    }
}

/// A representation and the exact map it was generated with.
#[derive(Debug, Clone)]
pub struct LinearPair {
    pub set: RepresentationSet,
    pub mixing: DMatrix<f64>,
}

/// `Z1 = Z2 A^T + xi` with a seeded invertible `A` and `xi ~ N(0, noise_std^2 I)`.
pub fn linear_pair(
    source: &RepresentationSet,
    mixing_seed: u64,
    noise_std: f64,
) -> Result<RepresentationSet> {
    Ok(linear_pair_with_map(source, mixing_seed, noise_std)?.set)
}

pub fn linear_pair_with_map(
    source: &RepresentationSet,
    mixing_seed: u64,
    noise_std: f64,
) -> Result<LinearPair> {
    if !(noise_std.is_finite() && noise_std >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise std must be >= 0, got {noise_std}"
        )));
    }
    let d = source.dim();
    let mixing = mixing_matrix(d, mixing_seed);
    let mut features = source.features() * mixing.transpose();
    if noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(mixing_seed);
        rng.set_stream(1);
        for x in features.iter_mut() {
            *x += noise_std * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let name = format!(
        "linear_pair({}, seed={mixing_seed}, noise={noise_std})",
        source.name()
    );
    Ok(LinearPair {
        set: source.with_features(features, name)?,
        mixing,
    })
}

/// Strictly increasing scalar maps applied per coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Warp {
    Exp,
    CubicPlusLinear,
    Arctan,
}

impl Warp {
    pub const ALL: [Warp; 3] = [Warp::Exp, Warp::CubicPlusLinear, Warp::Arctan];

    /// Exp is clamped to `[MIN_POSITIVE, MAX]` so no input maps to 0 or inf.
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Warp::Exp => x.exp().clamp(f64::MIN_POSITIVE, f64::MAX),
            Warp::CubicPlusLinear => x * x * x + x,
            Warp::Arctan => x.atan(),
        }
    }
}

impl fmt::Display for Warp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Warp::Exp => "exp",
            Warp::CubicPlusLinear => "cubic_plus_linear",
            Warp::Arctan => "arctan",
        })
    }
}

impl FromStr for Warp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp" => Ok(Warp::Exp),
            "cubic_plus_linear" | "cubic" => Ok(Warp::CubicPlusLinear),
            "arctan" | "atan" => Ok(Warp::Arctan),
            other => Err(Error::InvalidArgument(format!("unknown warp `{other}`"))),
        }
    }
}

pub fn monotone_warp(set: &RepresentationSet, warp: Warp) -> Result<RepresentationSet> {
    let features = set.features().map(|x| warp.apply(x));
    set.with_features(features, format!("{}|{warp}", set.name()))
}
