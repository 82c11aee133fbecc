use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{copula_correlation, normal_scores, rank_transform, reference_scores};
use crate::error::{Error, Result};
use crate::gib::{
    self, GaussianJoint, GibSpectrum, InfoPoint, Projection, Target, DEFAULT_REGULARIZATION,
};
use crate::linalg;
use crate::repr_io::RepresentationSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MgibOptions {
    /// Relative ridge for both `G_ss` and the `G_rr` inverse.
    pub regularization: f64,
}

impl Default for MgibOptions {
    fn default() -> Self {
        Self {
            regularization: DEFAULT_REGULARIZATION,
        }
    }
}

/// Meta-Gaussian bottleneck fitted on a (source, relevance) pair: the
/// source is compressed, the relevance representation is what `T` must
/// stay informative about.
#[derive(Debug, Clone)]
pub struct MgibSolution {
    pub target: Target,
    pub projection: Projection,
    pub joint: GaussianJoint,
    pub spectrum: GibSpectrum,
    pub info: InfoPoint,
    /// Noise-free encoder output `scores · A^T`, `N x active_rank`.
    pub compressed: DMatrix<f64>,
    pub source_name: String,
    pub relevance_name: String,
}

impl MgibSolution {
    /// One stochastic draw `T = scores · A^T + xi`, `xi ~ N(0, I)`.
    pub fn sample_encoder(&self, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.compressed
            .map(|t| t + rng.sample::<f64, _>(StandardNormal))
    }

    pub fn report(&self) -> MgibReport {
        MgibReport {
            target: self.target,
            beta_used: self.projection.beta,
            active_rank: self.projection.active_rank,
            lambdas: self.spectrum.lambdas.clone(),
            critical_betas: self.spectrum.critical_betas(),
            alphas: self.projection.alphas.clone(),
            alphas_normalized: self.projection.alphas_normalized(),
            capped_alphas: self.projection.capped.clone(),
            i_tx_nats: self.info.i_tx,
            i_ty_nats: self.info.i_ty,
            regularization: self.joint.regularization(),
            source: self.source_name.clone(),
            relevance: self.relevance_name.clone(),
        }
    }
}

/// JSON form of an MGIB fit.
#[derive(Debug, Clone, Serialize)]
pub struct MgibReport {
    pub target: Target,
    pub beta_used: f64,
    pub active_rank: usize,
    pub lambdas: Vec<f64>,
    pub critical_betas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub alphas_normalized: Vec<f64>,
    pub capped_alphas: Vec<usize>,
    pub i_tx_nats: f64,
    pub i_ty_nats: f64,
    pub regularization: f64,
    pub source: String,
    pub relevance: String,
}

/// Builds the Gaussian joint on copula correlations,
/// `Sigma_x = G_ss`, `Sigma_{x|y} = G_ss - G_sr G_rr^{-1} G_rs`,
/// solves the bottleneck and encodes the source normal scores.
pub fn mgib_solve(
    source: &RepresentationSet,
    relevance: &RepresentationSet,
    target: Target,
    options: &MgibOptions,
) -> Result<MgibSolution> {
    if source.len() != relevance.len() {
        return Err(Error::Dimension(format!(
            "source has {} rows, relevance has {}",
            source.len(),
            relevance.len()
        )));
    }
    let scores_s = normal_scores(&rank_transform(source.features()))?;
    let scores_r = normal_scores(&rank_transform(relevance.features()))?;
    let g = copula_correlation(&scores_s, &scores_r)?;

    let mut g_rr = g.bb.clone();
    let shift = linalg::ridge_shift(&g_rr, options.regularization);
    linalg::add_diagonal(&mut g_rr, shift);
    let chol = linalg::cholesky(&g_rr, "G_rr")?;
    let half = chol
        .l_dirty()
        .solve_lower_triangular(&g.ab.transpose())
        .ok_or_else(|| Error::Conditioning("G_rr is singular".into()))?;
    let mut conditional = &g.aa - half.transpose() * half;
    linalg::symmetrize(&mut conditional);

    let joint = GaussianJoint::new(g.aa, conditional, options.regularization)?;
    let spectrum = gib::gib_spectrum(&joint)?;
    let projection = gib::rank_for_target(&spectrum, &joint, target)?;
    let info = gib::gaussian_info(&projection, &joint)?;
    let compressed = &scores_s * projection.matrix_a.transpose();
    Ok(MgibSolution {
        target,
        projection,
        joint,
        spectrum,
        info,
        compressed,
        source_name: source.name().to_string(),
        relevance_name: relevance.name().to_string(),
    })
}

/// Encodes out-of-sample rows with a fitted solution, using the training
/// source's empirical marginals.
pub fn apply_projection(
    solution: &MgibSolution,
    new_set: &RepresentationSet,
    reference_set: &RepresentationSet,
) -> Result<DMatrix<f64>> {
    let d = solution.projection.matrix_a.ncols();
    if reference_set.dim() != d || new_set.dim() != d {
        return Err(Error::Dimension(format!(
            "projection expects {d} columns; reference has {}, new set has {}",
            reference_set.dim(),
            new_set.dim()
        )));
    }
    if reference_set.len() != solution.compressed.nrows() {
        return Err(Error::Dimension(format!(
            "reference has {} rows but the solution was fitted on {}",
            reference_set.len(),
            solution.compressed.nrows()
        )));
    }
    let scores = reference_scores(new_set.features(), reference_set.features())?;
    Ok(scores * solution.projection.matrix_a.transpose())
}
