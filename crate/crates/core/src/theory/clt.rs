use nalgebra::DMatrix;

use super::{block_embedding, BlockEmbedding};
use crate::error::{Error, Result};
use crate::linalg::{ipq_matrix, symmetrize};
use crate::model::BlockMoments;
use crate::spectral::eig_symmetric;

/// Limit-law parameters of a weighted SBM's spectral embedding.
#[derive(Debug, Clone)]
pub struct CltParams {
    pub block: BlockEmbedding,
    /// `Δ = X_Bᵀ diag(π) X_B`
    pub delta: DMatrix<f64>,
    /// One covariance per community.
    pub sigma: Vec<DMatrix<f64>>,
}

impl CltParams {
    pub fn dim(&self) -> usize {
        self.block.dim()
    }
}

fn check_pi(pi: &[f64], k: usize) -> Result<()> {
    if pi.len() != k {
        return Err(Error::ShapeMismatch(format!(
            "{} community weights for K = {k}",
            pi.len()
        )));
    }
    if pi.iter().any(|&p| !(p >= 0.0)) || (pi.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "pi is not a probability vector: {pi:?}"
        )));
    }
    Ok(())
}

pub fn second_moment(xb: &DMatrix<f64>, pi: &[f64]) -> DMatrix<f64> {
    let d = xb.ncols();
    let mut delta = DMatrix::zeros(d, d);
    for (l, &w) in pi.iter().enumerate() {
        let row = xb.row(l);
        delta += row.transpose() * row * w;
    }
    delta
}

/// `Δ⁻¹` via eigendecomposition; a (near-)singular `Δ` means the
/// embedding dimension is not minimal for this `π`.
pub(crate) fn delta_inverse(delta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = eig_symmetric(&symmetrize(delta))?;
    let max = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min = eig.values.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    if !(min > 1e-12 * max) {
        return Err(Error::SingularSecondMoment(min));
    }
    let v = &eig.vectors;
    Ok(v * DMatrix::from_diagonal(&eig.values.map(|x| 1.0 / x)) * v.transpose())
}

fn covariance_for(
    block: &BlockEmbedding,
    c: &DMatrix<f64>,
    pi: &[f64],
    delta_inv: &DMatrix<f64>,
    k: usize,
) -> DMatrix<f64> {
    let d = block.dim();
    let mut inner = DMatrix::zeros(d, d);
    for (l, &w) in pi.iter().enumerate() {
        let row = block.x.row(l);
        inner += row.transpose() * row * (w * c[(k, l)]);
    }
    let s = ipq_matrix(block.p, block.q);
    let sigma = &s * delta_inv * inner * delta_inv * &s;
    symmetrize(&sigma)
}

/// Covariance `Σ_k` of the limiting Gaussian for community `k`.
pub fn clt_covariance(moments: &BlockMoments, pi: &[f64], k: usize) -> Result<DMatrix<f64>> {
    let params = clt_params(moments, pi)?;
    params
        .sigma
        .get(k)
        .cloned()
        .ok_or_else(|| Error::InvalidArgument(format!("community {k} out of range")))
}

pub fn clt_params(moments: &BlockMoments, pi: &[f64]) -> Result<CltParams> {
    check_pi(pi, moments.k())?;
    let block = block_embedding(&moments.b)?;
    let delta = second_moment(&block.x, pi);
    let delta_inv = delta_inverse(&delta)?;
    let sigma = (0..moments.k())
        .map(|k| covariance_for(&block, &moments.c, pi, &delta_inv, k))
        .collect();
    Ok(CltParams { block, delta, sigma })
}
