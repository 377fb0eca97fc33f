//! Gaussian mixture clustering of embeddings, community-recovery scores
//! and empirical checks of the embedding's limiting distribution.

mod gmm;

pub use gmm::{fit_gmm, fit_gmm_from_responsibilities, responsibilities_from_labels, GmmFit, GmmOptions};

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::spd_inverse;
use crate::special::chi2_quantile;
use crate::theory::CltParams;

fn choose2(m: f64) -> f64 {
    m * (m - 1.0) / 2.0
}

/// Adjusted Rand index between two labelings of the same points.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "labelings of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument("adjusted Rand index of zero points".into()));
    }
    let mut table: HashMap<(usize, usize), f64> = HashMap::new();
    let mut rows: HashMap<usize, f64> = HashMap::new();
    let mut cols: HashMap<usize, f64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1.0;
        *rows.entry(x).or_default() += 1.0;
        *cols.entry(y).or_default() += 1.0;
    }
    let index: f64 = table.values().map(|&m| choose2(m)).sum();
    let sa: f64 = rows.values().map(|&m| choose2(m)).sum();
    let sb: f64 = cols.values().map(|&m| choose2(m)).sum();
    let expected = sa * sb / choose2(a.len() as f64).max(1.0);
    let max = 0.5 * (sa + sb);
    if max == expected {
        // both labelings trivial (one cluster, or all singletons)
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Limit-law diagnostics for one community.
#[derive(Debug, Clone, Serialize)]
pub struct CommunityClt {
    pub community: usize,
    pub count: usize,
    /// Mean of `√n (Ŷ_i − X_i)` over the community
    pub mean: Vec<f64>,
    /// Sample covariance of the same residuals
    pub covariance: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
    /// `‖S − Σ_k‖_F / ‖Σ_k‖_F`
    pub relative_frobenius: f64,
    /// Fraction of residuals inside the 95% ellipsoid of `Σ_k`
    pub coverage_95: f64,
    pub max_residual_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CltReport {
    pub n: usize,
    pub dim: usize,
    pub communities: Vec<CommunityClt>,
    /// Communities with fewer than `d + 1` members
    pub skipped: Vec<usize>,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Compare scaled residuals `√n (aligned − latent)` per community with
/// the limiting covariances.
pub fn clt_check(
    aligned: &DMatrix<f64>,
    latent: &DMatrix<f64>,
    labels: &[usize],
    params: &CltParams,
) -> Result<CltReport> {
    let (n, d) = aligned.shape();
    if latent.shape() != (n, d) || labels.len() != n || d != params.dim() {
        return Err(Error::ShapeMismatch(format!(
            "aligned {:?}, latent {:?}, {} labels, limit dimension {}",
            aligned.shape(),
            latent.shape(),
            labels.len(),
            params.dim()
        )));
    }
    let k = params.sigma.len();
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::IndexOutOfRange { index: bad, n: k });
    }
    let resid = (aligned - latent) * (n as f64).sqrt();
    let threshold = chi2_quantile(0.95, d);
    let mut communities = Vec::new();
    let mut skipped = Vec::new();
    for c in 0..k {
        let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
        if members.len() < d + 1 {
            log::info!("community {c} has {} members; skipped", members.len());
            skipped.push(c);
            continue;
        }
        let m = members.len() as f64;
        let r = DMatrix::from_fn(members.len(), d, |i, j| resid[(members[i], j)]);
        let mean = r.row_sum() / m;
        let centered = DMatrix::from_fn(members.len(), d, |i, j| r[(i, j)] - mean[j]);
        let cov = centered.tr_mul(&centered) / (m - 1.0);
        let sigma = &params.sigma[c];
        let inv = spd_inverse(sigma, 1e-12)?;
        let inside = r
            .row_iter()
            .filter(|row| (row * &inv * row.transpose())[(0, 0)] <= threshold)
            .count();
        communities.push(CommunityClt {
            community: c,
            count: members.len(),
            mean: mean.iter().copied().collect(),
            covariance: rows_of(&cov),
            sigma: rows_of(sigma),
            relative_frobenius: (&cov - sigma).norm() / sigma.norm(),
            coverage_95: inside as f64 / m,
            max_residual_norm: r.row_iter().map(|row| row.norm()).fold(0.0, f64::max),
        });
    }
    Ok(CltReport {
        n,
        dim: d,
        communities,
        skipped,
    })
}
