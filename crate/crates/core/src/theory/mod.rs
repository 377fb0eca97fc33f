//! Asymptotic quantities of weighted stochastic block models: the canonical
//! block embedding, CLT covariances, size-adjusted Chernoff information and
//! the effect of affine weight transforms.

mod chernoff;
mod clt;

pub use chernoff::{
    chernoff_ratio, closed_form_anomaly_chernoff, gaussian_chernoff, maximize_on_unit_interval, size_adjusted_chernoff,
    ChernoffMethod, ChernoffReport, PairChernoff,
};
pub use clt::{clt_covariance, clt_params, second_moment, CltParams};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::BlockMoments;
use crate::spectral::{eig_symmetric, spectral_embed, RANK_TOL};

/// Canonical latent positions: rows of `X_B = U_B |Λ_B|^{1/2}` over the
/// nonzero eigenvalues of `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockEmbedding {
    pub x: DMatrix<f64>,
    pub p: usize,
    pub q: usize,
}

impl BlockEmbedding {
    pub fn dim(&self) -> usize {
        self.p + self.q
    }
}

pub fn block_embedding(b: &DMatrix<f64>) -> Result<BlockEmbedding> {
    let (d, _, _) = signature_of(b, None)?;
    if d == 0 {
        return Err(Error::ZeroRank);
    }
    let emb = spectral_embed(b, d)?;
    Ok(BlockEmbedding {
        x: emb.x,
        p: emb.p,
        q: emb.q,
    })
}

/// `(d, p, q)`: eigenvalues above `tol`, below `-tol`, and their total.
/// The default tolerance is `1e-10 · ‖B‖_F`.
pub fn signature_of(b: &DMatrix<f64>, tol: Option<f64>) -> Result<(usize, usize, usize)> {
    let tol = tol.unwrap_or(RANK_TOL * b.norm());
    if tol < 0.0 {
        return Err(Error::InvalidArgument(format!("negative tolerance {tol}")));
    }
    let eig = eig_symmetric(b)?;
    let p = eig.values.iter().filter(|&&v| v > tol).count();
    let q = eig.values.iter().filter(|&&v| v < -tol).count();
    Ok((p + q, p, q))
}

/// Moments after the entrywise map `w ↦ a·w + b`: `B' = aB + b·11ᵀ`,
/// `C' = a²C`.
pub fn affine_block_moments(m: &BlockMoments, a: f64, b: f64) -> Result<BlockMoments> {
    if a == 0.0 || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "affine map needs finite a != 0, got a = {a}, b = {b}"
        )));
    }
    Ok(BlockMoments {
        b: m.b.map(|x| a * x + b),
        c: m.c.map(|x| a * a * x),
    })
}

/// Check eigenvalue interlacing for the rank-one update
/// `B' = aB + b·11ᵀ` (with `a, b > 0`): in ascending order,
/// `λᵢ(aB) ≤ λᵢ(B') ≤ λᵢ₊₁(aB)` and `λ_K(aB) ≤ λ_K(B')`, each to within
/// `1e-9·‖B'‖_F`.
pub fn interlacing_check(b: &DMatrix<f64>, a: f64, shift: f64) -> Result<bool> {
    if !(a > 0.0 && shift >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "interlacing needs a > 0 and b >= 0, got ({a}, {shift})"
        )));
    }
    let k = b.nrows();
    let scaled = b * a;
    let shifted = scaled.map(|x| x + shift);
    let eps = 1e-9 * shifted.norm();
    let mut lo = eig_symmetric(&scaled)?.values.as_slice().to_vec();
    let mut hi = eig_symmetric(&shifted)?.values.as_slice().to_vec();
    lo.reverse();
    hi.reverse();
    let inner = (0..k.saturating_sub(1)).all(|i| lo[i] - eps <= hi[i] && hi[i] <= lo[i + 1] + eps);
    Ok(inner && (k == 0 || lo[k - 1] - eps <= hi[k - 1]))
}
