//! Oracle alignment of a sample embedding onto the latent positions.
//!
//! The embedding of `A` is only identified up to an indefinite orthogonal
//! map. With the latent positions known (simulation), the map is
//! `Q_n = Wᵀ Q_X⁻¹`: `W` solves the one-mode Procrustes problem between
//! the eigenvector bases of `P` and `A`, and `Q_X` carries the latent
//! positions onto the embedding of `P`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{ipq_matrix, max_abs, polar_factor, spd_inverse};
use crate::model::LatentPositions;
use crate::spectral::Embedding;

/// A d × d matrix in the indefinite orthogonal group `O(p, q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndefiniteMap {
    pub matrix: DMatrix<f64>,
    pub p: usize,
    pub q: usize,
}

impl IndefiniteMap {
    /// `‖Q I_{p,q} Qᵀ − I_{p,q}‖_max`
    pub fn group_defect(&self) -> f64 {
        let s = ipq_matrix(self.p, self.q);
        max_abs(&(&self.matrix * &s * self.matrix.transpose() - &s))
    }

    /// `Q⁻¹ = I_{p,q} Qᵀ I_{p,q}`
    pub fn inverse(&self) -> IndefiniteMap {
        let s = ipq_matrix(self.p, self.q);
        IndefiniteMap {
            matrix: &s * self.matrix.transpose() * &s,
            p: self.p,
            q: self.q,
        }
    }
}

fn check_orthonormal(u: &DMatrix<f64>, name: &str) -> Result<()> {
    let d = u.ncols();
    let defect = max_abs(&(u.transpose() * u - DMatrix::identity(d, d)));
    if defect > 1e-8 {
        return Err(Error::InvalidArgument(format!(
            "{name} columns are not orthonormal (defect {defect:e})"
        )));
    }
    Ok(())
}

/// `W = W₁W₂ᵀ` from the SVD of `U_PᵀU_A + I_{p,q} U_PᵀU_A I_{p,q}`.
pub fn procrustes_w(u_p: &DMatrix<f64>, u_a: &DMatrix<f64>, p: usize, q: usize) -> Result<IndefiniteMap> {
    let d = p + q;
    if u_p.shape() != u_a.shape() || u_p.ncols() != d {
        return Err(Error::ShapeMismatch(format!(
            "U_P {:?}, U_A {:?}, signature ({p}, {q})",
            u_p.shape(),
            u_a.shape()
        )));
    }
    check_orthonormal(u_p, "U_P")?;
    check_orthonormal(u_a, "U_A")?;
    let cross = u_p.transpose() * u_a;
    let s = ipq_matrix(p, q);
    let target = &cross + &s * &cross * &s;
    let w = polar_factor(&target)?;
    Ok(IndefiniteMap { matrix: w, p, q })
}

/// `Q_X = (XᵀX)⁻¹ Xᵀ X_P`, the map with `X Q_X = X_P`.
pub fn latent_map(x: &DMatrix<f64>, x_p: &DMatrix<f64>, p: usize, q: usize) -> Result<IndefiniteMap> {
    if x.shape() != x_p.shape() || x.ncols() != p + q {
        return Err(Error::ShapeMismatch(format!(
            "X {:?}, X_P {:?}, signature ({p}, {q})",
            x.shape(),
            x_p.shape()
        )));
    }
    let s = ipq_matrix(p, q);
    // ‖X S Xᵀ − Y S Yᵀ‖_F² through d × d Gram matrices
    let gxx = x.transpose() * x;
    let gyy = x_p.transpose() * x_p;
    let gxy = x.transpose() * x_p;
    let a = (&s * &gxx * &s * &gxx).trace();
    let b = (&s * &gxy * &s * gxy.transpose()).trace();
    let c = (&s * &gyy * &s * &gyy).trace();
    let mismatch = (a - 2.0 * b + c).max(0.0).sqrt();
    if mismatch > 1e-6 * c.sqrt().max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidArgument(format!(
            "X and X_P generate different mean matrices (relative gap {:e})",
            mismatch / c.sqrt()
        )));
    }
    let inv = spd_inverse(&gxx, 1e-12).map_err(|_| Error::SingularLatent("XᵀX is not invertible".into()))?;
    Ok(IndefiniteMap {
        matrix: inv * gxy,
        p,
        q,
    })
}

#[derive(Debug, Clone)]
pub struct OracleAlignment {
    /// `Q_n = Wᵀ Q_X⁻¹`
    pub q_n: IndefiniteMap,
    pub w: IndefiniteMap,
    pub q_x: IndefiniteMap,
    /// `X_A Q_n`
    pub aligned: DMatrix<f64>,
}

/// Align the embedding of `A` onto the latent positions using the
/// embedding of `P` as the bridge.
pub fn oracle_align(emb_a: &Embedding, emb_p: &Embedding, latent: &LatentPositions) -> Result<OracleAlignment> {
    if (emb_a.p, emb_a.q) != (emb_p.p, emb_p.q) || (emb_p.p, emb_p.q) != (latent.p, latent.q) {
        return Err(Error::ShapeMismatch(format!(
            "signatures differ: A ({}, {}), P ({}, {}), latent ({}, {})",
            emb_a.p, emb_a.q, emb_p.p, emb_p.q, latent.p, latent.q
        )));
    }
    let (p, q) = (latent.p, latent.q);
    let w = procrustes_w(&emb_p.unit_vectors(), &emb_a.unit_vectors(), p, q)?;
    let q_x = latent_map(&latent.x, &emb_p.x, p, q)?;
    let q_n = IndefiniteMap {
        matrix: w.matrix.transpose() * q_x.inverse().matrix,
        p,
        q,
    };
    let aligned = &emb_a.x * &q_n.matrix;
    Ok(OracleAlignment { q_n, w, q_x, aligned })
}

/// `max_i ‖(Y − X)_i‖₂`
pub fn two_to_infinity(y: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<f64> {
    if y.shape() != x.shape() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", y.shape(), x.shape())));
    }
    let diff = y - x;
    Ok(diff.row_iter().map(|r| r.norm()).fold(0.0f64, f64::max))
}
