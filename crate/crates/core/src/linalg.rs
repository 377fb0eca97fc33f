//! Small dense helpers built on the symmetric eigensolver.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::spectral::eig_symmetric;

/// Diagonal of `I_{p,q}`.
pub fn ipq(p: usize, q: usize) -> DVector<f64> {
    DVector::from_fn(p + q, |i, _| if i < p { 1.0 } else { -1.0 })
}

pub fn ipq_matrix(p: usize, q: usize) -> DMatrix<f64> {
    DMatrix::from_diagonal(&ipq(p, q))
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Symmetrise in place: `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Apply `f` to the eigenvalues of a symmetric matrix.
pub fn sym_function<F: Fn(f64) -> f64>(m: &DMatrix<f64>, f: F) -> Result<DMatrix<f64>> {
    let eig = eig_symmetric(&symmetrize(m))?;
    let mapped = eig.values.map(f);
    let v = &eig.vectors;
    Ok(v * DMatrix::from_diagonal(&mapped) * v.transpose())
}

/// Inverse of a symmetric positive-definite matrix through its
/// eigendecomposition. Fails when the smallest eigenvalue is at or below
/// `rel_floor · trace`.
pub fn spd_inverse(m: &DMatrix<f64>, rel_floor: f64) -> Result<DMatrix<f64>> {
    let eig = eig_symmetric(&symmetrize(m))?;
    let trace: f64 = eig.values.iter().sum();
    let floor = rel_floor * trace.abs();
    let min = eig.values.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > floor) {
        return Err(Error::Covariance(format!(
            "smallest eigenvalue {min:e} not above floor {floor:e}"
        )));
    }
    let v = &eig.vectors;
    Ok(v * DMatrix::from_diagonal(&eig.values.map(|x| 1.0 / x)) * v.transpose())
}

/// Log-determinant of a symmetric positive-definite matrix.
pub fn spd_log_det(m: &DMatrix<f64>) -> Result<f64> {
    let eig = eig_symmetric(&symmetrize(m))?;
    if eig.values.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Covariance("matrix is not positive definite".into()));
    }
    Ok(eig.values.iter().map(|x| x.ln()).sum())
}

/// Orthogonal polar factor `M (MᵀM)^{-1/2}`, i.e. `W₁W₂ᵀ` for the SVD
/// `M = W₁ Σ W₂ᵀ`. Fails when `M` is numerically rank deficient.
pub fn polar_factor(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gram = m.transpose() * m;
    let eig = eig_symmetric(&symmetrize(&gram))?;
    let max = eig.values.iter().cloned().fold(0.0f64, f64::max);
    let min = eig.values.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min <= 1e-14 * max {
        return Err(Error::AlignmentDegenerate(format!(
            "cross-Gram singular values span [{:e}, {:e}]",
            min.max(0.0).sqrt(),
            max.sqrt()
        )));
    }
    let v = &eig.vectors;
    let inv_sqrt = v * DMatrix::from_diagonal(&eig.values.map(|x| 1.0 / x.sqrt())) * v.transpose();
    Ok(m * inv_sqrt)
}
