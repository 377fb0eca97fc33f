//! Symmetric eigendecomposition and adjacency spectral embedding.

mod eigen;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetrize;
use eigen::{full_decomposition, tridiagonal_inverse_iteration, tridiagonal_ql, Tridiagonal};

/// Relative threshold (against the Frobenius norm) below which an
/// eigenvalue counts as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Matrices at or below this size always use the full decomposition.
const FULL_ROUTE_MAX_N: usize = 128;

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Descending order.
    pub values: DVector<f64>,
    /// Column `i` pairs with `values[i]`.
    pub vectors: DMatrix<f64>,
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} matrix is not square",
            n,
            m.ncols()
        )));
    }
    for j in 0..n {
        for i in (j + 1)..n {
            let diff = (m[(i, j)] - m[(j, i)]).abs();
            if diff > 1e-12 * m[(i, j)].abs().max(1.0) || diff.is_nan() {
                return Err(Error::NotSymmetric { row: i, col: j, diff });
            }
        }
    }
    Ok(())
}

/// Flip `v` so that its largest-magnitude entry is positive; near-ties go
/// to the lowest index.
fn canonical_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if let Some(&lead) = v.iter().find(|x| x.abs() >= max * (1.0 - 1e-9)) {
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Full spectrum of a symmetric matrix, values descending, eigenvectors
/// sign-normalised.
pub fn eig_symmetric(m: &DMatrix<f64>) -> Result<EigenDecomposition> {
    check_symmetric(m)?;
    let n = m.nrows();
    let (values, vectors) = full_decomposition(&symmetrize(m))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let sorted_values = DVector::from_fn(n, |i, _| values[order[i]]);
    let mut sorted_vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col: Vec<f64> = vectors.column(src).iter().cloned().collect();
        canonical_sign(&mut col);
        sorted_vectors.set_column(dst, &DVector::from_vec(col));
    }
    Ok(EigenDecomposition {
        values: sorted_values,
        vectors: sorted_vectors,
    })
}

/// Spectral embedding `X = U |Λ|^{1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// n × d, positive-eigenvalue columns first.
    pub x: DMatrix<f64>,
    pub p: usize,
    pub q: usize,
    /// Eigenvalue of each column of `x`: positives by descending magnitude,
    /// then negatives by descending magnitude.
    pub eigenvalues: Vec<f64>,
}

/// Eigenvalue side-file: `{ "values": [...], "p": p, "q": q }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueFile {
    pub values: Vec<f64>,
    pub p: usize,
    pub q: usize,
}

impl Embedding {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.p + self.q
    }

    pub fn signs(&self) -> DVector<f64> {
        crate::linalg::ipq(self.p, self.q)
    }

    /// Orthonormal eigenvector matrix `U = X |Λ|^{-1/2}`.
    pub fn unit_vectors(&self) -> DMatrix<f64> {
        let mut u = self.x.clone();
        for (c, lambda) in self.eigenvalues.iter().enumerate() {
            u.column_mut(c).scale_mut(1.0 / lambda.abs().sqrt());
        }
        u
    }

    /// `X I_{p,q} Xᵀ`
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut xs = self.x.clone();
        for c in self.p..self.dim() {
            xs.column_mut(c).neg_mut();
        }
        &xs * self.x.transpose()
    }

    pub fn eigenvalue_file(&self) -> EigenvalueFile {
        EigenvalueFile {
            values: self.eigenvalues.clone(),
            p: self.p,
            q: self.q,
        }
    }

    /// Build from orthonormal columns and their eigenvalues (any order);
    /// applies the sign convention and the positives-first ordering.
    fn from_pairs(pairs: Vec<(f64, Vec<f64>)>, n: usize) -> Embedding {
        let mut pos: Vec<(f64, Vec<f64>)> = pairs.iter().filter(|(l, _)| *l > 0.0).cloned().collect();
        let mut neg: Vec<(f64, Vec<f64>)> = pairs.into_iter().filter(|(l, _)| *l <= 0.0).collect();
        pos.sort_by(|a, b| b.0.abs().total_cmp(&a.0.abs()));
        neg.sort_by(|a, b| b.0.abs().total_cmp(&a.0.abs()));
        let (p, q) = (pos.len(), neg.len());
        let mut x = DMatrix::zeros(n, p + q);
        let mut eigenvalues = Vec::with_capacity(p + q);
        for (c, (lambda, mut v)) in pos.into_iter().chain(neg).enumerate() {
            canonical_sign(&mut v);
            let s = lambda.abs().sqrt();
            for (r, vi) in v.iter().enumerate() {
                x[(r, c)] = vi * s;
            }
            eigenvalues.push(lambda);
        }
        Embedding { x, p, q, eigenvalues }
    }
}

/// Eigenvalues of a symmetric matrix (descending), without eigenvectors.
pub fn eigenvalues_symmetric(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(m)?;
    let tri = Tridiagonal::reduce(&symmetrize(m));
    let mut diag = tri.diag;
    let mut off = tri.off;
    tridiagonal_ql(&mut diag, &mut off, None)?;
    diag.sort_by(|a, b| b.total_cmp(a));
    Ok(diag)
}

/// Indices of the `d` largest-magnitude values, plus the magnitude of the
/// first excluded one.
fn top_by_magnitude(values: &[f64], d: usize) -> (Vec<usize>, Option<f64>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    let next = order.get(d).map(|&i| values[i].abs());
    order.truncate(d);
    (order, next)
}

/// Adjacency spectral embedding from the `d` largest-magnitude eigenpairs.
pub fn spectral_embed(m: &DMatrix<f64>, d: usize) -> Result<Embedding> {
    check_symmetric(m)?;
    let n = m.nrows();
    if d == 0 || d > n {
        return Err(Error::InvalidArgument(format!(
            "embedding dimension {d} not in 1..={n}"
        )));
    }
    let m = symmetrize(m);
    let threshold = RANK_TOL * m.norm();

    let pairs: Vec<(f64, Vec<f64>)> = if n <= FULL_ROUTE_MAX_N {
        let (values, vectors) = full_decomposition(&m)?;
        let (chosen, next) = top_by_magnitude(values.as_slice(), d);
        check_selection(values[chosen[d - 1]], next, d, threshold)?;
        chosen
            .into_iter()
            .map(|i| (values[i], vectors.column(i).iter().cloned().collect()))
            .collect()
    } else {
        let tri = Tridiagonal::reduce(&m);
        let mut values = tri.diag.clone();
        let mut off = tri.off.clone();
        tridiagonal_ql(&mut values, &mut off, None)?;
        let (chosen, next) = top_by_magnitude(&values, d);
        check_selection(values[chosen[d - 1]], next, d, threshold)?;
        let scale = values.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let mut found: Vec<(f64, Vec<f64>)> = Vec::with_capacity(d);
        for (rank, &i) in chosen.iter().enumerate() {
            let lambda = values[i];
            let cluster: Vec<Vec<f64>> = found
                .iter()
                .filter(|(l, _)| (l - lambda).abs() <= 1e-3 * scale)
                .map(|(_, v)| v.clone())
                .collect();
            let v = tridiagonal_inverse_iteration(&tri.diag, &tri.off, lambda, &cluster, rank);
            found.push((lambda, v));
        }
        found
            .into_iter()
            .map(|(lambda, mut v)| {
                tri.apply_q(&mut v);
                (lambda, v)
            })
            .collect()
    };
    Ok(Embedding::from_pairs(pairs, n))
}

fn check_selection(last: f64, next: Option<f64>, d: usize, threshold: f64) -> Result<()> {
    if last.abs() < threshold {
        return Err(Error::DegenerateDimension {
            requested: d,
            magnitude: last.abs(),
            threshold,
        });
    }
    if let Some(next) = next {
        if (last.abs() - next).abs() <= 1e-12 * last.abs() {
            warn!(
                "eigenvalue magnitudes {d} and {} coincide ({:e}); embedding is not unique",
                d + 1,
                next
            );
        }
    }
    Ok(())
}

/// Exact embedding of `P = X I_{p,q} Xᵀ` computed from the n × d factor
/// through d × d eigenproblems.
pub fn embed_low_rank(x: &DMatrix<f64>, p: usize, q: usize) -> Result<Embedding> {
    let (n, d) = (x.nrows(), x.ncols());
    if p + q != d {
        return Err(Error::ShapeMismatch(format!("signature ({p}, {q}) for {d} columns")));
    }
    let gram = x.transpose() * x;
    let g = eig_symmetric(&symmetrize(&gram))?;
    let gmax = g.values.iter().cloned().fold(0.0f64, f64::max);
    if g.values.iter().any(|&v| v <= 1e-12 * gmax) {
        return Err(Error::SingularLatent("XᵀX is singular".into()));
    }
    let root = &g.vectors * DMatrix::from_diagonal(&g.values.map(f64::sqrt)) * g.vectors.transpose();
    let inv_root = &g.vectors * DMatrix::from_diagonal(&g.values.map(|v| 1.0 / v.sqrt())) * g.vectors.transpose();
    let signs = crate::linalg::ipq_matrix(p, q);
    let core = eig_symmetric(&symmetrize(&(&root * signs * &root)))?;
    let u = x * inv_root * &core.vectors;
    let pairs = (0..d)
        .map(|c| (core.values[c], u.column(c).iter().cloned().collect()))
        .collect();
    Ok(Embedding::from_pairs(pairs, n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum DimensionMethod {
    Manual { d: usize },
    LargestGap { max_d: usize },
}

/// Choose an embedding dimension from a list of eigenvalues.
pub fn select_dimension(values: &[f64], method: DimensionMethod) -> usize {
    match method {
        DimensionMethod::Manual { d } => d,
        DimensionMethod::LargestGap { max_d } => {
            let mut mags: Vec<f64> = values.iter().map(|v| v.abs()).collect();
            mags.sort_by(|a, b| b.total_cmp(a));
            let limit = max_d.min(mags.len().saturating_sub(1)).max(1);
            (1..=limit)
                .max_by(|&a, &b| {
                    let ga = mags[a - 1] - mags[a];
                    let gb = mags[b - 1] - mags[b];
                    // ties resolve to the smaller dimension
                    ga.total_cmp(&gb).then(b.cmp(&a))
                })
                .unwrap_or(1)
        }
    }
}
