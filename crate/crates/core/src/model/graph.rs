use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Latent positions with the signature of the indefinite inner product
/// that reproduces the mean matrix: `P = X I_{p,q} Xᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPositions {
    pub x: DMatrix<f64>,
    pub p: usize,
    pub q: usize,
}

impl LatentPositions {
    pub fn dim(&self) -> usize {
        self.p + self.q
    }

    /// `X I_{p,q} Xᵀ`
    pub fn mean_matrix(&self) -> DMatrix<f64> {
        let mut xs = self.x.clone();
        for c in self.p..self.dim() {
            xs.column_mut(c).neg_mut();
        }
        &xs * self.x.transpose()
    }
}

/// A symmetric, hollow weighted adjacency matrix. Community labels are
/// 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    adjacency: DMatrix<f64>,
    pub labels: Option<Vec<usize>>,
    pub latent: Option<LatentPositions>,
}

impl WeightedGraph {
    /// Wrap a matrix after checking symmetry (exact) and the zero diagonal.
    pub fn new(adjacency: DMatrix<f64>) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "adjacency is {}x{}",
                n,
                adjacency.ncols()
            )));
        }
        for j in 0..n {
            if adjacency[(j, j)] != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "diagonal entry {j} is {} (graphs are hollow)",
                    adjacency[(j, j)]
                )));
            }
            for i in (j + 1)..n {
                if adjacency[(i, j)] != adjacency[(j, i)] {
                    return Err(Error::NotSymmetric {
                        row: i,
                        col: j,
                        diff: (adjacency[(i, j)] - adjacency[(j, i)]).abs(),
                    });
                }
            }
        }
        Ok(WeightedGraph {
            adjacency,
            labels: None,
            latent: None,
        })
    }

    pub(crate) fn from_parts_unchecked(
        adjacency: DMatrix<f64>,
        labels: Option<Vec<usize>>,
        latent: Option<LatentPositions>,
    ) -> Self {
        WeightedGraph {
            adjacency,
            labels,
            latent,
        }
    }

    pub fn with_labels(mut self, labels: Vec<usize>, communities: usize) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.n()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= communities) {
            return Err(Error::InvalidArgument(format!("label {bad} outside 0..{communities}")));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn into_adjacency(self) -> DMatrix<f64> {
        self.adjacency
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adjacency[(i, j)]
    }

    /// Apply `f` to every off-diagonal entry, keeping symmetry. Labels and
    /// latent positions carry over unchanged.
    pub fn try_map_weights<F>(&self, mut f: F) -> Result<WeightedGraph>
    where
        F: FnMut(usize, usize, f64) -> Result<f64>,
    {
        let n = self.n();
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in (j + 1)..n {
                let w = f(i, j, self.adjacency[(i, j)])?;
                out[(i, j)] = w;
                out[(j, i)] = w;
            }
        }
        Ok(WeightedGraph {
            adjacency: out,
            labels: self.labels.clone(),
            latent: self.latent.clone(),
        })
    }

    /// Upper-triangle entries `(i, j, w)` with `i < j`, row-major.
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n();
        (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| (i, j, self.adjacency[(i, j)])))
    }
}
