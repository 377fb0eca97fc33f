//! Weighted stochastic block models and graph sampling.

mod dist;
mod graph;

pub(crate) use dist::sample_poisson;
pub use dist::WeightDistribution;
pub use graph::{LatentPositions, WeightedGraph};

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{edge_rng, label_rng};
use crate::theory::block_embedding;

/// `K` communities with membership probabilities `pi` and a symmetric
/// matrix of edge-weight distributions `H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBlockModel", into = "RawBlockModel")]
pub struct BlockModel {
    pi: Vec<f64>,
    h: Vec<Vec<WeightDistribution>>,
}

#[derive(Serialize, Deserialize)]
struct RawBlockModel {
    #[serde(rename = "K")]
    k: usize,
    pi: Vec<f64>,
    #[serde(rename = "H")]
    h: Vec<Vec<WeightDistribution>>,
}

impl TryFrom<RawBlockModel> for BlockModel {
    type Error = Error;

    fn try_from(raw: RawBlockModel) -> Result<Self> {
        if raw.pi.len() != raw.k {
            return Err(Error::InvalidModel(format!(
                "K = {} but pi has {} entries",
                raw.k,
                raw.pi.len()
            )));
        }
        BlockModel::new(raw.pi, raw.h)
    }
}

impl From<BlockModel> for RawBlockModel {
    fn from(m: BlockModel) -> Self {
        RawBlockModel {
            k: m.pi.len(),
            pi: m.pi,
            h: m.h,
        }
    }
}

impl BlockModel {
    pub fn new(pi: Vec<f64>, h: Vec<Vec<WeightDistribution>>) -> Result<Self> {
        let k = pi.len();
        if k == 0 {
            return Err(Error::InvalidModel("no communities".into()));
        }
        if pi.iter().any(|&p| !(p.is_finite() && p >= 0.0)) {
            return Err(Error::InvalidModel(format!("pi has negative entries: {pi:?}")));
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!("pi sums to {total}, not 1")));
        }
        if h.len() != k || h.iter().any(|row| row.len() != k) {
            return Err(Error::InvalidModel(format!("H must be {k}x{k}")));
        }
        for (a, row) in h.iter().enumerate() {
            for (b, dist) in row.iter().enumerate() {
                dist.validate()
                    .map_err(|e| Error::InvalidModel(format!("H[{a}][{b}]: {e}")))?;
                if *dist != h[b][a] {
                    return Err(Error::InvalidModel(format!("H[{a}][{b}] differs from H[{b}][{a}]")));
                }
            }
        }
        Ok(BlockModel { pi, h })
    }

    /// Two communities with blocks `h11`, `h22` and shared off-diagonal `h12`.
    pub fn two_block(
        pi1: f64,
        h11: WeightDistribution,
        h12: WeightDistribution,
        h22: WeightDistribution,
    ) -> Result<Self> {
        BlockModel::new(vec![pi1, 1.0 - pi1], vec![vec![h11, h12.clone()], vec![h12, h22]])
    }

    pub fn k(&self) -> usize {
        self.pi.len()
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn h(&self, k: usize, l: usize) -> &WeightDistribution {
        &self.h[k][l]
    }

    /// Analytic block mean and variance matrices.
    pub fn block_moments(&self) -> BlockMoments {
        let k = self.k();
        let mut b = DMatrix::zeros(k, k);
        let mut c = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                let (m, v) = self.h[i][j].moments();
                b[(i, j)] = m;
                c[(i, j)] = v;
            }
        }
        BlockMoments { b, c }
    }

    /// Draw a graph on `n` nodes. Labels are i.i.d. from `pi`; each edge
    /// weight comes from its own random stream, so the output depends only
    /// on `(self, n, seed)`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<WeightedGraph> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("need n >= 2, got {n}")));
        }
        let labels = self.sample_labels(n, seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                ((i + 1)..n)
                    .map(|j| {
                        let mut rng = edge_rng(seed, i, j);
                        self.h[labels[i]][labels[j]].sample(&mut rng)
                    })
                    .collect()
            })
            .collect();
        let mut a = DMatrix::zeros(n, n);
        for (i, row) in rows.into_iter().enumerate() {
            for (off, w) in row.into_iter().enumerate() {
                let j = i + 1 + off;
                a[(i, j)] = w;
                a[(j, i)] = w;
            }
        }
        let latent = self.latent_positions(&labels);
        Ok(WeightedGraph::from_parts_unchecked(a, Some(labels), latent))
    }

    pub fn sample_labels(&self, n: usize, seed: u64) -> Vec<usize> {
        sample_labels(&self.pi, n, seed)
    }

    /// Rows `φ(z_i)` of the canonical block embedding, or `None` when the
    /// block mean matrix is zero.
    pub fn latent_positions(&self, labels: &[usize]) -> Option<LatentPositions> {
        let be = block_embedding(&self.block_moments().b).ok()?;
        let d = be.dim();
        let x = DMatrix::from_fn(labels.len(), d, |i, c| be.x[(labels[i], c)]);
        Some(LatentPositions { x, p: be.p, q: be.q })
    }
}

/// Block mean (`b`) and block variance (`c`) matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMoments {
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl BlockMoments {
    pub fn new(b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let k = b.nrows();
        if b.ncols() != k || c.nrows() != k || c.ncols() != k {
            return Err(Error::ShapeMismatch("B and C must both be KxK".into()));
        }
        for i in 0..k {
            for j in 0..k {
                if b[(i, j)] != b[(j, i)] || c[(i, j)] != c[(j, i)] {
                    return Err(Error::InvalidModel(format!("B or C asymmetric at ({i}, {j})")));
                }
                if !(c[(i, j)] >= 0.0) {
                    return Err(Error::InvalidModel(format!("negative variance C[{i}][{j}]")));
                }
            }
        }
        Ok(BlockMoments { b, c })
    }

    pub fn k(&self) -> usize {
        self.b.nrows()
    }

    /// The two-community structure `B = [[b1, b2], [b2, b2]]`,
    /// `C = [[c1, c2], [c2, c2]]`.
    pub fn anomaly_structure(b1: f64, b2: f64, c1: f64, c2: f64) -> Self {
        BlockMoments {
            b: DMatrix::from_row_slice(2, 2, &[b1, b2, b2, b2]),
            c: DMatrix::from_row_slice(2, 2, &[c1, c2, c2, c2]),
        }
    }
}

/// `n` i.i.d. draws from the categorical distribution `pi`, on the label
/// stream of `seed`.
pub(crate) fn sample_labels(pi: &[f64], n: usize, seed: u64) -> Vec<usize> {
    let mut rng = label_rng(seed);
    let last = pi.len() - 1;
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            for (k, &p) in pi.iter().enumerate() {
                acc += p;
                if u < acc {
                    return k;
                }
            }
            last
        })
        .collect()
}

/// Mean and variance of a single distribution.
pub fn moments(dist: &WeightDistribution) -> (f64, f64) {
    dist.moments()
}
