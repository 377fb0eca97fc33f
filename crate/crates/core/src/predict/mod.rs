//! Edge-weight prediction from embeddings: low-rank predictors, hybrid
//! predictors that fall back on the embedding only for unseen pairs, and
//! rank-correlation scoring.

mod two_day;

pub use two_day::{two_day_counts, TwoDay, TwoDayConfig};

use std::collections::HashSet;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::WeightedGraph;
use crate::rng::aux_rng;
use crate::spectral::Embedding;

/// `raw_*` use the embedding alone; `hybrid_*` pass through day-0 values
/// where the pair was seen. Magnitude modes work on `ln(count)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictMode {
    RawCount,
    Magnitude,
    HybridCount,
    HybridMagnitude,
}

impl PredictMode {
    pub fn is_magnitude(self) -> bool {
        matches!(self, PredictMode::Magnitude | PredictMode::HybridMagnitude)
    }

    pub fn is_hybrid(self) -> bool {
        matches!(self, PredictMode::HybridCount | PredictMode::HybridMagnitude)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub i: usize,
    pub j: usize,
    pub predicted: f64,
    pub observed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionSet {
    pub mode: PredictMode,
    pub pairs: Vec<Prediction>,
}

impl PredictionSet {
    /// Checks `i < j` and that no pair repeats.
    pub fn new(mode: PredictMode, pairs: Vec<Prediction>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(pairs.len());
        for p in &pairs {
            if p.i >= p.j {
                return Err(Error::InvalidArgument(format!(
                    "pair ({}, {}) must have i < j",
                    p.i, p.j
                )));
            }
            if !seen.insert((p.i, p.j)) {
                return Err(Error::InvalidArgument(format!("pair ({}, {}) appears twice", p.i, p.j)));
            }
        }
        Ok(PredictionSet { mode, pairs })
    }

    pub fn predicted(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.predicted).collect()
    }

    pub fn observed(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.observed).collect()
    }

    pub fn spearman(&self) -> Result<f64> {
        spearman(&self.predicted(), &self.observed())
    }
}

/// `ln w` for positive counts, `0` otherwise.
pub fn magnitude(w: f64) -> f64 {
    if w > 0.0 {
        w.ln()
    } else {
        0.0
    }
}

/// `X_iᵀ I_{p,q} X_j`
pub fn dot_predict(emb: &Embedding, i: usize, j: usize) -> Result<f64> {
    let n = emb.n();
    for idx in [i, j] {
        if idx >= n {
            return Err(Error::IndexOutOfRange { index: idx, n });
        }
    }
    if i == j {
        return Err(Error::InvalidArgument(format!(
            "self-pair ({i}, {i}) has no prediction"
        )));
    }
    let d = emb.dim();
    Ok((0..d)
        .map(|c| {
            let s = if c < emb.p { 1.0 } else { -1.0 };
            s * emb.x[(i, c)] * emb.x[(j, c)]
        })
        .sum())
}

/// `X I_{p,q} Xᵀ`, the best rank-`d` approximation behind `dot_predict`.
pub fn prediction_matrix(emb: &Embedding) -> DMatrix<f64> {
    emb.reconstruct()
}

/// Evaluation targets `(i, j, day-1 count)` with `i < j`: every pair with
/// a positive day-1 count, or every pair when `all_pairs` is set.
pub fn evaluation_pairs(day1: &WeightedGraph, all_pairs: bool) -> Vec<(usize, usize, f64)> {
    day1.upper_entries().filter(|&(_, _, w)| all_pairs || w > 0.0).collect()
}

fn check_pair(i: usize, j: usize, n: usize) -> Result<()> {
    if i == j {
        return Err(Error::InvalidArgument(format!("self-pair ({i}, {i}) in the pair list")));
    }
    for idx in [i, j] {
        if idx >= n {
            return Err(Error::IndexOutOfRange { index: idx, n });
        }
    }
    Ok(())
}

/// Predict each target. `day0` holds raw counts; `emb` must embed the
/// representation matching `mode` (counts, or `ln` counts for magnitude
/// modes). Observed day-1 counts are compared on the scale of `mode`.
pub fn predict(
    day0: &WeightedGraph,
    emb: &Embedding,
    mode: PredictMode,
    targets: &[(usize, usize, f64)],
) -> Result<PredictionSet> {
    if emb.n() != day0.n() {
        return Err(Error::ShapeMismatch(format!(
            "embedding has {} rows, day-0 graph {} nodes",
            emb.n(),
            day0.n()
        )));
    }
    let scale = |w: f64| if mode.is_magnitude() { magnitude(w) } else { w };
    let pairs = targets
        .par_iter()
        .map(|&(a, b, observed)| {
            check_pair(a, b, day0.n())?;
            let (i, j) = (a.min(b), a.max(b));
            let seen = day0.weight(i, j);
            let predicted = if mode.is_hybrid() && seen > 0.0 {
                scale(seen)
            } else {
                dot_predict(emb, i, j)?
            };
            Ok(Prediction {
                i,
                j,
                predicted,
                observed: scale(observed),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PredictionSet::new(mode, pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HybridMode {
    Count,
    Magnitude,
}

/// Day-0 value where the pair was seen, the embedding's prediction
/// otherwise.
pub fn hybrid_predict(
    day0: &WeightedGraph,
    emb: &Embedding,
    mode: HybridMode,
    targets: &[(usize, usize, f64)],
) -> Result<PredictionSet> {
    let mode = match mode {
        HybridMode::Count => PredictMode::HybridCount,
        HybridMode::Magnitude => PredictMode::HybridMagnitude,
    };
    predict(day0, emb, mode, targets)
}

/// Ranks starting at 1; tied values share their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        let r = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = r;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("an input is constant".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {} values", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument(
            "Spearman correlation needs at least two pairs".into(),
        ));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("NaN in rank correlation input".into()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Percentile bootstrap interval for Spearman's correlation, resampling
/// pairs. Resamples with a constant margin are discarded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapInterval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub resamples: usize,
    pub discarded: usize,
}

pub fn spearman_bootstrap(x: &[f64], y: &[f64], resamples: usize, level: f64, seed: u64) -> Result<BootstrapInterval> {
    let estimate = spearman(x, y)?;
    if !(level > 0.0 && level < 1.0) || resamples == 0 {
        return Err(Error::InvalidArgument(format!(
            "bootstrap needs level in (0, 1) and resamples > 0, got {level} and {resamples}"
        )));
    }
    let n = x.len();
    let draws: Vec<Option<f64>> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = aux_rng(crate::rng::derive_seed(seed, b as u64), 2);
            let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
            let ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            spearman(&xs, &ys).ok()
        })
        .collect();
    let mut values: Vec<f64> = draws.iter().flatten().copied().collect();
    let discarded = resamples - values.len();
    if values.is_empty() {
        return Err(Error::UndefinedCorrelation(
            "every bootstrap resample was constant".into(),
        ));
    }
    values.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (values.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        values[lo] + (values[hi] - values[lo]) * (pos - lo as f64)
    };
    let tail = (1.0 - level) / 2.0;
    Ok(BootstrapInterval {
        estimate,
        lower: q(tail),
        upper: q(1.0 - tail),
        level,
        resamples,
        discarded,
    })
}
