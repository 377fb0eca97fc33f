use rand::Rng;
use rand_distr::{Distribution, Pareto};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sample_labels, sample_poisson, WeightedGraph};
use crate::rng::edge_rng;

/// Synthetic two-day count network. Each pair `(i, j)` draws a shared
/// heavy-tailed activity `m_ij ~ Pareto(1, shape)`; on each day the pair is
/// active with probability `1 − exp(−presence_kl · m_ij)` and an active pair
/// carries `1 + Poisson(rate_kl · m_ij)` packets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoDayConfig {
    pub n: usize,
    pub pi: Vec<f64>,
    pub presence: Vec<Vec<f64>>,
    pub rate: Vec<Vec<f64>>,
    pub pareto_shape: f64,
}

impl Default for TwoDayConfig {
    fn default() -> Self {
        TwoDayConfig {
            n: 800,
            pi: vec![0.2, 0.3, 0.5],
            presence: vec![vec![0.80, 0.08, 0.20], vec![0.08, 0.48, 0.04], vec![0.20, 0.04, 0.12]],
            rate: vec![vec![4.0, 1.0, 2.0], vec![1.0, 6.0, 0.5], vec![2.0, 0.5, 1.0]],
            pareto_shape: 1.5,
        }
    }
}

impl TwoDayConfig {
    fn validate(&self) -> Result<()> {
        let k = self.pi.len();
        if k == 0 || self.pi.iter().any(|&p| !(p >= 0.0)) || (self.pi.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!(
                "pi is not a probability vector: {:?}",
                self.pi
            )));
        }
        let square = |m: &Vec<Vec<f64>>| {
            m.len() == k && m.iter().all(|r| r.len() == k) && (0..k).all(|a| (0..k).all(|b| m[a][b] == m[b][a]))
        };
        if !square(&self.presence) || !square(&self.rate) {
            return Err(Error::InvalidModel("presence and rate must be symmetric KxK".into()));
        }
        let non_negative = |m: &Vec<Vec<f64>>| m.iter().flatten().all(|&v| v >= 0.0 && v.is_finite());
        if !non_negative(&self.presence) || !non_negative(&self.rate) {
            return Err(Error::InvalidModel(
                "presence and rate must be finite and non-negative".into(),
            ));
        }
        if !(self.pareto_shape > 0.0) {
            return Err(Error::InvalidModel(format!(
                "Pareto shape {} must be positive",
                self.pareto_shape
            )));
        }
        if self.n < 2 {
            return Err(Error::InvalidArgument(format!("need n >= 2, got {}", self.n)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TwoDay {
    pub day0: WeightedGraph,
    pub day1: WeightedGraph,
    pub labels: Vec<usize>,
}

pub fn two_day_counts(config: &TwoDayConfig, seed: u64) -> Result<TwoDay> {
    config.validate()?;
    let labels = sample_labels(&config.pi, config.n, seed);
    let pareto = Pareto::new(1.0, config.pareto_shape).map_err(|e| Error::InvalidModel(e.to_string()))?;
    let n = config.n;
    let rows: Vec<Vec<(f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| {
                    let (a, b) = (labels[i], labels[j]);
                    let mut rng = edge_rng(seed, i, j);
                    let m: f64 = pareto.sample(&mut rng);
                    let present = 1.0 - (-config.presence[a][b] * m).exp();
                    let rate = config.rate[a][b] * m;
                    let mut day = || {
                        if rng.gen::<f64>() < present {
                            1.0 + sample_poisson(rate, &mut rng) as f64
                        } else {
                            0.0
                        }
                    };
                    let d0 = day();
                    (d0, day())
                })
                .collect()
        })
        .collect();
    let mut a0 = nalgebra::DMatrix::zeros(n, n);
    let mut a1 = nalgebra::DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (off, (w0, w1)) in row.into_iter().enumerate() {
            let j = i + 1 + off;
            a0[(i, j)] = w0;
            a0[(j, i)] = w0;
            a1[(i, j)] = w1;
            a1[(j, i)] = w1;
        }
    }
    let k = config.pi.len();
    Ok(TwoDay {
        day0: WeightedGraph::new(a0)?.with_labels(labels.clone(), k)?,
        day1: WeightedGraph::new(a1)?.with_labels(labels.clone(), k)?,
        labels,
    })
}
