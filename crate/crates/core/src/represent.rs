//! Entrywise edge-weight transforms and the block models they induce for
//! count data, p-values and magnitudes.
//!
//! P-values are stored on the complement scale `w = 1 − p`, so a missing
//! edge (`p = 1`) is a stored zero.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BlockModel, BlockMoments, WeightDistribution, WeightedGraph};
use crate::theory::{chernoff_ratio, size_adjusted_chernoff, ChernoffMethod};

/// Default replacement for `−log(1 − w)` at `w = 1`.
pub const DEFAULT_LOG_CAP: f64 = 745.0;

fn default_cap() -> f64 {
    DEFAULT_LOG_CAP
}

/// An entrywise map on edge weights. Serialised as `{"kind": ..., params}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EdgeTransform {
    /// `a·w + b`
    Affine { a: f64, b: f64 },
    /// `1` if `w > 0`, else `0`
    PresenceIndicator,
    /// `ln w` if `w > 0`, else `0`
    LogMagnitude,
    /// `1` if `p < τ`, i.e. `w > 1 − τ`
    PValueThreshold { tau: f64 },
    /// `−ln(1 − w) = −ln p`, with `p = 0` mapped to `cap`
    PValueLogComplement {
        #[serde(default = "default_cap")]
        cap: f64,
    },
}

impl EdgeTransform {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EdgeTransform::Affine { a, b } => {
                if a == 0.0 || !a.is_finite() || !b.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "affine transform needs finite a != 0 and finite b, got ({a}, {b})"
                    )));
                }
            }
            EdgeTransform::PValueThreshold { tau } => {
                if !(tau > 0.0 && tau < 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "threshold tau = {tau} must lie in (0, 1)"
                    )));
                }
            }
            EdgeTransform::PValueLogComplement { cap } => {
                if !(cap > 0.0 && cap.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "log cap {cap} must be positive and finite"
                    )));
                }
            }
            EdgeTransform::PresenceIndicator | EdgeTransform::LogMagnitude => {}
        }
        Ok(())
    }

    /// Map one weight. Returns the value and whether the cap was used.
    fn apply(&self, i: usize, j: usize, w: f64) -> Result<(f64, bool)> {
        let domain = |reason| Error::TransformDomain {
            row: i,
            col: j,
            weight: w,
            reason,
        };
        let in_unit = |w: f64| (0.0..=1.0).contains(&w);
        Ok(match *self {
            EdgeTransform::Affine { a, b } => (a * w + b, false),
            EdgeTransform::PresenceIndicator => (if w > 0.0 { 1.0 } else { 0.0 }, false),
            EdgeTransform::LogMagnitude => {
                if !(w >= 0.0) {
                    return Err(domain("log-magnitude needs non-negative weights"));
                }
                (if w > 0.0 { w.ln() } else { 0.0 }, false)
            }
            EdgeTransform::PValueThreshold { tau } => {
                if !in_unit(w) {
                    return Err(domain("p-value weights must lie in [0, 1]"));
                }
                (if w > 1.0 - tau { 1.0 } else { 0.0 }, false)
            }
            EdgeTransform::PValueLogComplement { cap } => {
                if !in_unit(w) {
                    return Err(domain("p-value weights must lie in [0, 1]"));
                }
                if w == 1.0 {
                    (cap, true)
                } else {
                    // −ln(1 − w) without cancellation for small w; avoid −0
                    (-(-w).ln_1p() + 0.0, false)
                }
            }
        })
    }
}

/// A transformed graph plus the number of entries replaced by the log cap.
#[derive(Debug, Clone)]
pub struct Transformed {
    pub graph: WeightedGraph,
    pub capped: usize,
}

pub fn transform_graph_counted(g: &WeightedGraph, t: &EdgeTransform) -> Result<Transformed> {
    t.validate()?;
    let mut capped = 0;
    let graph = g.try_map_weights(|i, j, w| {
        let (v, hit) = t.apply(i, j, w)?;
        capped += hit as usize;
        Ok(v)
    })?;
    if capped > 0 {
        warn!("{capped} p-values equal to zero were replaced by the log cap");
    }
    Ok(Transformed { graph, capped })
}

/// Apply `t` to every off-diagonal weight.
pub fn transform_graph(g: &WeightedGraph, t: &EdgeTransform) -> Result<WeightedGraph> {
    transform_graph_counted(g, t).map(|r| r.graph)
}

/// Apply a list of transforms left to right.
pub fn transform_chain(g: &WeightedGraph, ts: &[EdgeTransform]) -> Result<Transformed> {
    let mut out = Transformed {
        graph: g.clone(),
        capped: 0,
    };
    for t in ts {
        let step = transform_graph_counted(&out.graph, t)?;
        out = Transformed {
            graph: step.graph,
            capped: out.capped + step.capped,
        };
    }
    Ok(out)
}

fn check_probability(name: &str, v: f64, open_low: bool) -> Result<()> {
    let ok = if open_low {
        v > 0.0 && v <= 1.0
    } else {
        (0.0..=1.0).contains(&v)
    };
    if !ok {
        return Err(Error::InvalidArgument(format!("{name} = {v} is out of range")));
    }
    Ok(())
}

/// Two-community p-value model: community 1 (weight `π₁`) is anomalous.
/// Present p-values are `Beta(α, 1)` within it and uniform elsewhere;
/// each edge is present with probability `ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValueParams {
    pub rho: f64,
    pub alpha: f64,
    pub pi1: f64,
}

impl PValueParams {
    pub fn validate(&self) -> Result<()> {
        check_probability("rho", self.rho, true)?;
        check_probability("alpha", self.alpha, true)?;
        if !(self.pi1 > 0.0 && self.pi1 < 1.0) {
            return Err(Error::InvalidArgument(format!("pi1 = {} must lie in (0, 1)", self.pi1)));
        }
        Ok(())
    }

    pub fn pi(&self) -> [f64; 2] {
        [self.pi1, 1.0 - self.pi1]
    }

    /// Generative model for the stored weights `1 − p`.
    pub fn block_model(&self) -> Result<BlockModel> {
        self.validate()?;
        let zi =
            |shape_b| WeightDistribution::zero_inflated(self.rho, WeightDistribution::Beta { shape_a: 1.0, shape_b });
        BlockModel::two_block(self.pi1, zi(self.alpha), zi(1.0), zi(1.0))
    }
}

/// Block moments of the raw (`P`), log (`L`) and thresholded (`T`)
/// representations of the same p-value model.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueModels {
    pub p: BlockMoments,
    pub l: BlockMoments,
    pub t: BlockMoments,
    pub pi: [f64; 2],
}

fn anomaly_from(intra: &WeightDistribution, inter: &WeightDistribution) -> BlockMoments {
    let (b1, c1) = intra.moments();
    let (b2, c2) = inter.moments();
    BlockMoments::anomaly_structure(b1, b2, c1, c2)
}

pub fn pvalue_models(rho: f64, alpha: f64, pi1: f64, tau: f64) -> Result<PValueModels> {
    let params = PValueParams { rho, alpha, pi1 };
    params.validate()?;
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold tau = {tau} must lie in (0, 1)"
        )));
    }
    let zi = |d| WeightDistribution::zero_inflated(rho, d);
    // 1 − p with p ~ Beta(α, 1) is Beta(1, α); −ln p is Exponential(α)
    let p = anomaly_from(
        &zi(WeightDistribution::Beta {
            shape_a: 1.0,
            shape_b: alpha,
        }),
        &zi(WeightDistribution::Beta {
            shape_a: 1.0,
            shape_b: 1.0,
        }),
    );
    let l = anomaly_from(
        &zi(WeightDistribution::Exponential { rate: alpha }),
        &zi(WeightDistribution::Exponential { rate: 1.0 }),
    );
    let t = anomaly_from(
        &WeightDistribution::Bernoulli {
            p: rho * tau.powf(alpha),
        },
        &WeightDistribution::Bernoulli { p: rho * tau },
    );
    Ok(PValueModels {
        p,
        l,
        t,
        pi: params.pi(),
    })
}

/// Poisson counts with `B = C = [[λ₁, λ₂], [λ₂, λ₁]]` and their presence
/// indicators, Bernoulli with probability `1 − e^{−λ}` entrywise.
pub fn poisson_pair_models(lambda1: f64, lambda2: f64) -> Result<(BlockMoments, BlockMoments)> {
    for (name, v) in [("lambda1", lambda1), ("lambda2", lambda2)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name} = {v} must be positive")));
        }
    }
    if lambda1 == lambda2 {
        log::debug!("lambda1 == lambda2: the block mean matrix has rank one and the communities coincide");
    }
    let sym = |a: f64, b: f64| nalgebra::DMatrix::from_row_slice(2, 2, &[a, b, b, a]);
    let poisson = BlockMoments {
        b: sym(lambda1, lambda2),
        c: sym(lambda1, lambda2),
    };
    let q1 = -(-lambda1).exp_m1();
    let q2 = -(-lambda2).exp_m1();
    let presence = BlockMoments {
        b: sym(q1, q2),
        c: sym(q1 * (1.0 - q1), q2 * (1.0 - q2)),
    };
    Ok((poisson, presence))
}

/// Generative two-community Poisson model with `π = (π₁, 1 − π₁)`.
pub fn poisson_block_model(lambda1: f64, lambda2: f64, pi1: f64) -> Result<BlockModel> {
    BlockModel::two_block(
        pi1,
        WeightDistribution::Poisson { rate: lambda1 },
        WeightDistribution::Poisson { rate: lambda2 },
        WeightDistribution::Poisson { rate: lambda1 },
    )
}

/// One cell of the count-versus-presence comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoissonCell {
    pub lambda1: f64,
    pub lambda2: f64,
    pub c_poisson: f64,
    pub c_presence: f64,
    /// `C_poisson / C_presence`; `None` when both are zero
    pub ratio: Option<f64>,
}

pub fn poisson_cell(lambda1: f64, lambda2: f64) -> Result<PoissonCell> {
    let (poisson, presence) = poisson_pair_models(lambda1, lambda2)?;
    let pi = [0.5, 0.5];
    let c_poisson = size_adjusted_chernoff(&poisson, &pi, ChernoffMethod::Auto)?.c;
    let c_presence = size_adjusted_chernoff(&presence, &pi, ChernoffMethod::Auto)?.c;
    Ok(PoissonCell {
        lambda1,
        lambda2,
        c_poisson,
        c_presence,
        ratio: chernoff_ratio(c_poisson, c_presence).ok(),
    })
}

/// One cell of the p-value representation comparison, maximised over a
/// threshold grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PValueCell {
    pub alpha: f64,
    pub rho: f64,
    pub c_p: f64,
    pub c_l: f64,
    /// Best threshold representation over the grid
    pub c_t: f64,
    pub best_tau: f64,
    /// `C_T / C_L` at the best threshold
    pub ratio_t_over_l: Option<f64>,
}

impl PValueCell {
    /// The representation with the largest Chernoff information.
    pub fn preferred(&self) -> &'static str {
        if self.c_t > self.c_l && self.c_t > self.c_p {
            "threshold"
        } else if self.c_l >= self.c_p {
            "log"
        } else {
            "raw"
        }
    }
}

/// Chernoff information of `P`, `L` and the best `T` over `taus`.
pub fn pvalue_cell(alpha: f64, rho: f64, pi1: f64, taus: &[f64]) -> Result<PValueCell> {
    if taus.is_empty() {
        return Err(Error::InvalidArgument("threshold grid is empty".into()));
    }
    let pi = [pi1, 1.0 - pi1];
    let chernoff = |m: &BlockMoments| size_adjusted_chernoff(m, &pi, ChernoffMethod::Auto).map(|r| r.c);
    let base = pvalue_models(rho, alpha, pi1, taus[0])?;
    let c_p = chernoff(&base.p)?;
    let c_l = chernoff(&base.l)?;
    let mut best = (f64::NEG_INFINITY, taus[0]);
    for &tau in taus {
        let models = pvalue_models(rho, alpha, pi1, tau)?;
        let c = chernoff(&models.t)?;
        if c > best.0 {
            best = (c, tau);
        }
    }
    Ok(PValueCell {
        alpha,
        rho,
        c_p,
        c_l,
        c_t: best.0,
        best_tau: best.1,
        ratio_t_over_l: chernoff_ratio(best.0, c_l).ok(),
    })
}

/// `steps` evenly spaced points on `[min, max]` (a single point when
/// `steps == 1`).
pub fn linspace(min: f64, max: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![min],
        _ => (0..steps)
            .map(|i| min + (max - min) * i as f64 / (steps - 1) as f64)
            .collect(),
    }
}
