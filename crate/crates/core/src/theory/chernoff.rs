use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::clt::clt_params;
use super::signature_of;
use crate::error::{Error, Result};
use crate::linalg::{spd_log_det, symmetrize};
use crate::model::BlockMoments;
use crate::spectral::eig_symmetric;

const GRID_POINTS: usize = 512;
const T_EDGE: f64 = 1e-6;
const T_TOL: f64 = 1e-10;
/// Relative (to trace) eigenvalue floor for inverting `Σ_{kℓ}(t)`.
const SIGMA_FLOOR: f64 = 1e-14;

/// Maximise `f` over `(0, 1)`: 512-point grid scan on `[1e-6, 1 - 1e-6]`,
/// then golden-section search inside the bracket around the best grid
/// point until it is narrower than `1e-10`. Returns `(t*, f(t*))`.
pub fn maximize_on_unit_interval<F>(mut f: F) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let step = (1.0 - 2.0 * T_EDGE) / (GRID_POINTS - 1) as f64;
    let grid = |i: usize| T_EDGE + step * i as f64;
    let mut best_i = 0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..GRID_POINTS {
        let v = f(grid(i))?;
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let mut lo = grid(best_i.saturating_sub(1));
    let mut hi = grid((best_i + 1).min(GRID_POINTS - 1));
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > T_TOL {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1)?;
        }
    }
    let t = 0.5 * (lo + hi);
    let v = f(t)?;
    let (mut t_best, mut v_best) = (grid(best_i), best);
    for (tc, vc) in [(t, v), (x1, f1), (x2, f2)] {
        if vc > v_best {
            t_best = tc;
            v_best = vc;
        }
    }
    Ok((t_best, v_best))
}

/// `vᵀ M⁻¹ v` for symmetric positive-definite `M`, via eigendecomposition
/// with an eigenvalue floor of `1e-14 · trace`.
fn inverse_quadratic_form(m: &DMatrix<f64>, v: &DVector<f64>) -> Result<f64> {
    let eig = eig_symmetric(&symmetrize(m))?;
    let trace: f64 = eig.values.iter().sum();
    let floor = SIGMA_FLOOR * trace.abs();
    let mut acc = 0.0;
    for (i, &lambda) in eig.values.iter().enumerate() {
        let proj = eig.vectors.column(i).dot(v);
        if lambda <= floor {
            return Err(Error::UndefinedChernoff(format!(
                "covariance eigenvalue {lambda:e} at or below floor {floor:e}"
            )));
        }
        acc += proj * proj / lambda;
    }
    Ok(acc)
}

/// Chernoff information between `N(μ₁, Γ₁)` and `N(μ₂, Γ₂)`, with the
/// maximising `t`.
pub fn gaussian_chernoff(
    mu1: &DVector<f64>,
    g1: &DMatrix<f64>,
    mu2: &DVector<f64>,
    g2: &DMatrix<f64>,
) -> Result<(f64, f64)> {
    let d = mu1.len();
    if mu2.len() != d || g1.shape() != (d, d) || g2.shape() != (d, d) {
        return Err(Error::ShapeMismatch(
            "means and covariances disagree in dimension".into(),
        ));
    }
    let ld1 = spd_log_det(g1)?;
    let ld2 = spd_log_det(g2)?;
    let diff = mu1 - mu2;
    let (t, v) = maximize_on_unit_interval(|t| {
        let gt = g1 * (1.0 - t) + g2 * t;
        let quad = inverse_quadratic_form(&gt, &diff)
            .map_err(|_| Error::Covariance("interpolated covariance lost definiteness".into()))?;
        let ldt = spd_log_det(&gt)?;
        Ok(0.5 * t * (1.0 - t) * quad + 0.5 * (ldt - (1.0 - t) * ld1 - t * ld2))
    })?;
    Ok((v, t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChernoffMethod {
    /// Quadratic form in `Σ_{kℓ}(t)⁻¹` on the block embedding.
    EmbeddingSpace,
    /// Equivalent form `(e_k − e_ℓ)ᵀ B Π Γ_{kℓ}(t)⁻¹ Π B (e_k − e_ℓ)`;
    /// needs an invertible `B`.
    BlockSpace,
    /// Block space when `B` is invertible and every `π_k > 0`, otherwise
    /// embedding space.
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairChernoff {
    pub k: usize,
    pub l: usize,
    pub t_star: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChernoffReport {
    pub pairs: Vec<PairChernoff>,
    /// Minimum over pairs.
    pub c: f64,
    /// The method actually used (never `Auto`).
    pub method: ChernoffMethod,
    /// FNV-1a hash of `(B, C, π)` for provenance.
    pub moment_hash: String,
}

impl ChernoffReport {
    /// The pair attaining the minimum.
    pub fn critical_pair(&self) -> &PairChernoff {
        self.pairs
            .iter()
            .min_by(|a, b| a.value.total_cmp(&b.value))
            .expect("reports always hold at least one pair")
    }
}

fn moment_hash(m: &BlockMoments, pi: &[f64]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for x in m.b.iter().chain(m.c.iter()).chain(pi.iter()) {
        for byte in x.to_bits().to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

/// Size-adjusted Chernoff information of a weighted SBM: the minimum over
/// community pairs of `sup_t t(1−t)/2 · Δxᵀ Σ_{kℓ}(t)⁻¹ Δx` with
/// `Δx = (X_B)_k − (X_B)_ℓ`.
pub fn size_adjusted_chernoff(moments: &BlockMoments, pi: &[f64], method: ChernoffMethod) -> Result<ChernoffReport> {
    let k = moments.k();
    if k < 2 {
        return Err(Error::InvalidArgument(
            "Chernoff information needs at least two communities".into(),
        ));
    }
    for a in 0..k {
        for (l, &w) in pi.iter().enumerate() {
            if w > 0.0 && !(moments.c[(a, l)] > 0.0) {
                return Err(Error::UndefinedChernoff(format!(
                    "block variance C[{a}][{l}] = {} must be positive",
                    moments.c[(a, l)]
                )));
            }
        }
    }
    let method = match method {
        ChernoffMethod::Auto => {
            let (d, _, _) = signature_of(&moments.b, None)?;
            if d == k && pi.iter().all(|&w| w > 0.0) {
                ChernoffMethod::BlockSpace
            } else {
                ChernoffMethod::EmbeddingSpace
            }
        }
        m => m,
    };
    let mut pairs = Vec::with_capacity(k * (k - 1) / 2);
    match method {
        ChernoffMethod::EmbeddingSpace => {
            let params = clt_params(moments, pi)?;
            for a in 0..k {
                for b in (a + 1)..k {
                    let dx = (params.block.x.row(a) - params.block.x.row(b)).transpose();
                    let (t_star, value) = if dx.iter().all(|&v| v == 0.0) {
                        // identical latent positions: the objective is 0 for every t
                        check_pair_covariances(&params.sigma[a], &params.sigma[b])?;
                        (0.5, 0.0)
                    } else {
                        maximize_on_unit_interval(|t| {
                            let s = &params.sigma[a] * (1.0 - t) + &params.sigma[b] * t;
                            Ok(0.5 * t * (1.0 - t) * inverse_quadratic_form(&s, &dx)?)
                        })?
                    };
                    pairs.push(PairChernoff {
                        k: a,
                        l: b,
                        t_star,
                        value,
                    });
                }
            }
        }
        ChernoffMethod::BlockSpace => {
            let (d, _, _) = signature_of(&moments.b, None)?;
            if d != k {
                return Err(Error::InvalidArgument(format!(
                    "block-space Chernoff needs an invertible B (rank {d} < {k})"
                )));
            }
            if pi.len() != k || pi.iter().any(|&w| !(w > 0.0)) {
                return Err(Error::InvalidArgument(
                    "block-space Chernoff needs every pi_k > 0".into(),
                ));
            }
            for a in 0..k {
                for b in (a + 1)..k {
                    // y = Π B (e_a − e_b)
                    let y: Vec<f64> = (0..k)
                        .map(|j| pi[j] * (moments.b[(j, a)] - moments.b[(j, b)]))
                        .collect();
                    let (t_star, value) = maximize_on_unit_interval(|t| {
                        let mut acc = 0.0;
                        for j in 0..k {
                            let g = pi[j] * ((1.0 - t) * moments.c[(a, j)] + t * moments.c[(b, j)]);
                            acc += y[j] * y[j] / g;
                        }
                        Ok(0.5 * t * (1.0 - t) * acc)
                    })?;
                    pairs.push(PairChernoff {
                        k: a,
                        l: b,
                        t_star,
                        value,
                    });
                }
            }
        }
        ChernoffMethod::Auto => unreachable!("resolved above"),
    }
    let c = pairs.iter().map(|p| p.value).fold(f64::INFINITY, f64::min);
    Ok(ChernoffReport {
        pairs,
        c,
        method,
        moment_hash: moment_hash(moments, pi),
    })
}

fn check_pair_covariances(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    let mid = (a + b) * 0.5;
    let zero = DVector::zeros(a.nrows());
    inverse_quadratic_form(&mid, &zero).map(|_| ())
}

/// `C₁ / C₂`
pub fn chernoff_ratio(c1: f64, c2: f64) -> Result<f64> {
    if !(c2 > 0.0) {
        return Err(Error::RatioUndefined(c2));
    }
    if !(c1 >= 0.0) {
        return Err(Error::InvalidArgument(format!("Chernoff value {c1} is negative")));
    }
    Ok(c1 / c2)
}

/// Closed form for the anomaly structure `B = [[b₁, b₂], [b₂, b₂]]`,
/// `C = [[c₁, c₂], [c₂, c₂]]`: `π₁ (b₁ − b₂)² / (2 (√c₁ + √c₂)²)`.
pub fn closed_form_anomaly_chernoff(b1: f64, b2: f64, c1: f64, c2: f64, pi1: f64) -> Result<f64> {
    if !(c1 > 0.0 && c2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "variances must be positive, got ({c1}, {c2})"
        )));
    }
    let s = c1.sqrt() + c2.sqrt();
    Ok(pi1 * (b1 - b2).powi(2) / (2.0 * s * s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poisson_moments(l1: f64, l2: f64) -> BlockMoments {
        let b = DMatrix::from_row_slice(2, 2, &[l1, l2, l2, l1]);
        BlockMoments { b: b.clone(), c: b }
    }

    #[test]
    fn identical_gaussians() {
        let mu = DVector::from_vec(vec![1.0, -2.0]);
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let (v, _) = gaussian_chernoff(&mu, &g, &mu, &g).unwrap();
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn equal_covariance_closed_form() {
        let mu1 = DVector::from_vec(vec![1.0, 0.5]);
        let mu2 = DVector::from_vec(vec![-0.5, 2.0]);
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let diff = &mu1 - &mu2;
        let want = diff.dot(&(g.clone().try_inverse().unwrap() * &diff)) / 8.0;
        let (v, t) = gaussian_chernoff(&mu1, &g, &mu2, &g).unwrap();
        assert!((v - want).abs() < 1e-12 * want);
        assert!((t - 0.5).abs() < 1e-6);
    }

    #[test]
    fn variance_only_scalar_oracle() {
        // brute-force grid over 10⁶ points
        let oracle = (1..1_000_000)
            .map(|i| {
                let t = i as f64 / 1_000_000.0;
                0.5 * ((1.0 + 3.0 * t).ln() - t * 4f64.ln())
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let one = DMatrix::from_element(1, 1, 1.0);
        let four = DMatrix::from_element(1, 1, 4.0);
        let zero = DVector::zeros(1);
        let (v, _) = gaussian_chernoff(&zero, &one, &zero, &four).unwrap();
        assert!(v >= oracle - 1e-12);
        assert!((v - oracle).abs() < 1e-9);
    }

    #[test]
    fn rejects_indefinite_covariance() {
        let zero = DVector::zeros(1);
        let bad = DMatrix::from_element(1, 1, -1.0);
        let one = DMatrix::from_element(1, 1, 1.0);
        assert!(matches!(
            gaussian_chernoff(&zero, &bad, &zero, &one),
            Err(Error::Covariance(_))
        ));
    }

    #[test]
    fn poisson_pair_and_methods_agree() {
        let m = poisson_moments(0.5, 0.6);
        let e = size_adjusted_chernoff(&m, &[0.5, 0.5], ChernoffMethod::EmbeddingSpace).unwrap();
        let b = size_adjusted_chernoff(&m, &[0.5, 0.5], ChernoffMethod::BlockSpace).unwrap();
        assert!((e.c - b.c).abs() <= 1e-8 * b.c);
        // 0.0022727... = 1/440
        assert!((b.c - 1.0 / 440.0).abs() < 1e-12);
        let auto = size_adjusted_chernoff(&m, &[0.5, 0.5], ChernoffMethod::Auto).unwrap();
        assert_eq!(auto.method, ChernoffMethod::BlockSpace);
    }

    #[test]
    fn equal_means_is_zero() {
        let m = BlockMoments {
            b: DMatrix::from_element(2, 2, 1.0),
            c: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 8.0]),
        };
        let r = size_adjusted_chernoff(&m, &[0.5, 0.5], ChernoffMethod::Auto).unwrap();
        assert_eq!(r.method, ChernoffMethod::EmbeddingSpace);
        assert_eq!(r.c, 0.0);
        assert!(size_adjusted_chernoff(&m, &[0.5, 0.5], ChernoffMethod::BlockSpace).is_err());
    }

    #[test]
    fn zero_variance_is_undefined() {
        let m = BlockMoments {
            b: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            c: DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 0.0]),
        };
        assert!(matches!(
            size_adjusted_chernoff(&m, &[0.5, 0.5], ChernoffMethod::Auto),
            Err(Error::UndefinedChernoff(_))
        ));
    }

    #[test]
    fn ratios() {
        assert_eq!(chernoff_ratio(2.0, 2.0).unwrap(), 1.0);
        assert!(matches!(chernoff_ratio(1.0, 0.0), Err(Error::RatioUndefined(_))));
        assert!((chernoff_ratio(1.59e-3, 5.07e-4).unwrap() - 3.136).abs() < 1e-3);
    }

    #[test]
    fn closed_form_zero_gap() {
        assert_eq!(closed_form_anomaly_chernoff(0.3, 0.3, 0.1, 0.2, 0.4).unwrap(), 0.0);
    }

    #[test]
    fn three_community_minimum() {
        let b = DMatrix::from_row_slice(3, 3, &[0.8, 0.1, 0.2, 0.1, 0.7, 0.15, 0.2, 0.15, 0.6]);
        let c = b.map(|x| x * (1.0 - x));
        let m = BlockMoments { b, c };
        let pi = [0.3, 0.3, 0.4];
        let r = size_adjusted_chernoff(&m, &pi, ChernoffMethod::BlockSpace).unwrap();
        let e = size_adjusted_chernoff(&m, &pi, ChernoffMethod::EmbeddingSpace).unwrap();
        assert_eq!(r.pairs.len(), 3);
        assert_eq!(r.c, r.critical_pair().value);
        for (x, y) in r.pairs.iter().zip(&e.pairs) {
            assert!((x.value - y.value).abs() <= 1e-8 * x.value);
            assert!(x.t_star > 0.0 && x.t_star < 1.0);
        }
    }
}
