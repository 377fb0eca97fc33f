use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::aux_rng;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const FLOOR_REL: f64 = 1e-9;
const MAX_REINIT: usize = 20;
const LLOYD_STEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmOptions {
    /// Stop when the relative log-likelihood change falls below this.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    500
}

impl Default for GmmOptions {
    fn default() -> Self {
        GmmOptions {
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

/// A fitted Gaussian mixture with full covariances.
#[derive(Debug, Clone)]
pub struct GmmFit {
    pub weights: DVector<f64>,
    /// K × d, one mean per row
    pub means: DMatrix<f64>,
    pub covariances: Vec<DMatrix<f64>>,
    /// n × K, rows sum to one
    pub responsibilities: DMatrix<f64>,
    /// Log-likelihood after each EM iteration since the last
    /// reinitialisation.
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Number of collapsed components that were reinitialised.
    pub reinitialized: usize,
}

impl GmmFit {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn loglik(&self) -> f64 {
        self.loglik_trace.last().copied().unwrap_or(f64::NEG_INFINITY)
    }

    /// Most responsible component for each row; ties go to the lower index.
    pub fn hard_labels(&self) -> Vec<usize> {
        self.responsibilities
            .row_iter()
            .map(|r| {
                let mut best = 0;
                for k in 1..r.len() {
                    if r[k] > r[best] {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }

    /// Whether the trace never drops by more than `slack` relative.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.loglik_trace
            .windows(2)
            .all(|w| w[1] >= w[0] - slack * w[0].abs().max(1.0))
    }
}

struct Params {
    weights: DVector<f64>,
    means: DMatrix<f64>,
    covariances: Vec<DMatrix<f64>>,
}

fn check_input(x: &DMatrix<f64>, k: usize) -> Result<()> {
    let (n, d) = x.shape();
    if k == 0 || d == 0 {
        return Err(Error::InvalidArgument("need K >= 1 and d >= 1".into()));
    }
    if n <= k * d {
        return Err(Error::InvalidArgument(format!(
            "GMM needs n > K·d, got n = {n}, K = {k}, d = {d}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("data contain non-finite values".into()));
    }
    Ok(())
}

/// k-means++ seeding followed by a few Lloyd steps; returns hard labels.
fn kmeans_pp_labels<R: Rng>(x: &DMatrix<f64>, k: usize, rng: &mut R) -> Vec<usize> {
    let n = x.nrows();
    let dist2 = |i: usize, c: &DMatrix<f64>, j: usize| (x.row(i) - c.row(j)).norm_squared();
    let mut centers = DMatrix::zeros(k, x.ncols());
    centers.row_mut(0).copy_from(&x.row(rng.gen_range(0..n)));
    let mut best: Vec<f64> = (0..n).map(|i| dist2(i, &centers, 0)).collect();
    for c in 1..k {
        let total: f64 = best.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in best.iter().enumerate() {
                if u < w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centers.row_mut(c).copy_from(&x.row(pick));
        for (i, b) in best.iter_mut().enumerate() {
            *b = b.min(dist2(i, &centers, c));
        }
    }
    let assign = |centers: &DMatrix<f64>| -> Vec<usize> {
        (0..n)
            .map(|i| {
                (0..k)
                    .map(|c| (c, dist2(i, centers, c)))
                    .fold((0, f64::INFINITY), |acc, (c, v)| if v < acc.1 { (c, v) } else { acc })
                    .0
            })
            .collect()
    };
    let mut labels = assign(&centers);
    for _ in 0..LLOYD_STEPS {
        let mut sums = DMatrix::zeros(k, x.ncols());
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            let mut row = sums.row_mut(l);
            row += x.row(i);
            counts[l] += 1;
        }
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                let mean = sums.row(c) / count as f64;
                centers.row_mut(c).copy_from(&mean);
            }
        }
        let next = assign(&centers);
        if next == labels {
            break;
        }
        labels = next;
    }
    labels
}

fn one_hot(labels: &[usize], k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(labels.len(), k, |i, c| if labels[i] == c { 1.0 } else { 0.0 })
}

/// Weighted moments of each component. Returns the index of a collapsed
/// component, if any.
fn m_step(x: &DMatrix<f64>, resp: &DMatrix<f64>) -> std::result::Result<Params, usize> {
    let (n, d) = x.shape();
    let k = resp.ncols();
    let mut weights = DVector::zeros(k);
    let mut means = DMatrix::zeros(k, d);
    let mut covariances = Vec::with_capacity(k);
    for c in 0..k {
        let r = resp.column(c);
        let nk: f64 = r.sum();
        if !(nk > d as f64) {
            return Err(c);
        }
        let mean = x.tr_mul(&r) / nk;
        let mut cov = DMatrix::zeros(d, d);
        for i in 0..n {
            if r[i] > 0.0 {
                let diff = x.row(i).transpose() - &mean;
                cov.syger(r[i], &diff, &diff, 1.0);
            }
        }
        cov.fill_upper_triangle_with_lower_triangle();
        cov /= nk;
        let floor = FLOOR_REL * cov.trace() / d as f64;
        let min_eig = cov.symmetric_eigenvalues().min();
        if !(floor > 0.0) || min_eig < floor {
            return Err(c);
        }
        for j in 0..d {
            cov[(j, j)] += floor;
        }
        weights[c] = nk / n as f64;
        means.row_mut(c).copy_from(&mean.transpose());
        covariances.push(cov);
    }
    Ok(Params {
        weights,
        means,
        covariances,
    })
}

/// Posterior responsibilities and the total log-likelihood.
fn e_step(x: &DMatrix<f64>, params: &Params) -> Result<(DMatrix<f64>, f64)> {
    let (n, d) = x.shape();
    let k = params.weights.len();
    let mut logp = DMatrix::zeros(n, k);
    for c in 0..k {
        let chol = Cholesky::<f64, Dyn>::new(params.covariances[c].clone())
            .ok_or_else(|| Error::Covariance(format!("component {c} covariance is not positive definite")))?;
        let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let base = params.weights[c].ln() - 0.5 * (d as f64 * LN_2PI + log_det);
        let centered = DMatrix::from_fn(d, n, |j, i| x[(i, j)] - params.means[(c, j)]);
        let solved = chol
            .l()
            .solve_lower_triangular(&centered)
            .expect("Cholesky factor is invertible");
        for i in 0..n {
            logp[(i, c)] = base - 0.5 * solved.column(i).norm_squared();
        }
    }
    let mut total = 0.0;
    for i in 0..n {
        let mut row = logp.row_mut(i);
        let max = row.max();
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse;
        row.apply(|v| *v = (*v - lse).exp());
        let s = row.sum();
        row /= s;
    }
    Ok((logp, total))
}

/// Move half of the largest component's points (at random) into the
/// collapsed component.
fn split_largest<R: Rng>(resp: &mut DMatrix<f64>, collapsed: usize, rng: &mut R) {
    let k = resp.ncols();
    let sums: Vec<f64> = (0..k).map(|c| resp.column(c).sum()).collect();
    let largest = (0..k)
        .filter(|&c| c != collapsed)
        .fold(None, |acc: Option<usize>, c| match acc {
            Some(b) if sums[b] >= sums[c] => Some(b),
            _ => Some(c),
        });
    let Some(src) = largest else { return };
    for i in 0..resp.nrows() {
        if rng.gen::<bool>() {
            resp[(i, collapsed)] += resp[(i, src)];
            resp[(i, src)] = 0.0;
        }
    }
}

/// EM from given initial responsibilities (n × K, row-stochastic).
pub fn fit_gmm_from_responsibilities(
    x: &DMatrix<f64>,
    init: &DMatrix<f64>,
    opts: GmmOptions,
    seed: u64,
) -> Result<GmmFit> {
    let k = init.ncols();
    check_input(x, k)?;
    if init.nrows() != x.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "{} responsibility rows for {} points",
            init.nrows(),
            x.nrows()
        )));
    }
    if init
        .row_iter()
        .any(|r| (r.sum() - 1.0).abs() > 1e-10 || r.iter().any(|&v| !(v >= 0.0)))
    {
        return Err(Error::InvalidArgument(
            "initial responsibilities must be row-stochastic".into(),
        ));
    }
    let mut rng = aux_rng(seed, 1);
    let mut resp = init.clone();
    let mut trace: Vec<f64> = Vec::new();
    let mut reinitialized = 0;
    let mut iterations = 0;
    let mut converged = false;
    let mut params = None;
    while iterations < opts.max_iter {
        let p = match m_step(x, &resp) {
            Ok(p) => p,
            Err(c) => {
                reinitialized += 1;
                if reinitialized > MAX_REINIT {
                    return Err(Error::Covariance(format!(
                        "component {c} collapsed {MAX_REINIT} times; the data may have fewer than K clusters"
                    )));
                }
                log::debug!("GMM component {c} collapsed; reinitialising");
                split_largest(&mut resp, c, &mut rng);
                trace.clear();
                continue;
            }
        };
        let (next, ll) = e_step(x, &p)?;
        iterations += 1;
        resp = next;
        params = Some(p);
        let done = trace
            .last()
            .is_some_and(|&prev: &f64| (ll - prev).abs() < opts.tol * prev.abs().max(f64::MIN_POSITIVE));
        trace.push(ll);
        if done {
            converged = true;
            break;
        }
    }
    let params = params.ok_or_else(|| Error::InvalidArgument("max_iter must be at least 1".into()))?;
    if !converged {
        log::warn!("GMM did not converge in {} iterations", opts.max_iter);
    }
    Ok(GmmFit {
        weights: params.weights,
        means: params.means,
        covariances: params.covariances,
        responsibilities: resp,
        loglik_trace: trace,
        converged,
        iterations,
        reinitialized,
    })
}

/// Fit a `k`-component mixture by EM from a k-means++ start.
pub fn fit_gmm(x: &DMatrix<f64>, k: usize, seed: u64, opts: GmmOptions) -> Result<GmmFit> {
    check_input(x, k)?;
    let mut rng = aux_rng(seed, 0);
    let labels = kmeans_pp_labels(x, k, &mut rng);
    fit_gmm_from_responsibilities(x, &one_hot(&labels, k), opts, seed)
}

/// Hard labels as one-hot responsibilities.
pub fn responsibilities_from_labels(labels: &[usize], k: usize) -> Result<DMatrix<f64>> {
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::IndexOutOfRange { index: bad, n: k });
    }
    Ok(one_hot(labels, k))
}
