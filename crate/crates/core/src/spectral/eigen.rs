//! Dense symmetric eigensolver: Householder reduction to tridiagonal form
//! followed by implicit-shift QL. Selected eigenvectors can also be
//! recovered by inverse iteration on the tridiagonal matrix, which avoids
//! forming the full orthogonal factor.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const MAX_QL_ITERATIONS: usize = 60;

/// Tridiagonal form `T = Qᵀ M Q` with `Q = H₀ H₁ ⋯ H_{n-2}` kept as
/// Householder reflectors.
pub(crate) struct Tridiagonal {
    n: usize,
    pub diag: Vec<f64>,
    /// `off[k]` couples rows `k` and `k + 1`; `off[n - 1] = 0`.
    pub off: Vec<f64>,
    /// Row-major scratch; reflector `k` lives in row `k`, columns `k+1..n`
    /// (leading entry implicitly 1).
    store: Vec<f64>,
    tau: Vec<f64>,
}

impl Tridiagonal {
    pub fn reduce(m: &DMatrix<f64>) -> Tridiagonal {
        let n = m.nrows();
        // lower triangle of `a` (row-major) holds the working matrix
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                a[i * n + j] = m[(i, j)];
            }
        }
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n];
        let mut tau = vec![0.0; n];
        let mut v = vec![0.0; n];
        let mut p = vec![0.0; n];

        for k in 0..n.saturating_sub(1) {
            diag[k] = a[k * n + k];
            let s = k + 1;
            let alpha = a[s * n + k];
            let mut xnorm2 = 0.0;
            for i in (s + 1)..n {
                let x = a[i * n + k];
                xnorm2 += x * x;
            }
            if xnorm2 == 0.0 {
                off[k] = alpha;
                tau[k] = 0.0;
                continue;
            }
            let beta = -alpha.signum() * (alpha * alpha + xnorm2).sqrt();
            let t = (beta - alpha) / beta;
            let scale = 1.0 / (alpha - beta);
            off[k] = beta;
            tau[k] = t;
            v[s] = 1.0;
            for i in (s + 1)..n {
                v[i] = a[i * n + k] * scale;
            }
            // keep the reflector in the (unused) upper part of row k
            a[k * n + s] = 1.0;
            for i in (s + 1)..n {
                a[k * n + i] = v[i];
            }

            // p = t · A22 v using the lower triangle only
            p[s..n].iter_mut().for_each(|x| *x = 0.0);
            for i in s..n {
                let row = &a[i * n + s..i * n + i];
                let vi = v[i];
                let mut acc = a[i * n + i] * vi;
                let vs = &v[s..i];
                let ps = &mut p[s..i];
                for ((r, vj), pj) in row.iter().zip(vs).zip(ps.iter_mut()) {
                    acc += r * vj;
                    *pj += r * vi;
                }
                p[i] += acc;
            }
            let mut pv = 0.0;
            for i in s..n {
                p[i] *= t;
                pv += p[i] * v[i];
            }
            let half = 0.5 * t * pv;
            // w = p - (t/2)(pᵀv) v, stored in p
            for i in s..n {
                p[i] -= half * v[i];
            }
            // A22 -= v wᵀ + w vᵀ
            for i in s..n {
                let vi = v[i];
                let wi = p[i];
                let row = &mut a[i * n + s..i * n + i + 1];
                for ((r, vj), wj) in row.iter_mut().zip(&v[s..=i]).zip(&p[s..=i]) {
                    *r -= vi * wj + wi * vj;
                }
            }
        }
        if n > 0 {
            diag[n - 1] = a[(n - 1) * n + (n - 1)];
        }
        Tridiagonal {
            n,
            diag,
            off,
            store: a,
            tau,
        }
    }

    /// Overwrite `y` (length n) with `Q y`.
    pub fn apply_q(&self, y: &mut [f64]) {
        let n = self.n;
        for k in (0..n.saturating_sub(1)).rev() {
            let t = self.tau[k];
            if t == 0.0 {
                continue;
            }
            let v = &self.store[k * n + k + 1..(k + 1) * n];
            let tail = &mut y[k + 1..];
            let dot: f64 = v.iter().zip(tail.iter()).map(|(a, b)| a * b).sum();
            let s = t * dot;
            for (yi, vi) in tail.iter_mut().zip(v) {
                *yi -= s * vi;
            }
        }
    }

    /// Explicit `Q`, stored transposed: row `r` of the result is column `r`
    /// of `Q`.
    fn q_transposed(&self) -> Vec<f64> {
        let n = self.n;
        let mut qt = vec![0.0; n * n];
        for r in 0..n {
            let col = &mut qt[r * n..(r + 1) * n];
            col[r] = 1.0;
            self.apply_q(col);
        }
        qt
    }
}

/// Implicit-shift QL on a symmetric tridiagonal matrix. When `vectors` is
/// given it holds `n` rows of length `n` (row `r` = column `r` of the
/// accumulated basis) and receives the same rotations.
pub(crate) fn tridiagonal_ql(diag: &mut [f64], off: &mut [f64], mut vectors: Option<&mut [f64]>) -> Result<()> {
    let n = diag.len();
    if n == 0 {
        return Ok(());
    }
    off[n - 1] = 0.0;
    let mut scale = 0.0f64;
    for l in 0..n {
        let mut iter = 0;
        scale = scale.max(diag[l].abs() + off[l].abs());
        loop {
            let mut m = l;
            while m + 1 < n {
                if off[m].abs() <= f64::EPSILON * scale {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_ITERATIONS {
                return Err(Error::NonConvergence {
                    index: l,
                    iterations: iter - 1,
                });
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = vectors.as_deref_mut() {
                    let (head, tail) = z.split_at_mut((i + 1) * n);
                    let zi = &mut head[i * n..];
                    let zi1 = &mut tail[..n];
                    for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                        let f = *b;
                        *b = s * *a + c * f;
                        *a = c * *a - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    Ok(())
}

/// Eigenvector of the tridiagonal matrix for eigenvalue `lambda`, by
/// inverse iteration with partial-pivoting LU. Vectors in `previous` are
/// projected out on each sweep (used for clustered eigenvalues).
pub(crate) fn tridiagonal_inverse_iteration(
    diag: &[f64],
    off: &[f64],
    lambda: f64,
    previous: &[Vec<f64>],
    seed_shift: usize,
) -> Vec<f64> {
    let n = diag.len();
    let norm = diag
        .iter()
        .zip(off)
        .map(|(d, e)| d.abs() + 2.0 * e.abs())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let tiny = f64::EPSILON * norm;

    // factor T - λI
    let mut dl: Vec<f64> = off[..n.saturating_sub(1)].to_vec();
    let mut d: Vec<f64> = diag.iter().map(|x| x - lambda).collect();
    let mut du: Vec<f64> = off[..n.saturating_sub(1)].to_vec();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut swapped = vec![false; n.saturating_sub(1)];
    for i in 0..n.saturating_sub(1) {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                d[i] = tiny;
            }
            let fact = dl[i] / d[i];
            dl[i] = fact;
            d[i + 1] -= fact * du[i];
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            dl[i] = fact;
            let temp = du[i];
            du[i] = d[i + 1];
            d[i + 1] = temp - fact * d[i + 1];
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] *= -fact;
            }
            swapped[i] = true;
        }
    }
    if n > 0 && d[n - 1] == 0.0 {
        d[n - 1] = tiny;
    }
    for x in d.iter_mut() {
        if x.abs() < tiny {
            *x = tiny.copysign(*x);
        }
    }

    let solve = |b: &mut [f64]| {
        for i in 0..n.saturating_sub(1) {
            if swapped[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] -= dl[i] * b[i];
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            if i + 1 < n {
                acc -= du[i] * b[i + 1];
            }
            if i + 2 < n {
                acc -= du2[i] * b[i + 2];
            }
            b[i] = acc / d[i];
        }
    };

    // deterministic, non-degenerate starting vector
    let mut x: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * (((i + 7 * seed_shift) as f64) * 0.618_033_988_749_895).fract())
        .collect();
    let project = |x: &mut [f64]| {
        for u in previous {
            let dot: f64 = u.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
            for (xi, ui) in x.iter_mut().zip(u) {
                *xi -= dot * ui;
            }
        }
    };
    let normalise = |x: &mut [f64]| {
        let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nrm > 0.0 {
            x.iter_mut().for_each(|v| *v /= nrm);
        }
    };
    project(&mut x);
    normalise(&mut x);
    for _ in 0..5 {
        solve(&mut x);
        project(&mut x);
        normalise(&mut x);
    }
    x
}

/// Full decomposition of a symmetric matrix. Columns of `vectors` are
/// eigenvectors; values are returned unsorted.
pub(crate) fn full_decomposition(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let tri = Tridiagonal::reduce(m);
    let mut diag = tri.diag.clone();
    let mut off = tri.off.clone();
    let mut qt = tri.q_transposed();
    tridiagonal_ql(&mut diag, &mut off, Some(&mut qt))?;
    // qt row r is eigenvector r; DMatrix::from_row_slice gives rows = eigenvectors
    let vectors = DMatrix::from_row_slice(n, n, &qt).transpose();
    Ok((DVector::from_vec(diag), vectors))
}
