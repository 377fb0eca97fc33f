use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::ln_gamma;

/// An edge-weight distribution. Serialised as `{"kind": ..., params}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightDistribution {
    Dirac {
        c: f64,
    },
    Bernoulli {
        p: f64,
    },
    Poisson {
        rate: f64,
    },
    Gaussian {
        mean: f64,
        variance: f64,
    },
    Beta {
        shape_a: f64,
        shape_b: f64,
    },
    Exponential {
        rate: f64,
    },
    /// `(1 - present_prob) δ₀ + present_prob · inner`
    ZeroInflated {
        present_prob: f64,
        inner: Box<WeightDistribution>,
    },
}

impl WeightDistribution {
    pub fn zero_inflated(present_prob: f64, inner: WeightDistribution) -> Self {
        WeightDistribution::ZeroInflated {
            present_prob,
            inner: Box::new(inner),
        }
    }

    pub fn validate(&self) -> Result<()> {
        use WeightDistribution::*;
        let bad = |msg: String| Err(Error::InvalidDistribution(msg));
        match self {
            Dirac { c } if !c.is_finite() => bad(format!("dirac location {c} not finite")),
            Bernoulli { p } if !(0.0..=1.0).contains(p) => bad(format!("bernoulli probability {p} outside [0, 1]")),
            Poisson { rate } if !(rate.is_finite() && *rate >= 0.0) => {
                bad(format!("poisson rate {rate} must be non-negative"))
            }
            Gaussian { mean, variance } if !(mean.is_finite() && variance.is_finite() && *variance >= 0.0) => {
                bad(format!("gaussian mean {mean} / variance {variance} invalid"))
            }
            Beta { shape_a, shape_b }
                if !(shape_a.is_finite() && shape_b.is_finite() && *shape_a > 0.0 && *shape_b > 0.0) =>
            {
                bad(format!("beta shapes ({shape_a}, {shape_b}) must be positive"))
            }
            Exponential { rate } if !(rate.is_finite() && *rate > 0.0) => {
                bad(format!("exponential rate {rate} must be positive"))
            }
            ZeroInflated { present_prob, inner } => {
                if !(0.0..=1.0).contains(present_prob) {
                    return bad(format!("presence probability {present_prob} outside [0, 1]"));
                }
                if matches!(**inner, ZeroInflated { .. }) {
                    return bad("zero-inflated distributions cannot be nested".into());
                }
                inner.validate()
            }
            _ => Ok(()),
        }
    }

    /// First and second raw moments `(E X, E X²)`.
    pub fn raw_moments(&self) -> (f64, f64) {
        use WeightDistribution::*;
        match self {
            Dirac { c } => (*c, c * c),
            Bernoulli { p } => (*p, *p),
            Poisson { rate } => (*rate, rate + rate * rate),
            Gaussian { mean, variance } => (*mean, variance + mean * mean),
            Beta { shape_a: a, shape_b: b } => {
                let m1 = a / (a + b);
                (m1, m1 * (a + 1.0) / (a + b + 1.0))
            }
            Exponential { rate } => (1.0 / rate, 2.0 / (rate * rate)),
            ZeroInflated { present_prob, inner } => {
                let (m1, m2) = inner.raw_moments();
                (present_prob * m1, present_prob * m2)
            }
        }
    }

    /// Mean and variance.
    pub fn moments(&self) -> (f64, f64) {
        use WeightDistribution::*;
        match self {
            Dirac { c } => (*c, 0.0),
            Bernoulli { p } => (*p, p * (1.0 - p)),
            Poisson { rate } => (*rate, *rate),
            Gaussian { mean, variance } => (*mean, *variance),
            Exponential { rate } => (1.0 / rate, 1.0 / (rate * rate)),
            Beta { shape_a: a, shape_b: b } => {
                let s = a + b;
                (a / s, a * b / (s * s * (s + 1.0)))
            }
            ZeroInflated {
                present_prob: rho,
                inner,
            } => {
                let (m1, m2) = inner.raw_moments();
                let mean = rho * m1;
                (mean, (rho * m2 - mean * mean).max(0.0))
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        use WeightDistribution::*;
        match self {
            Dirac { c } => *c,
            Bernoulli { p } => {
                if rng.gen::<f64>() < *p {
                    1.0
                } else {
                    0.0
                }
            }
            Poisson { rate } => sample_poisson(*rate, rng) as f64,
            Gaussian { mean, variance } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + variance.sqrt() * z
            }
            Beta { shape_a, shape_b } => sample_beta(*shape_a, *shape_b, rng),
            Exponential { rate } => {
                let e: f64 = Exp1.sample(rng);
                e / rate
            }
            ZeroInflated { present_prob, inner } => {
                if rng.gen::<f64>() < *present_prob {
                    inner.sample(rng)
                } else {
                    0.0
                }
            }
        }
    }
}

/// Beta variate as `G₁ / (G₁ + G₂)` with independent unit-scale gammas.
fn sample_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let ga = Gamma::new(a, 1.0).expect("beta shape validated positive");
    let gb = Gamma::new(b, 1.0).expect("beta shape validated positive");
    loop {
        let x: f64 = ga.sample(rng);
        let y: f64 = gb.sample(rng);
        let s = x + y;
        if s > 0.0 {
            return x / s;
        }
    }
}

/// Poisson variate: sequential inversion for small rates, PTRS
/// (transformed rejection with squeeze) otherwise.
pub(crate) fn sample_poisson<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> u64 {
    if rate <= 0.0 {
        return 0;
    }
    if rate < 10.0 {
        let u: f64 = rng.gen();
        let mut k = 0u64;
        let mut p = (-rate).exp();
        let mut cdf = p;
        while u > cdf {
            k += 1;
            p *= rate / k as f64;
            cdf += p;
            if p < f64::MIN_POSITIVE && cdf >= 1.0 - 1e-15 {
                break;
            }
        }
        return k;
    }
    let slam = rate.sqrt();
    let loglam = rate.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.024_83 * b;
    let inv_alpha = 1.123_9 + 1.132_8 / (b - 3.4);
    let vr = 0.927_7 - 3.622_4 / (b - 2.0);
    loop {
        let u = rng.gen::<f64>() - 0.5;
        let v: f64 = rng.gen();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + rate + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln() <= -rate + k * loglam - ln_gamma(k + 1.0) {
            return k as u64;
        }
    }
}
