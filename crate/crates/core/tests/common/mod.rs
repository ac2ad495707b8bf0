//! Reference implementations used only to derive expected values. None of
//! these share code with the crate under test.
#![allow(dead_code)]

use std::f64::consts::PI;

/// `e^{-z²}` from the platform libm.
pub fn exp_neg_sq(z: f64) -> f64 {
    (-z * z).exp()
}

/// `erfc(z)` from the positive-term erf series for small |z| and the
/// classical Laplace continued fraction for large |z|.
pub fn erfc(z: f64) -> f64 {
    if z < 0.0 {
        return 2.0 - erfc(-z);
    }
    if z < 0.8 {
        // erf(z) = 2/√π e^{-z²} Σ 2ⁿ z^{2n+1} / (1·3·…·(2n+1))
        let mut term = z;
        let mut sum = z;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= 2.0 * z * z / (2.0 * n + 1.0);
            sum += term;
            if term <= 1e-18 * sum {
                break;
            }
        }
        1.0 - 2.0 / PI.sqrt() * exp_neg_sq(z) * sum
    } else {
        // erfc(z) = e^{-z²}/√π · 1/(z + (1/2)/(z + 1/(z + (3/2)/(z + …))))
        let mut tail = z;
        for k in (1..1000).rev() {
            tail = z + (k as f64 / 2.0) / tail;
        }
        exp_neg_sq(z) / PI.sqrt() / tail
    }
}

pub fn phi_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / 2f64.sqrt())
}

pub fn phi_pdf(x: f64) -> f64 {
    exp_neg_sq(x / 2f64.sqrt()) / (2.0 * PI).sqrt()
}

/// Φ⁻¹ by bisection on the oracle CDF.
pub fn phi_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
