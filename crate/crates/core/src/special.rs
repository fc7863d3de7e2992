//! Standard normal distribution helpers.

use crate::math;

const SQRT_2: f64 = core::f64::consts::SQRT_2;

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    math::exp(-0.5 * x * x) / math::sqrt(2.0 * core::f64::consts::PI)
}

/// Standard normal CDF via `erfc`, accurate in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * math::erfc(-x / SQRT_2)
}

/// Inverse of [`normal_cdf`] by bisection; `p` outside (0, 1) maps to ±inf.
pub fn normal_quantile(p: f64) -> f64 {
    if p.is_nan() {
        return f64::NAN;
    }
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `Phi^{-1}(3/4)^2`, the median of a chi-square variable with one degree of
/// freedom. Used by the matrix-depth threshold and the Kendall scale.
pub fn depth_beta() -> f64 {
    let q = normal_quantile(0.75);
    q * q
}

/// `E min(|Z|, 1)` for `Z ~ N(0, 1)`, which equals `2(phi(0) - phi(1)) + 2(1 - Phi(1))`.
pub fn gaussian_clipped_l1_moment() -> f64 {
    2.0 * (normal_pdf(0.0) - normal_pdf(1.0)) + 2.0 * (1.0 - normal_cdf(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-10, 0.01, 0.25, 0.5, 0.75, 0.975, 1.0 - 1e-9] {
            let x = normal_quantile(p);
            assert!((normal_cdf(x) - p).abs() <= 1e-14 + 1e-12 * p, "p={p}");
        }
        assert!(normal_quantile(0.5).abs() < 1e-15);
    }

    #[test]
    fn beta_constant() {
        let b = depth_beta();
        assert!((b - 0.45494).abs() < 1e-5, "{b}");
        assert!((normal_cdf(b.sqrt()) - 0.75).abs() < 1e-6);
        assert!((normal_quantile(0.975) - 1.959963984540054).abs() < 1e-12);
    }

    #[test]
    fn clipped_moment_value() {
        assert!((gaussian_clipped_l1_moment() - 0.6313).abs() < 1e-4);
    }
}
