//! Normal distribution helpers.

use core::f64::consts::{PI, SQRT_2};

/// Standard normal CDF, accurate in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * PI)
}

/// Inverse of [`normal_cdf`] on `(0, 1)`.
///
/// Rational initial guess followed by Halley steps on `erfc`; relative error
/// is at the level of a few ulps across the whole range.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p == 0.5 {
        return 0.0;
    }
    // Tail-symmetric work on q = min(p, 1-p).
    let (q, sign) = if p < 0.5 { (p, -1.0) } else { (1.0 - p, 1.0) };
    let t = libm::sqrt(-2.0 * libm::log(q));
    let mut x = t - (2.515517 + 0.802853 * t + 0.010328 * t * t)
        / (1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t);
    // x approximates the upper quantile of q; refine f(x) = Phi(-x) - q.
    for _ in 0..4 {
        let f = normal_cdf(-x) - q;
        let dens = normal_pdf(x);
        if dens == 0.0 {
            break;
        }
        let u = f / dens;
        x += u / (1.0 + 0.5 * x * u);
    }
    sign * x
}

/// Total variation between `N(0, I)` and `N(w, I)` in any dimension, given `|w|`.
pub fn gaussian_shift_tv(shift_norm: f64) -> f64 {
    (2.0 * normal_cdf(0.5 * shift_norm.abs()) - 1.0).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((normal_cdf(-3.0) / 0.001_349_898_031_630_093_3 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-12, 1e-6, 0.01, 0.2, 0.5, 0.75, 0.9, 0.999, 1.0 - 1e-9] {
            let x = normal_quantile(p);
            let back = normal_cdf(x);
            assert!((back - p).abs() <= 1e-13 * p.max(1e-3), "p={p} x={x} back={back}");
        }
        assert!((normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
    }

    #[test]
    fn shift_tv_one_sigma_apart() {
        // 2 Phi(1) - 1 for a shift of 2.
        assert!((gaussian_shift_tv(2.0) - 0.682_689_492_137_085_9).abs() < 1e-15);
        assert_eq!(gaussian_shift_tv(0.0), 0.0);
    }
}
