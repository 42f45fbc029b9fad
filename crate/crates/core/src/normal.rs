//! Standard normal density and distribution function.
//!
//! Every cell probability in the crate reduces to differences of the normal
//! CDF, so the interval routine picks the tail that avoids cancellation.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// `1 / sqrt(2 pi)`.
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub fn pdf(z: f64) -> f64 {
    if z.is_infinite() {
        return 0.0;
    }
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

#[inline]
pub fn cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Upper tail `1 - cdf(z)`, accurate for large positive `z`.
#[inline]
pub fn sf(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

/// `P(lo <= Z < hi)` for a standard normal `Z`; either end may be infinite.
pub fn interval_prob(lo: f64, hi: f64) -> f64 {
    if !(lo < hi) {
        return 0.0;
    }
    let p = if lo >= 0.0 {
        sf(lo) - sf(hi)
    } else if hi <= 0.0 {
        cdf(hi) - cdf(lo)
    } else {
        1.0 - sf(hi) - cdf(lo)
    };
    p.max(0.0)
}

/// Density of `N(mean, var)` at `x`.
pub fn density(x: f64, mean: f64, var: f64) -> f64 {
    let z = (x - mean) / var.sqrt();
    (-0.5 * z * z).exp() / (2.0 * PI * var).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pdf_at_origin() {
        assert!((pdf(0.0) - 0.398_942_280_4).abs() < 1e-10);
        assert_eq!(pdf(f64::INFINITY), 0.0);
    }

    #[test]
    fn cdf_reference_values() {
        // Reference values from a 50-digit evaluation.
        let refs = [
            (0.0, 0.5),
            (1.0, 0.841_344_746_068_542_9),
            (-1.0, 0.158_655_253_931_457_05),
            (2.0, 0.977_249_868_051_820_8),
            (-2.0, 0.022_750_131_948_179_21),
            (-5.0, 2.866_515_718_791_939e-7),
        ];
        for (z, want) in refs {
            let got = cdf(z);
            assert!((got - want).abs() <= 1e-15, "cdf({z}) = {got}, want {want}");
        }
    }

    #[test]
    fn interval_handles_infinite_ends() {
        assert_eq!(interval_prob(f64::NEG_INFINITY, f64::INFINITY), 1.0);
        assert!((interval_prob(f64::NEG_INFINITY, 0.0) - 0.5).abs() < 1e-16);
        assert!((interval_prob(-2.0, 2.0) - 0.954_499_736_103_641_6).abs() < 1e-15);
        assert_eq!(interval_prob(1.0, 1.0), 0.0);
    }

    #[test]
    fn far_tail_keeps_relative_precision() {
        // 1 - cdf would cancel to zero here.
        let p = interval_prob(10.0, f64::INFINITY);
        assert!((p / 7.619_853_024_160_527e-24 - 1.0).abs() < 1e-12);
    }
}
