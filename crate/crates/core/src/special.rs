//! Scalar special functions used by the link families.

use libm::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, LN_2};

/// Arguments passed to `exp` are clamped to this range.
pub(crate) const EXP_ARG_MIN: f64 = -745.0;
pub(crate) const EXP_ARG_MAX: f64 = 709.0;

/// `ln(f64::MIN_POSITIVE)`, the floor for interval probabilities inside derivatives.
pub(crate) const LN_MIN_POSITIVE: f64 = -708.396_418_532_264_1;

/// 0.5 * ln(2π)
pub(crate) const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

#[inline]
pub(crate) fn clamped_exp(x: f64) -> f64 {
    x.clamp(EXP_ARG_MIN, EXP_ARG_MAX).exp()
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x + (-x).exp()
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// `ln(1 - e^x)` for `x <= 0`.
#[inline]
pub fn log1mexp(x: f64) -> f64 {
    if x >= 0.0 {
        f64::NEG_INFINITY
    } else if x > -LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// Scaled complementary error function `exp(x^2) erfc(x)` for `x >= 2`,
/// evaluated with the Laplace continued fraction.
pub fn erfcx_large(x: f64) -> f64 {
    debug_assert!(x >= 2.0);
    let mut f = x;
    for k in (1..=80).rev() {
        f = x + (0.5 * k as f64) / f;
    }
    FRAC_1_SQRT_PI / f
}

/// `ln Φ(t)` for the standard normal CDF, accurate in both tails.
pub fn log_ndtr(t: f64) -> f64 {
    if t < -8.0 {
        let x = -t * FRAC_1_SQRT_2;
        (0.5 * erfcx_large(x)).ln() - 0.5 * t * t
    } else if t < 0.0 {
        (0.5 * erfc(-t * FRAC_1_SQRT_2)).ln()
    } else {
        (-0.5 * erfc(t * FRAC_1_SQRT_2)).ln_1p()
    }
}

/// Φ(t)
#[inline]
pub fn ndtr(t: f64) -> f64 {
    0.5 * erfc(-t * FRAC_1_SQRT_2)
}

/// Neumaier compensated summation; order-dependent but deterministic.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erfcx_matches_erfc_where_both_are_accurate() {
        for &x in &[2.0f64, 3.0, 5.0, 8.0, 12.0] {
            let direct = (x * x).exp() * erfc(x);
            let rel = (erfcx_large(x) - direct).abs() / direct;
            assert!(rel < 1e-13, "x={x} rel={rel}");
        }
    }

    #[test]
    fn log_ndtr_is_continuous_at_the_switch() {
        let left = log_ndtr(-8.0 - 1e-12);
        let right = log_ndtr(-8.0 + 1e-12);
        assert!((left - right).abs() < 1e-10);
    }

    #[test]
    fn log_ndtr_far_tail() {
        // ln Φ(-40) from mpmath: -804.60844201375378...
        assert!((log_ndtr(-40.0) - (-804.608_442_013_753_8)).abs() < 1e-9);
        assert!(log_ndtr(40.0) == 0.0 || log_ndtr(40.0) > -1e-300);
    }

    #[test]
    fn log1mexp_branches() {
        assert!((log1mexp(-0.1) - (1.0 - (-0.1f64).exp()).ln()).abs() < 1e-14);
        assert!((log1mexp(-5.0) - (1.0 - (-5.0f64).exp()).ln()).abs() < 1e-14);
        assert_eq!(log1mexp(0.0), f64::NEG_INFINITY);
    }

    #[test]
    fn softplus_extremes() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) == 0.0);
        assert!((softplus(0.0) - LN_2).abs() < 1e-15);
    }
}
