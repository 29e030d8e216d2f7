//! Standard normal density, distribution function and their logarithms.
//!
//! The distribution function is evaluated through `erfc`, which keeps full
//! relative accuracy in the lower tail. Below `z = -37` the complement
//! underflows, so `log_cdf` switches to the asymptotic Mills-ratio series.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// 0.9 quantile of the standard normal.
pub const Z_90: f64 = 1.281_551_565_544_600_4;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const ASYMPTOTIC_BELOW: f64 = -37.0;

pub fn pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn log_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// Φ(z).
pub fn cdf(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 - 0.5 * libm::erfc(z * FRAC_1_SQRT_2)
    } else {
        0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
    }
}

/// log Φ(z), finite for every finite `z`.
pub fn log_cdf(z: f64) -> f64 {
    if z >= 0.0 {
        (-0.5 * libm::erfc(z * FRAC_1_SQRT_2)).ln_1p()
    } else if z > ASYMPTOTIC_BELOW {
        (0.5 * libm::erfc(-z * FRAC_1_SQRT_2)).ln()
    } else {
        let w = 1.0 / (z * z);
        let series = 1.0 - w * (1.0 - 3.0 * w * (1.0 - 5.0 * w * (1.0 - 7.0 * w)));
        log_pdf(z) - (-z).ln() + series.ln()
    }
}

/// N(z)/Φ(z), the inverse Mills ratio, computed in the log domain.
pub fn pdf_over_cdf(z: f64) -> f64 {
    (log_pdf(z) - log_cdf(z)).exp()
}

/// log(Φ(z) / Φ(-z)), the log-odds of a probit probability.
pub fn log_odds(z: f64) -> f64 {
    log_cdf(z) - log_cdf(-z)
}
