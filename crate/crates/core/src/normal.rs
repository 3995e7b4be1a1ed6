//! Standard normal quantiles.

use statrs::distribution::{ContinuousCDF, Normal};

/// Quantile function of N(0, 1). `prob` must lie in (0, 1).
pub fn quantile(prob: f64) -> f64 {
    // statrs inverts erfc with Boost's rational approximations (~1e-15 relative).
    Normal::standard().inverse_cdf(prob)
}

/// Two-sided critical value `q_{1 - level/2}`.
pub fn two_sided_critical(level: f64) -> f64 {
    quantile(1.0 - level / 2.0)
}

pub fn cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}
