//! Aggregate estimator, centred residuals, pair-restricted variance estimators
//! and normal-approximation inference.

use crate::depgraph::PairSet;
use crate::normal::two_sided_critical;
use crate::{Error, Result};

/// Nonnegative aggregation weights `nu_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightScheme {
    nu: Vec<f64>,
}

impl WeightScheme {
    pub fn new(nu: Vec<f64>) -> Result<Self> {
        if nu.is_empty() {
            return Err(Error::InvalidDimension("weights need n >= 1".into()));
        }
        if let Some(bad) = nu.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::NegativeInput(format!("weight {bad}")));
        }
        Ok(Self { nu })
    }

    /// `nu_i = 1/n`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension("weights need n >= 1".into()));
        }
        Ok(Self {
            nu: vec![1.0 / n as f64; n],
        })
    }

    /// Rejects weights with `n max_i nu_i > nu_bar`.
    pub fn with_bound(nu: Vec<f64>, nu_bar: f64) -> Result<Self> {
        let w = Self::new(nu)?;
        if w.nu_bar() > nu_bar * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "n max nu = {} exceeds bound {nu_bar}",
                w.nu_bar()
            )));
        }
        Ok(w)
    }

    pub fn len(&self) -> usize {
        self.nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.nu
    }

    /// Smallest admissible uniform bound, `n max_i nu_i`.
    pub fn nu_bar(&self) -> f64 {
        self.len() as f64 * self.nu.iter().cloned().fold(0.0, f64::max)
    }
}

/// `zeta_i = y_i psi_i - theta_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals(pub Vec<f64>);

impl Residuals {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn same_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `sum_i nu_i y_i psi_i`.
pub fn aggregate_estimate(y: &[f64], psi: &[f64], weights: &WeightScheme) -> Result<f64> {
    same_len(y.len(), psi.len())?;
    same_len(y.len(), weights.len())?;
    Ok(y.iter()
        .zip(psi)
        .zip(weights.as_slice())
        .map(|((y, p), w)| w * y * p)
        .sum())
}

pub fn residuals(y: &[f64], psi: &[f64], theta: &[f64]) -> Result<Residuals> {
    same_len(y.len(), psi.len())?;
    same_len(y.len(), theta.len())?;
    Ok(Residuals(
        y.iter()
            .zip(psi)
            .zip(theta)
            .map(|((y, p), t)| y * p - t)
            .collect(),
    ))
}

fn pair_sum(r: &Residuals, weights: &WeightScheme, pairs: &PairSet) -> Result<f64> {
    same_len(r.len(), weights.len())?;
    if let Some(m) = pairs.max_unit() {
        if m >= r.len() {
            return Err(Error::InvalidDimension(format!(
                "pair index {m} out of range for n = {}",
                r.len()
            )));
        }
    }
    let nu = weights.as_slice();
    let z = r.as_slice();
    Ok(pairs.iter().map(|(i, j)| nu[i] * nu[j] * z[i] * z[j]).sum())
}

/// `sum_{(i,j) in E} nu_i nu_j zeta_i zeta_j` over a symmetric, reflexive pair set.
pub fn variance_local(r: &Residuals, weights: &WeightScheme, pairs: &PairSet) -> Result<f64> {
    debug_assert!(pairs.is_symmetric());
    pair_sum(r, weights, pairs)
}

/// Same pair-sum restricted to the pairs with nonzero residual correlation.
pub fn variance_correlation(
    r: &Residuals,
    weights: &WeightScheme,
    corr_pairs: &PairSet,
) -> Result<f64> {
    pair_sum(r, weights, corr_pairs)
}

/// Pair-sum over an assumed set sandwiched as `corr ⊆ assumed ⊆ full`.
pub fn variance_conservative(
    r: &Residuals,
    weights: &WeightScheme,
    assumed_pairs: &PairSet,
    full_pairs: &PairSet,
    corr_pairs: &PairSet,
) -> Result<f64> {
    if !corr_pairs.is_subset_of(assumed_pairs) {
        return Err(Error::SandwichViolation(
            "correlation pairs are not contained in the assumed pairs".into(),
        ));
    }
    if !assumed_pairs.is_subset_of(full_pairs) {
        return Err(Error::SandwichViolation(
            "assumed pairs are not contained in the dependency pairs".into(),
        ));
    }
    pair_sum(r, weights, assumed_pairs)
}

/// `(nu_bar^2 / n^2) sum_i |N_i| y_norm^2 psi_norm^2`.
pub fn variance_upper_bound(
    neigh_sizes: &[usize],
    y_norm: f64,
    psi_norm: f64,
    nu_bar: f64,
    n: usize,
) -> Result<f64> {
    for (name, v) in [
        ("y_norm", y_norm),
        ("psi_norm", psi_norm),
        ("nu_bar", nu_bar),
    ] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::NegativeInput(format!("{name} = {v}")));
        }
    }
    if n == 0 {
        return Err(Error::InvalidDimension("n must be >= 1".into()));
    }
    let total: f64 = neigh_sizes.iter().map(|&m| m as f64).sum();
    let n = n as f64;
    Ok(nu_bar * nu_bar / (n * n) * total * y_norm * y_norm * psi_norm * psi_norm)
}

/// Test and interval at one nominal level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelResult {
    pub level: f64,
    pub critical: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub tau_hat: f64,
    pub sigma_hat: f64,
    /// NaN when degenerate.
    pub z_stat: f64,
    pub degenerate: bool,
    pub levels: Vec<LevelResult>,
}

impl InferenceResult {
    pub fn at(&self, level: f64) -> Option<&LevelResult> {
        self.levels.iter().find(|l| l.level == level)
    }

    pub fn reject_flags(&self) -> Vec<(f64, bool)> {
        self.levels.iter().map(|l| (l.level, l.reject)).collect()
    }
}

/// Two-sided normal tests of `tau = tau_null` with Wald intervals.
///
/// A nonpositive (or non-finite) `sigma2_hat` is flagged degenerate: no
/// rejection and an infinite interval at every level.
pub fn make_inference(
    tau_hat: f64,
    sigma2_hat: f64,
    tau_null: f64,
    levels: &[f64],
) -> Result<InferenceResult> {
    for &l in levels {
        if !(l > 0.0 && l < 1.0) {
            return Err(Error::InvalidProbability(l));
        }
    }
    let degenerate = !(sigma2_hat > 0.0 && sigma2_hat.is_finite());
    let sigma_hat = if degenerate { 0.0 } else { sigma2_hat.sqrt() };
    let z_stat = if degenerate {
        f64::NAN
    } else {
        (tau_hat - tau_null) / sigma_hat
    };
    let levels = levels
        .iter()
        .map(|&level| {
            let critical = two_sided_critical(level);
            if degenerate {
                LevelResult {
                    level,
                    critical,
                    ci_lo: f64::NEG_INFINITY,
                    ci_hi: f64::INFINITY,
                    reject: false,
                }
            } else {
                LevelResult {
                    level,
                    critical,
                    ci_lo: tau_hat - critical * sigma_hat,
                    ci_hi: tau_hat + critical * sigma_hat,
                    reject: z_stat.abs() > critical,
                }
            }
        })
        .collect();
    Ok(InferenceResult {
        tau_hat,
        sigma_hat,
        z_stat,
        degenerate,
        levels,
    })
}
