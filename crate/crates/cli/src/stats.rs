//! Statistical helpers: Kolmogorov–Smirnov test against a fitted normal,
//! QQ pairs, Monte-Carlo error bars, and the report record emitted by the
//! experiment harnesses.

use serde::Serialize;
use srnet_core::special::{inverse_normal_cdf, normal_cdf};

/// One-sample KS statistic of `samples` against the given CDF.
/// Sorts a copy; NaNs are rejected by assertion.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    assert!(!samples.is_empty());
    let mut s = samples.to_vec();
    assert!(s.iter().all(|v| v.is_finite()), "KS needs finite samples");
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len() as f64;
    let mut sup = 0.0f64;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        sup = sup
            .max((f - i as f64 / n).abs())
            .max(((i + 1) as f64 / n - f).abs());
    }
    sup
}

/// Survival function of the Kolmogorov distribution,
/// Q(λ) = 2·Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        if term < 1e-18 {
            break;
        }
        sum += if k % 2 == 1 { term } else { -term };
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value of the KS statistic at sample size n (Stephens'
/// finite-n adjustment).
pub fn ks_p_value(statistic: f64, n: usize) -> f64 {
    let sqrt_n = (n as f64).sqrt();
    kolmogorov_sf((sqrt_n + 0.12 + 0.11 / sqrt_n) * statistic)
}

/// KS test of samples against N(0, variance).
pub fn ks_against_normal(samples: &[f64], variance: f64) -> (f64, f64) {
    let sd = variance.sqrt();
    let stat = ks_statistic(samples, |x| normal_cdf(x / sd));
    (stat, ks_p_value(stat, samples.len()))
}

/// (sample quantile, fitted-normal quantile) pairs for QQ export.
pub fn qq_pairs(samples: &[f64], variance: f64) -> Vec<(f64, f64)> {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    let sd = variance.sqrt();
    s.iter()
        .enumerate()
        .map(|(i, &x)| (x, sd * inverse_normal_cdf((i as f64 + 0.5) / n as f64)))
        .collect()
}

/// Sample mean and the standard error of that mean.
pub fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n;
    (mean, (var / n).sqrt())
}

/// One harness check, serialized into the run summaries.
#[derive(Clone, Debug, Serialize)]
pub struct StatReport {
    pub name: String,
    pub statistic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    pub pass: bool,
    pub sample_size: usize,
}
