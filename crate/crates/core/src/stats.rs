//! Small statistical helpers: normal quantiles, type-7 sample quantiles,
//! mean/standard deviation and autocorrelation-based effective sample size.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Φ⁻¹(q) for the standard normal.
pub fn normal_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!("normal quantile requires q in (0,1), got {q}")));
    }
    let n = Normal::new(0.0, 1.0).expect("standard normal is valid");
    Ok(n.inverse_cdf(q))
}

/// Sample quantile by linear interpolation between order statistics
/// (the "type 7" rule): h = (N−1) q, x[⌊h⌋] + (h − ⌊h⌋)(x[⌊h⌋+1] − x[⌊h⌋]).
/// `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean and sample standard deviation (denominator n−1). The deviation is
/// `None` for fewer than two values.
pub fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let ss: f64 = values.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, Some((ss / (n - 1) as f64).sqrt()))
}

/// Effective sample size of a scalar chain using Geyer's initial positive
/// sequence estimator on the empirical autocorrelations. A constant chain
/// reports 1.
pub fn effective_sample_size(chain: &[f64]) -> f64 {
    let n = chain.len();
    if n < 2 {
        return n as f64;
    }
    let mean = chain.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = chain.iter().map(|x| x - mean).collect();
    let var0 = centered.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if var0 <= f64::EPSILON * mean.abs().max(1.0).powi(2) {
        return 1.0;
    }
    let autocorr = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / (n as f64 * var0)
    };
    let mut tau = -1.0;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = autocorr(lag) + autocorr(lag + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    (n as f64 / tau.max(1.0 / n as f64)).min(n as f64 * (n as f64).log10().max(1.0))
}
