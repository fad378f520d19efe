//! Descriptive statistics used across modules.

use serde::{Deserialize, Serialize};

/// How an empirical quantile is read off the order statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum QuantileRule {
    /// Linear interpolation between order statistics at position `(n - 1) p`.
    #[default]
    Linear,
    /// Left-continuous inverse of the empirical CDF: the `ceil(n p)`-th order statistic.
    InverseCdf,
    /// Linear interpolation of the empirical CDF: position `n p` counted from
    /// one, clamped to the first order statistic. Exactly `floor(n p)`
    /// untied values lie at or below the result.
    EcdfLinear,
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation with the `n - 1` denominator.
pub fn sample_sd(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Empirical `p`-quantile of `values`. Reorders `values` in place (linear time).
pub fn quantile_in_place(values: &mut [f64], p: f64, rule: QuantileRule) -> f64 {
    let n = values.len();
    assert!(n > 0, "quantile of an empty sample");
    match rule {
        QuantileRule::Linear => {
            let pos = (n - 1) as f64 * p.clamp(0.0, 1.0);
            let lo = pos.floor() as usize;
            let frac = pos - lo as f64;
            let (_, &mut lower, upper) = values.select_nth_unstable_by(lo, f64::total_cmp);
            if frac == 0.0 || upper.is_empty() {
                return lower;
            }
            let next = upper.iter().cloned().fold(f64::INFINITY, f64::min);
            lower + frac * (next - lower)
        }
        QuantileRule::InverseCdf => {
            let k = ((n as f64 * p).ceil() as usize).clamp(1, n) - 1;
            let (_, &mut q, _) = values.select_nth_unstable_by(k, f64::total_cmp);
            q
        }
        QuantileRule::EcdfLinear => {
            let pos = n as f64 * p.clamp(0.0, 1.0);
            if pos <= 1.0 {
                return values.iter().cloned().fold(f64::INFINITY, f64::min);
            }
            let lo = pos.floor() as usize - 1;
            let frac = pos - pos.floor();
            let (_, &mut lower, upper) = values.select_nth_unstable_by(lo, f64::total_cmp);
            if frac == 0.0 || upper.is_empty() {
                return lower;
            }
            let next = upper.iter().cloned().fold(f64::INFINITY, f64::min);
            lower + frac * (next - lower)
        }
    }
}

/// Empirical `p`-quantile of `values` without modifying them.
pub fn quantile(values: &[f64], p: f64, rule: QuantileRule) -> f64 {
    let mut buf = values.to_vec();
    quantile_in_place(&mut buf, p, rule)
}

/// Interquartile range under the linear rule.
pub fn iqr(values: &[f64]) -> f64 {
    let mut buf = values.to_vec();
    let q3 = quantile_in_place(&mut buf, 0.75, QuantileRule::Linear);
    let q1 = quantile_in_place(&mut buf, 0.25, QuantileRule::Linear);
    q3 - q1
}

/// Sample skewness (moment estimator) and its large-sample standard error `sqrt(6 / n)`.
pub fn skewness(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = mean(x);
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
    (m3 / m2.powf(1.5), (6.0 / n).sqrt())
}
