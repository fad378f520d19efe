//! Block-of-blocks bootstrap over the rows of a projection frame.
//!
//! Each row already holds the lead outcome, the treatment and the lagged
//! controls, so resampling blocks of rows keeps that structure intact.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::stats::{self, QuantileRule};
use crate::timeseries::ProjectionFrame;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootConfig {
    pub block_length: usize,
    pub replications: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootConfig {
    fn default() -> Self {
        Self {
            block_length: 7,
            replications: 1000,
            level: 0.90,
            seed: 0,
        }
    }
}

impl BootConfig {
    pub fn validate(&self, rows: usize) -> Result<()> {
        if self.block_length < 1 || self.block_length > rows {
            return Err(Error::InvalidInput(format!(
                "block length {} outside 1..={rows}",
                self.block_length
            )));
        }
        if self.replications < 2 {
            return Err(Error::InvalidInput(
                "at least two replications are required".into(),
            ));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidInput(format!(
                "level {} outside (0, 1)",
                self.level
            )));
        }
        Ok(())
    }
}

/// Percentile interval and the draws behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootInterval {
    pub lower: f64,
    pub upper: f64,
    /// Successful replications in replication order.
    pub draws: Vec<f64>,
    pub failures: usize,
}

/// Row indices of one resample: `ceil(n / l)` blocks with starts drawn
/// uniformly from `0..=n - l`, concatenated and truncated to `n`.
pub fn block_indices(n: usize, block_length: usize, rng: &mut Rng) -> Vec<usize> {
    assert!(
        block_length >= 1 && block_length <= n,
        "block length outside 1..=n"
    );
    let blocks = n.div_ceil(block_length);
    let mut out = Vec::with_capacity(blocks * block_length);
    for _ in 0..blocks {
        let start = rng.random_range(0..=n - block_length);
        out.extend(start..start + block_length);
    }
    out.truncate(n);
    out
}

/// Percentile interval `[q((1 - level) / 2), q(1 - (1 - level) / 2)]` with linear interpolation.
pub fn percentile_interval(draws: &[f64], level: f64) -> (f64, f64) {
    let a = (1.0 - level) / 2.0;
    let mut buf = draws.to_vec();
    let lo = stats::quantile_in_place(&mut buf, a, QuantileRule::Linear);
    let hi = stats::quantile_in_place(&mut buf, 1.0 - a, QuantileRule::Linear);
    (lo, hi)
}

/// Bootstraps an estimator returning several statistics at once; one
/// interval per statistic. Replication `r` uses the seed derived from
/// `(config.seed, r)`, so results do not depend on thread scheduling.
pub fn block_bootstrap_many<F>(
    frame: &ProjectionFrame,
    estimator: F,
    config: &BootConfig,
) -> Result<Vec<BootInterval>>
where
    F: Fn(&ProjectionFrame) -> Result<Vec<f64>> + Sync,
{
    let n = frame.len();
    config.validate(n)?;
    let results: Vec<Result<Vec<f64>>> = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_from_seed(derive_seed(config.seed, &[r as u64]));
            let rows = block_indices(n, config.block_length, &mut rng);
            estimator(&frame.select_rows(&rows)?)
        })
        .collect();

    let mut ok: Vec<Vec<f64>> = Vec::with_capacity(results.len());
    let mut failures = 0;
    for res in results {
        match res {
            Ok(v) => ok.push(v),
            Err(e) => {
                log::debug!("bootstrap replication failed: {e}");
                failures += 1;
            }
        }
    }
    let total = config.replications;
    if failures * 10 > total || ok.len() < 2 {
        return Err(Error::TooManyFailures {
            failed: failures,
            total,
        });
    }
    let width = ok[0].len();
    if ok.iter().any(|v| v.len() != width) {
        return Err(Error::InvalidInput(
            "estimator returned a varying number of statistics".into(),
        ));
    }
    Ok((0..width)
        .map(|j| {
            let draws: Vec<f64> = ok.iter().map(|v| v[j]).collect();
            let (lower, upper) = percentile_interval(&draws, config.level);
            BootInterval {
                lower,
                upper,
                draws,
                failures,
            }
        })
        .collect())
}

/// Block-of-blocks bootstrap percentile interval for a scalar estimator.
pub fn block_bootstrap_ci<F>(
    frame: &ProjectionFrame,
    estimator: F,
    config: &BootConfig,
) -> Result<BootInterval>
where
    F: Fn(&ProjectionFrame) -> Result<f64> + Sync,
{
    let mut out = block_bootstrap_many(frame, |f| estimator(f).map(|v| vec![v]), config)?;
    Ok(out.remove(0))
}
