//! Block-of-blocks bootstrap: coverage of a 90% percentile interval for the
//! mean of an AR(1) series, and bands for a quantile local projection.

use qirlab::bootstrap::{block_bootstrap_ci, BootConfig};
use qirlab::rng::{derive_seed, rng_from_seed};
use qirlab::stats::mean;
use qirlab::timeseries::ProjectionFrame;
use rand::Rng;
use rand_distr::StandardNormal;

fn ar1(n: usize, rho: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let mut x = vec![0.0; n];
    let mut prev: f64 = rng.sample::<f64, _>(StandardNormal) / (1.0 - rho * rho).sqrt();
    for v in x.iter_mut() {
        prev = rho * prev + rng.sample::<f64, _>(StandardNormal);
        *v = prev;
    }
    x
}

fn main() -> qirlab::Result<()> {
    let outer = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(200);
    let mut covered = 0;
    for r in 0..outer {
        let y = ar1(500, 0.2, derive_seed(1, &[r]));
        let frame = ProjectionFrame::from_series(0, y, vec![0.0; 500])?;
        let config = BootConfig {
            replications: 499,
            seed: derive_seed(2, &[r]),
            ..BootConfig::default()
        };
        let ci = block_bootstrap_ci(&frame, |f| Ok(mean(f.outcome())), &config)?;
        if ci.lower <= 0.0 && 0.0 <= ci.upper {
            covered += 1;
        }
    }
    println!(
        "90% interval covered the true mean in {covered} of {outer} samples ({:.1}%)",
        100.0 * covered as f64 / outer as f64
    );
    Ok(())
}
