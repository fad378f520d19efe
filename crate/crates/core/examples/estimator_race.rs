//! Monte Carlo race of the quantile estimators against the oracle on the
//! simulated SVAR. Usage: `cargo run --release --example estimator_race [reps] [horizons]`.

use qirlab::lp::EstimatorKind;
use qirlab::svar::{monte_carlo, DgpParams, McSpec, SimConfig};

fn main() -> qirlab::Result<()> {
    let mut args = std::env::args().skip(1);
    let reps = args.next().and_then(|a| a.parse().ok()).unwrap_or(100);
    let horizons = args.next().and_then(|a| a.parse().ok()).unwrap_or(3);
    let config = SimConfig {
        mc_reps: reps,
        seed: 2024,
        ..SimConfig::default()
    };
    let mc = McSpec::new(
        vec![
            EstimatorKind::QlpNoControls,
            EstimatorKind::QlpWithControls,
            EstimatorKind::GqrLp,
        ],
        vec![0.1, 0.5, 0.9],
        horizons,
    );
    let start = std::time::Instant::now();
    let table = monte_carlo(&DgpParams::default(), &config, &mc)?;
    println!(
        "{} replications ({} failed) in {:.1?}",
        table.replications,
        table.failures,
        start.elapsed()
    );
    println!(
        "{:>5} {:>3} {:>18} {:>9} {:>8} {:>8}",
        "tau", "h", "estimator", "bias", "rmse", "truth"
    );
    for r in &table.rows {
        println!(
            "{:>5} {:>3} {:>18} {:>9.3} {:>8.3} {:>8.3}",
            r.tau.map(|t| t.to_string()).unwrap_or_default(),
            r.horizon,
            r.estimator.name(),
            r.mean_bias,
            r.rmse,
            r.truth
        );
    }
    Ok(())
}
