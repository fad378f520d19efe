//! Linear quantile regression on a heteroskedastic sample: slopes fan out
//! across quantiles because the noise scale grows with `x`.

use nalgebra::DMatrix;
use qirlab::qr::fit_qr;
use qirlab::rng::rng_from_seed;
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> qirlab::Result<()> {
    let mut rng = rng_from_seed(1);
    let n = 2000;
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..4.0)).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|&v| 1.0 + 0.5 * v + (0.2 + 0.3 * v) * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let design = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { x[i] });
    println!(
        "{:>5} {:>10} {:>10} {:>12}",
        "tau", "intercept", "slope", "check loss"
    );
    for tau in [0.1, 0.25, 0.5, 0.75, 0.9] {
        let fit = fit_qr(&design, &y, tau)?;
        // Population slope: 0.5 + 0.3 * z_tau.
        println!(
            "{tau:>5} {:>10.4} {:>10.4} {:>12.4}",
            fit.coefficients[0], fit.coefficients[1], fit.objective
        );
    }
    Ok(())
}
