//! Penalized logit and probit fits of a binary indicator on controls.

use nalgebra::DMatrix;
use qirlab::binary::{fit_binary, LinkKind};
use qirlab::rng::rng_from_seed;
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> qirlab::Result<()> {
    let mut rng = rng_from_seed(7);
    let n = 1000;
    let w = DMatrix::from_fn(n, 3, |_, j| {
        if j == 0 {
            1.0
        } else {
            rng.sample(StandardNormal)
        }
    });
    let ind: Vec<bool> = (0..n)
        .map(|i| {
            let eta: f64 = -0.5 + 1.0 * w[(i, 1)] - 0.7 * w[(i, 2)];
            rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp())
        })
        .collect();
    for link in [LinkKind::Logit, LinkKind::Probit] {
        let fit = fit_binary(&w, &ind, link)?;
        let mean_p = fit.fitted_probabilities.iter().sum::<f64>() / n as f64;
        println!(
            "{link:?}: coefficients {:.3?}, iterations {}, mean fitted probability {mean_p:.4}",
            fit.coefficients, fit.iterations
        );
    }
    let share = ind.iter().filter(|b| **b).count() as f64 / n as f64;
    println!("share of ones {share:.4}");
    Ok(())
}
