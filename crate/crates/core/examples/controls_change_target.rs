//! `Y = D * U + W` with independent uniforms. The quantile of `Y` given `D`
//! alone has median slope 1/2, while quantile regression that also conditions
//! on `W` targets a different object away from the median.

use nalgebra::DMatrix;
use qirlab::gqr::{fit_gqr, GqrConfig, SqfSpec};
use qirlab::lp::{estimate_cell, EstimatorKind};
use qirlab::rng::rng_from_seed;
use qirlab::timeseries::{ProjectionFrame, INTERCEPT};
use rand::Rng;

fn main() -> qirlab::Result<()> {
    let n = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(100_000);
    let mut rng = rng_from_seed(5);
    let mut d = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let (dv, u, wv): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
        d.push(dv);
        w.push(wv);
        y.push(dv * u + wv);
    }
    let controls = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { w[i] });
    let frame = ProjectionFrame::new(
        0,
        (0..n as i64).collect(),
        y,
        d,
        controls,
        vec![INTERCEPT.into(), "w".into()],
    )?;
    let config = GqrConfig::default();
    for tau in [0.1, 0.5, 0.9] {
        let g = fit_gqr(&frame, tau, SqfSpec::Linear, &config)?;
        let q = estimate_cell(
            &frame,
            EstimatorKind::QlpWithControls,
            Some(tau),
            SqfSpec::Linear,
            &config,
        )?;
        println!(
            "tau={tau}: GQR slope {:.4} (coverage {:.4}), QR-with-controls slope {q:.4}",
            g.betas[0], g.coverage
        );
    }
    Ok(())
}
