use nalgebra::DMatrix;
use proptest::prelude::*;
use qirlab::gqr::{fit_gqr, GqrConfig, SqfSpec};
use qirlab::timeseries::{ProjectionFrame, INTERCEPT};

fn frame() -> impl Strategy<Value = ProjectionFrame> {
    (40usize..160, 0usize..3).prop_flat_map(|(n, extra)| {
        (
            proptest::collection::vec(-2.0f64..2.0, n),
            proptest::collection::vec(-2.0f64..2.0, n * extra),
            proptest::collection::vec(-3.0f64..3.0, n),
            -1.0f64..1.0,
        )
            .prop_map(move |(d, w, e, slope)| {
                let controls = DMatrix::from_fn(n, extra + 1, |i, j| {
                    if j == 0 {
                        1.0
                    } else {
                        w[i * extra + j - 1]
                    }
                });
                let y: Vec<f64> = (0..n)
                    .map(|i| {
                        slope * d[i] + 0.3 * controls.row(i).sum() + (1.0 + 0.5 * d[i].abs()) * e[i]
                    })
                    .collect();
                let names = (0..=extra)
                    .map(|j| {
                        if j == 0 {
                            INTERCEPT.to_string()
                        } else {
                            format!("w{j}")
                        }
                    })
                    .collect();
                ProjectionFrame::new(0, (0..n as i64).collect(), y, d, controls, names).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn coverage_is_within_one_over_t(f in frame(), tau in 0.05f64..0.95, quad in any::<bool>()) {
        let spec = if quad { SqfSpec::Quadratic } else { SqfSpec::Linear };
        let fit = fit_gqr(&f, tau, spec, &GqrConfig::default()).unwrap();
        prop_assert!((fit.coverage - tau).abs() <= 1.0 / f.len() as f64 + 1e-12,
            "coverage {} tau {} T {}", fit.coverage, tau, f.len());
        prop_assert_eq!(fit.stage_objectives.len(), 3);
        prop_assert!(fit.stage_objectives.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn outcome_location_shift_moves_only_the_intercept(f in frame(), tau in 0.1f64..0.9, c in -5.0f64..5.0) {
        let shifted = f.with_outcome(f.outcome().iter().map(|v| v + c).collect()).unwrap();
        let config = GqrConfig::default();
        let a = fit_gqr(&f, tau, SqfSpec::Linear, &config).unwrap();
        let b = fit_gqr(&shifted, tau, SqfSpec::Linear, &config).unwrap();
        let tol = a.grid_resolution[0];
        prop_assert!((a.betas[0] - b.betas[0]).abs() <= tol, "{} vs {}", a.betas[0], b.betas[0]);
        prop_assert!((b.alpha - a.alpha - c).abs() < 1e-6 + tol * 10.0);
    }
}
