//! Simulation laboratory: a bivariate structural VAR whose outcome volatility
//! depends on the lagged treatment, with oracle benchmarks and Monte Carlo races.
//!
//! The model, with `Y` ordered first:
//!
//! ```text
//! vol_t = (1 + phi * sqrt(exp(D_{t-1}))) / (1 + phi)
//! Y_t   = rho_y * Y_{t-1} + delta_dy * D_{t-1} + vol_t * Z^Y_t
//! D_t   = gamma * Y_t + delta_yd * Y_{t-1} + rho_d * D_{t-1} + Z^D_t
//! ```

use std::io::Write;
use std::path::Path;

use log::warn;
use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gqr::{GqrConfig, SqfSpec};
use crate::lp::{self, EstimatorKind, LpConfig, LpDesign, QirSurface};
use crate::rng::{derive_seed, rng_from_seed};
use crate::stats::{self, QuantileRule};
use crate::timeseries::{FrameSpec, OutcomeTransform, Panel};
use crate::{qr, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpParams {
    pub rho_y: f64,
    pub rho_d: f64,
    pub delta_dy: f64,
    pub delta_yd: f64,
    pub gamma: f64,
    pub phi: f64,
}

impl Default for DgpParams {
    fn default() -> Self {
        Self {
            rho_y: 0.5,
            rho_d: -0.1,
            delta_dy: -0.25,
            delta_yd: -0.1,
            gamma: -0.2,
            phi: 9.0,
        }
    }
}

impl DgpParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.rho_y,
            self.rho_d,
            self.delta_dy,
            self.delta_yd,
            self.gamma,
            self.phi,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("parameters must be finite".into()));
        }
        if self.phi < 0.0 {
            return Err(Error::InvalidInput(format!(
                "phi must be non-negative, got {}",
                self.phi
            )));
        }
        Ok(())
    }

    /// Volatility multiplier given the previous treatment.
    pub fn vol(&self, d_prev: f64) -> f64 {
        (1.0 + self.phi * (0.5 * d_prev).exp()) / (1.0 + self.phi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Retained sample length.
    pub t: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub mc_reps: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            t: 1000,
            burn_in: 1000,
            seed: 0,
            mc_reps: 100,
        }
    }
}

/// A simulated path after burn-in, with the shocks that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimPath {
    pub y: Vec<f64>,
    pub d: Vec<f64>,
    pub z_y: Vec<f64>,
    pub z_d: Vec<f64>,
}

impl SimPath {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Panel with columns `y`, `d`, `z_y`, `z_d` and index `0..T`.
    pub fn to_panel(&self) -> Result<Panel> {
        Panel::new(
            (0..self.len() as i64).collect(),
            vec![
                ("y".into(), self.y.clone()),
                ("d".into(), self.d.clone()),
                ("z_y".into(), self.z_y.clone()),
                ("z_d".into(), self.z_d.clone()),
            ],
        )
    }

    /// `Y^c_{t+h} = Y_t + ... + Y_{t+h}` for `t = 0..T-h`.
    pub fn cumulative(&self, h: usize) -> Vec<f64> {
        if self.len() <= h {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(self.len() - h);
        let mut acc: f64 = self.y[..=h].iter().sum();
        out.push(acc);
        for t in 1..self.len() - h {
            acc += self.y[t + h] - self.y[t - 1];
            out.push(acc);
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "y", "d", "z_y", "z_d"])?;
        for t in 0..self.len() {
            w.write_record([
                t.to_string(),
                self.y[t].to_string(),
                self.d[t].to_string(),
                self.z_y[t].to_string(),
                self.z_d[t].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the recursion from a zero initial state on the given shocks and
/// drops the first `burn_in` periods.
pub fn simulate_with_shocks(
    params: &DgpParams,
    z_y: &[f64],
    z_d: &[f64],
    burn_in: usize,
) -> Result<SimPath> {
    params.validate()?;
    if z_y.len() != z_d.len() || z_y.len() <= burn_in {
        return Err(Error::InvalidInput(
            "shock series must have equal length greater than the burn-in".into(),
        ));
    }
    let n = z_y.len();
    let mut y = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    let (mut y_prev, mut d_prev) = (0.0, 0.0);
    for t in 0..n {
        let yt = params.rho_y * y_prev + params.delta_dy * d_prev + params.vol(d_prev) * z_y[t];
        let dt = params.gamma * yt + params.delta_yd * y_prev + params.rho_d * d_prev + z_d[t];
        if !(yt.is_finite() && dt.is_finite()) {
            return Err(Error::NonFiniteState(t));
        }
        y.push(yt);
        d.push(dt);
        y_prev = yt;
        d_prev = dt;
    }
    Ok(SimPath {
        y: y.split_off(burn_in),
        d: d.split_off(burn_in),
        z_y: z_y[burn_in..].to_vec(),
        z_d: z_d[burn_in..].to_vec(),
    })
}

/// Simulates `burn_in + t` periods with standard normal shocks drawn from
/// the seeded generator (`Z^Y_t` then `Z^D_t` each period).
pub fn simulate(params: &DgpParams, config: &SimConfig) -> Result<SimPath> {
    if config.t < 1 {
        return Err(Error::InvalidInput(
            "sample length must be at least 1".into(),
        ));
    }
    let n = config.t + config.burn_in;
    let mut rng = rng_from_seed(config.seed);
    let mut z_y = Vec::with_capacity(n);
    let mut z_d = Vec::with_capacity(n);
    for _ in 0..n {
        z_y.push(StandardNormal.sample(&mut rng));
        z_d.push(StandardNormal.sample(&mut rng));
    }
    simulate_with_shocks(params, &z_y, &z_d, config.burn_in)
}

/// Local projection design used throughout the laboratory: cumulative
/// outcome, controls `(Y_t, D_{t-1}, Y_{t-1})`, shock column `z_d`.
pub fn sim_design() -> LpDesign {
    LpDesign {
        frame: FrameSpec {
            outcome: "y".into(),
            outcome_transform: OutcomeTransform::CumulativeSum,
            treatment: "d".into(),
            contemporaneous: vec!["y".into()],
            lagged: vec!["d".into(), "y".into()],
            max_lag: 1,
        },
        shock: Some("z_d".into()),
        timing_restriction: false,
    }
}

/// One equal-probability bin of the shock with outcome quantiles inside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqfBin {
    /// Median shock value in the bin.
    pub centre: f64,
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// Outcome quantiles, one per requested level.
    pub quantiles: Vec<f64>,
}

/// Empirical quantiles of `Y^c_{t+h}` within equal-probability bins of `Z^D_t`,
/// pooled over the paths.
pub fn sqf_by_binning(
    paths: &[SimPath],
    h: usize,
    taus: &[f64],
    n_bins: usize,
) -> Result<Vec<SqfBin>> {
    if n_bins < 1 {
        return Err(Error::InvalidInput("at least one bin is required".into()));
    }
    if let Some(&t) = taus.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(Error::InvalidTau(t));
    }
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for p in paths {
        let yc = p.cumulative(h);
        pairs.extend(yc.iter().enumerate().map(|(t, &v)| (p.z_d[t], v)));
    }
    let n = pairs.len();
    if n < n_bins {
        return Err(Error::InsufficientObservations {
            rows: n,
            needed: n_bins,
        });
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut bins = Vec::with_capacity(n_bins);
    for b in 0..n_bins {
        let chunk = &pairs[b * n / n_bins..(b + 1) * n / n_bins];
        if chunk.len() < 50 {
            warn!("bin {b} holds only {} observations", chunk.len());
        }
        let z: Vec<f64> = chunk.iter().map(|p| p.0).collect();
        let mut yc: Vec<f64> = chunk.iter().map(|p| p.1).collect();
        bins.push(SqfBin {
            centre: stats::quantile(&z, 0.5, QuantileRule::Linear),
            lower: z[0],
            upper: z[z.len() - 1],
            count: chunk.len(),
            quantiles: taus
                .iter()
                .map(|&t| stats::quantile_in_place(&mut yc, t, QuantileRule::Linear))
                .collect(),
        });
    }
    Ok(bins)
}

/// Quantile regression of `Y^c_{t+h}` on `[1, Z^D_t]` (or `[1, Z, Z^2]`):
/// the oracle structural quantile function. Returns `[alpha, beta_1, (beta_2)]`.
pub fn oracle_sqf(path: &SimPath, h: usize, tau: f64, spec: SqfSpec) -> Result<Vec<f64>> {
    let yc = path.cumulative(h);
    let m = spec.degree();
    let x = DMatrix::from_fn(yc.len(), m + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            path.z_d[i].powi(j as i32)
        }
    });
    Ok(qr::fit_qr(&x, &yc, tau)?.coefficients)
}

/// Oracle QIR surface: quantile local projections on the observed shock,
/// over the same rows as [`sim_design`].
pub fn oracle_qir(
    path: &SimPath,
    horizons: usize,
    taus: &[f64],
    spec: SqfSpec,
) -> Result<QirSurface> {
    let config = LpConfig {
        spec,
        ..LpConfig::new(EstimatorKind::OracleQlp, horizons, taus.to_vec())
    };
    lp::run_lp(&path.to_panel()?, &sim_design(), &config, None)
}

/// One row of a Monte Carlo table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub estimator: EstimatorKind,
    /// `None` for the mean estimator.
    pub tau: Option<f64>,
    pub horizon: usize,
    pub mean_estimate: f64,
    /// Oracle estimate averaged over replications.
    pub truth: f64,
    pub mean_bias: f64,
    pub rmse: f64,
    /// Monte Carlo standard deviation of the estimates.
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McTable {
    pub params: DgpParams,
    pub config: SimConfig,
    pub replications: usize,
    pub failures: usize,
    pub rows: Vec<McRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSpec {
    pub estimators: Vec<EstimatorKind>,
    pub taus: Vec<f64>,
    /// Horizons `1..=horizons`.
    pub horizons: usize,
    pub spec: SqfSpec,
    pub gqr: GqrConfig,
}

impl McSpec {
    pub fn new(estimators: Vec<EstimatorKind>, taus: Vec<f64>, horizons: usize) -> Self {
        Self {
            estimators,
            taus,
            horizons,
            spec: SqfSpec::Linear,
            gqr: GqrConfig::default(),
        }
    }
}

/// Estimates of one replication: `[estimator][row][h - 1]` plus the oracle
/// `[row kind][h - 1]` for the quantile rows and the mean row.
struct RepResult {
    estimates: Vec<Vec<Vec<f64>>>,
    oracle_q: Vec<Vec<f64>>,
    oracle_mean: Vec<f64>,
}

fn run_replication(
    params: &DgpParams,
    config: &SimConfig,
    mc: &McSpec,
    r: usize,
) -> Result<RepResult> {
    let sim = SimConfig {
        seed: derive_seed(config.seed, &[r as u64]),
        ..*config
    };
    let panel = simulate(params, &sim)?.to_panel()?;
    let design = sim_design();
    let hs = 1..=mc.horizons;
    let rows_for = |k: EstimatorKind| -> Vec<Option<f64>> {
        if k.is_quantile() {
            mc.taus.iter().map(|&t| Some(t)).collect()
        } else {
            vec![None]
        }
    };
    let mut estimates = Vec::with_capacity(mc.estimators.len());
    for &k in &mc.estimators {
        let mut per_row = vec![Vec::with_capacity(mc.horizons); rows_for(k).len()];
        for h in hs.clone() {
            let frame = design.frame_for(&panel, k, h)?;
            for (i, tau) in rows_for(k).into_iter().enumerate() {
                per_row[i].push(
                    lp::estimate_cell(&frame, k, tau, mc.spec, &mc.gqr)
                        .map_err(|e| e.in_cell(tau, h))?,
                );
            }
        }
        estimates.push(per_row);
    }
    let mut oracle_q = vec![Vec::with_capacity(mc.horizons); mc.taus.len()];
    let mut oracle_mean = Vec::with_capacity(mc.horizons);
    for h in hs {
        let frame = design.frame_for(&panel, EstimatorKind::OracleQlp, h)?;
        for (i, &tau) in mc.taus.iter().enumerate() {
            oracle_q[i].push(lp::estimate_cell(
                &frame,
                EstimatorKind::OracleQlp,
                Some(tau),
                mc.spec,
                &mc.gqr,
            )?);
        }
        oracle_mean.push(lp::estimate_cell(
            &frame,
            EstimatorKind::OlsLp,
            None,
            mc.spec,
            &mc.gqr,
        )?);
    }
    Ok(RepResult {
        estimates,
        oracle_q,
        oracle_mean,
    })
}

/// Races the estimators over `mc_reps` simulated samples. The truth for each
/// cell is the oracle estimate on the shock averaged over replications
/// (least squares on the shock for the mean estimator). Replications with an
/// estimator failure are dropped; more than 5% dropped is an error.
pub fn monte_carlo(params: &DgpParams, config: &SimConfig, mc: &McSpec) -> Result<McTable> {
    if config.mc_reps < 2 {
        return Err(Error::InvalidInput(
            "at least two replications are required".into(),
        ));
    }
    if mc.horizons < 1 {
        return Err(Error::InvalidInput(
            "the maximum horizon must be at least 1".into(),
        ));
    }
    if let Some(&t) = mc.taus.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(Error::InvalidTau(t));
    }
    params.validate()?;
    let results: Vec<Result<RepResult>> = (0..config.mc_reps)
        .into_par_iter()
        .map(|r| run_replication(params, config, mc, r))
        .collect();
    let mut ok = Vec::new();
    let mut failures = 0;
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(v) => ok.push(v),
            Err(e) => {
                warn!("replication {r} failed: {e}");
                failures += 1;
            }
        }
    }
    if failures * 20 > config.mc_reps || ok.len() < 2 {
        return Err(Error::TooManyFailures {
            failed: failures,
            total: config.mc_reps,
        });
    }
    let n = ok.len() as f64;
    let mut rows = Vec::new();
    for (e, &k) in mc.estimators.iter().enumerate() {
        let labels: Vec<Option<f64>> = if k.is_quantile() {
            mc.taus.iter().map(|&t| Some(t)).collect()
        } else {
            vec![None]
        };
        for (i, tau) in labels.into_iter().enumerate() {
            for h in 1..=mc.horizons {
                let est: Vec<f64> = ok.iter().map(|r| r.estimates[e][i][h - 1]).collect();
                let truth = ok
                    .iter()
                    .map(|r| match tau {
                        Some(_) => r.oracle_q[i][h - 1],
                        None => r.oracle_mean[h - 1],
                    })
                    .sum::<f64>()
                    / n;
                let mean_estimate = stats::mean(&est);
                let rmse = (est.iter().map(|v| (v - truth).powi(2)).sum::<f64>() / n).sqrt();
                rows.push(McRow {
                    estimator: k,
                    tau,
                    horizon: h,
                    mean_estimate,
                    truth,
                    mean_bias: mean_estimate - truth,
                    rmse,
                    sd: stats::sample_sd(&est),
                });
            }
        }
    }
    // Order like the published layout: quantile, horizon, estimator.
    rows.sort_by(|a, b| {
        a.tau
            .unwrap_or(-1.0)
            .total_cmp(&b.tau.unwrap_or(-1.0))
            .then(a.horizon.cmp(&b.horizon))
    });
    Ok(McTable {
        params: *params,
        config: *config,
        replications: ok.len(),
        failures,
        rows,
    })
}

impl McTable {
    pub fn row(
        &self,
        estimator: EstimatorKind,
        tau: Option<f64>,
        horizon: usize,
    ) -> Option<&McRow> {
        self.rows
            .iter()
            .find(|r| r.estimator == estimator && r.tau == tau && r.horizon == horizon)
    }

    /// CSV with columns quantile, horizon, estimator, mean_bias, rmse, then extras;
    /// `header` lines are written first as `#` comments.
    pub fn write_csv<W: Write>(&self, mut out: W, header: &[String]) -> Result<()> {
        for line in header {
            writeln!(out, "# {line}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "quantile",
            "horizon",
            "estimator",
            "mean_bias",
            "rmse",
            "mean_estimate",
            "truth",
            "sd",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.tau.map(|t| t.to_string()).unwrap_or_default(),
                r.horizon.to_string(),
                r.estimator.name().to_string(),
                r.mean_bias.to_string(),
                r.rmse.to_string(),
                r.mean_estimate.to_string(),
                r.truth.to_string(),
                r.sd.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path, header: &[String]) -> Result<()> {
        self.write_csv(
            std::io::BufWriter::new(std::fs::File::create(path)?),
            header,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_shocks_stay_at_origin() {
        let z = vec![0.0; 50];
        let p = simulate_with_shocks(&DgpParams::default(), &z, &z, 10).unwrap();
        assert_eq!(p.len(), 40);
        assert!(p.y.iter().chain(&p.d).all(|&v| v == 0.0));
    }

    #[test]
    fn one_step_substitution() {
        let p = simulate_with_shocks(&DgpParams::default(), &[1.0], &[0.0], 0).unwrap();
        // vol = (1 + 9) / (1 + 9) = 1, Y = 1, D = gamma * Y = -0.2
        assert_eq!(p.y[0], 1.0);
        assert!((p.d[0] + 0.2).abs() < 1e-15);
    }

    #[test]
    fn second_step_uses_lagged_treatment_in_volatility() {
        let params = DgpParams::default();
        let p = simulate_with_shocks(&params, &[0.0, 1.0], &[1.0, 0.0], 0).unwrap();
        let d0 = 1.0;
        let vol = (1.0 + 9.0 * (d0 / 2.0f64).exp()) / 10.0;
        let y1 = -0.25 * d0 + vol;
        assert!((p.y[1] - y1).abs() < 1e-14);
        let d1 = -0.2 * y1 - 0.1 * d0;
        assert!((p.d[1] - d1).abs() < 1e-14);
    }

    #[test]
    fn seeds_replay_bit_for_bit() {
        let cfg = SimConfig {
            t: 200,
            burn_in: 100,
            seed: 9,
            mc_reps: 2,
        };
        let a = simulate(&DgpParams::default(), &cfg).unwrap();
        let b = simulate(&DgpParams::default(), &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate(&DgpParams::default(), &SimConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a.y, c.y);
    }

    #[test]
    fn explosive_parameters_report_the_step() {
        let params = DgpParams {
            rho_y: 50.0,
            ..DgpParams::default()
        };
        let cfg = SimConfig {
            t: 500,
            burn_in: 0,
            seed: 1,
            mc_reps: 2,
        };
        assert!(matches!(
            simulate(&params, &cfg),
            Err(Error::NonFiniteState(_))
        ));
        assert!(DgpParams {
            phi: -1.0,
            ..DgpParams::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn cumulative_sums_match_direct() {
        let p = SimPath {
            y: vec![1.0, 2.0, 3.0, 4.0],
            d: vec![0.0; 4],
            z_y: vec![0.0; 4],
            z_d: vec![0.0; 4],
        };
        assert_eq!(p.cumulative(0), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(p.cumulative(2), vec![6.0, 9.0]);
        assert!(p.cumulative(4).is_empty());
    }

    #[test]
    fn bins_are_equal_probability() {
        let cfg = SimConfig {
            t: 5000,
            burn_in: 100,
            seed: 2,
            mc_reps: 2,
        };
        let p = simulate(&DgpParams::default(), &cfg).unwrap();
        let bins = sqf_by_binning(&[p], 1, &[0.1, 0.5, 0.9], 20).unwrap();
        assert_eq!(bins.len(), 20);
        assert!(bins.iter().all(|b| b.count == 249 || b.count == 250));
        for w in bins.windows(2) {
            assert!(w[0].upper <= w[1].lower);
            assert!(w[0].centre < w[1].centre);
        }
        for b in &bins {
            assert!(b.quantiles[0] <= b.quantiles[1] && b.quantiles[1] <= b.quantiles[2]);
        }
    }

    #[test]
    fn oracle_only_table_has_zero_bias() {
        let cfg = SimConfig {
            t: 300,
            burn_in: 100,
            seed: 4,
            mc_reps: 4,
        };
        let mc = McSpec::new(vec![EstimatorKind::OracleQlp], vec![0.1, 0.5, 0.9], 2);
        let table = monte_carlo(&DgpParams::default(), &cfg, &mc).unwrap();
        assert_eq!(table.rows.len(), 6);
        for r in &table.rows {
            assert!(r.mean_bias.abs() < 1e-12, "{r:?}");
        }
    }
}
