//! Local projections across horizons and quantiles.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bootstrap::{self, BootConfig};
use crate::gqr::{self, GqrConfig, SqfSpec};
use crate::timeseries::{build_frame, FrameSpec, ProjectionFrame};
use crate::{linalg, qr, rng, Error, Result};

/// Crate version recorded in every artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Note attached to every surface built on a cumulative outcome.
pub const CUMULATIVE_NOTE: &str = "quantiles of a cumulative outcome are not sums of per-period \
quantile responses unless the per-period outcomes are comonotonic; no adjustment is made";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// Least squares of the outcome on `[D, W]`: the mean impulse response.
    OlsLp,
    /// Quantile regression of the outcome on `[1, D]`.
    QlpNoControls,
    /// Quantile regression of the outcome on `[D, W]`: the conditional response.
    QlpWithControls,
    /// Generalized quantile regression with `W` as identifying controls.
    GqrLp,
    /// Quantile regression on `[1, shock]` where the shock column of the
    /// design is an observed structural shock; the simulation benchmark.
    OracleQlp,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::OlsLp,
        EstimatorKind::QlpNoControls,
        EstimatorKind::QlpWithControls,
        EstimatorKind::GqrLp,
        EstimatorKind::OracleQlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::OlsLp => "ols-lp",
            EstimatorKind::QlpNoControls => "qlp-no-controls",
            EstimatorKind::QlpWithControls => "qlp-with-controls",
            EstimatorKind::GqrLp => "gqr-lp",
            EstimatorKind::OracleQlp => "oracle-qlp",
        }
    }

    /// Whether the estimator is indexed by a quantile level.
    pub fn is_quantile(self) -> bool {
        self != EstimatorKind::OlsLp
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown estimator `{s}`")))
    }
}

/// Column roles for a local projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpDesign {
    pub frame: FrameSpec,
    /// Observed structural shock column, used only by [`EstimatorKind::OracleQlp`].
    #[serde(default)]
    pub shock: Option<String>,
    /// Forces the impact (`h = 0`) response to zero.
    pub timing_restriction: bool,
}

impl LpDesign {
    fn shock_frame(&self, panel: &crate::timeseries::Panel, h: usize) -> Result<ProjectionFrame> {
        let shock = self.shock.as_ref().ok_or_else(|| {
            Error::InvalidInput("the oracle estimator needs a shock column in the design".into())
        })?;
        // Same rows as the main frame: keep max_lag, drop the controls.
        let spec = FrameSpec {
            treatment: shock.clone(),
            contemporaneous: Vec::new(),
            lagged: Vec::new(),
            ..self.frame.clone()
        };
        build_frame(panel, &spec, h)
    }

    /// Frame the estimator runs on at horizon `h`.
    pub fn frame_for(
        &self,
        panel: &crate::timeseries::Panel,
        estimator: EstimatorKind,
        h: usize,
    ) -> Result<ProjectionFrame> {
        match estimator {
            EstimatorKind::OracleQlp => self.shock_frame(panel, h),
            EstimatorKind::QlpNoControls => build_frame(panel, &self.frame, h)?.intercept_only(),
            _ => build_frame(panel, &self.frame, h),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpConfig {
    pub estimator: EstimatorKind,
    /// Maximum horizon `H`; the surface covers `0..=H`.
    pub horizons: usize,
    pub quantiles: Vec<f64>,
    pub spec: SqfSpec,
    pub gqr: GqrConfig,
    /// Bootstrap bands; `None` skips them.
    pub bootstrap: Option<BootConfig>,
}

impl LpConfig {
    pub fn new(estimator: EstimatorKind, horizons: usize, quantiles: Vec<f64>) -> Self {
        Self {
            estimator,
            horizons,
            quantiles,
            spec: SqfSpec::Linear,
            gqr: GqrConfig::default(),
            bootstrap: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizons < 1 {
            return Err(Error::InvalidInput(
                "the maximum horizon must be at least 1".into(),
            ));
        }
        if self.estimator.is_quantile() {
            if self.quantiles.is_empty() {
                return Err(Error::InvalidInput("no quantile levels given".into()));
            }
            if let Some(&t) = self.quantiles.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
                return Err(Error::InvalidTau(t));
            }
        }
        self.gqr.validate()
    }

    /// Row labels of the surface: the quantile levels, or a single mean row.
    pub fn rows(&self) -> Vec<Option<f64>> {
        if self.estimator.is_quantile() {
            self.quantiles.iter().map(|&t| Some(t)).collect()
        } else {
            vec![None]
        }
    }
}

/// Provenance recorded alongside every surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMetadata {
    pub version: String,
    /// SHA-256 of the JSON serialization of the design and configuration.
    pub config_hash: String,
    pub seed: Option<u64>,
    pub generator: String,
    pub design: LpDesign,
    pub config: LpConfig,
    /// First and last time stamps of the panel.
    pub sample: (i64, i64),
    pub control_width: usize,
    pub notes: Vec<String>,
    /// Where the panel came from, when loaded from a manifest.
    #[serde(default)]
    pub source: Option<crate::ingest::DataSource>,
}

/// Estimates over quantiles (rows) and horizons `0..=H` (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QirSurface {
    pub estimator: EstimatorKind,
    /// Row labels; empty for the mean estimator, which has a single row.
    pub quantiles: Vec<f64>,
    pub horizons: Vec<usize>,
    pub estimates: Vec<Vec<f64>>,
    pub lower: Option<Vec<Vec<f64>>>,
    pub upper: Option<Vec<Vec<f64>>>,
    pub metadata: SurfaceMetadata,
}

/// SHA-256 hex digest of any serializable configuration.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("configuration serializes");
    hex::encode(Sha256::digest(&json))
}

fn slope_ols(frame: &ProjectionFrame) -> Result<f64> {
    let x = with_treatment(frame, 1);
    Ok(linalg::least_squares(&x, frame.outcome())?[0])
}

/// `[D, (D^2), W]` for a frame.
fn with_treatment(frame: &ProjectionFrame, degree: usize) -> DMatrix<f64> {
    let w = frame.controls();
    let d = frame.treatment();
    DMatrix::from_fn(frame.len(), w.ncols() + degree, |i, j| {
        if j < degree {
            d[i].powi(j as i32 + 1)
        } else {
            w[(i, j - degree)]
        }
    })
}

/// Point estimate of one cell on a ready-made frame. For the quadratic
/// specification the reported response is the linear coefficient, which is
/// the derivative of the quantile function at `d = 0`.
pub fn estimate_cell(
    frame: &ProjectionFrame,
    estimator: EstimatorKind,
    tau: Option<f64>,
    spec: SqfSpec,
    gqr_config: &GqrConfig,
) -> Result<f64> {
    let need_tau = || tau.ok_or_else(|| Error::InvalidInput("quantile level required".into()));
    match estimator {
        EstimatorKind::OlsLp => slope_ols(frame),
        EstimatorKind::QlpNoControls
        | EstimatorKind::QlpWithControls
        | EstimatorKind::OracleQlp => {
            let x = with_treatment(frame, 1);
            Ok(qr::fit_qr(&x, frame.outcome(), need_tau()?)?.coefficients[0])
        }
        EstimatorKind::GqrLp => Ok(gqr::fit_gqr(frame, need_tau()?, spec, gqr_config)?.betas[0]),
    }
}

struct HorizonResult {
    estimates: Vec<f64>,
    bands: Option<(Vec<f64>, Vec<f64>)>,
}

fn run_horizon(
    panel: &crate::timeseries::Panel,
    design: &LpDesign,
    config: &LpConfig,
    h: usize,
) -> std::result::Result<HorizonResult, Vec<Error>> {
    let rows = config.rows();
    if h == 0 && design.timing_restriction {
        let zeros = vec![0.0; rows.len()];
        return Ok(HorizonResult {
            estimates: zeros.clone(),
            bands: config.bootstrap.map(|_| (zeros.clone(), zeros)),
        });
    }
    let frame = design
        .frame_for(panel, config.estimator, h)
        .map_err(|e| vec![e.in_cell(None, h)])?;
    let cells: Vec<Result<f64>> = rows
        .par_iter()
        .map(|&tau| {
            estimate_cell(&frame, config.estimator, tau, config.spec, &config.gqr)
                .map_err(|e| e.in_cell(tau, h))
        })
        .collect();
    let mut errors = Vec::new();
    let mut estimates = Vec::with_capacity(cells.len());
    for c in cells {
        match c {
            Ok(v) => estimates.push(v),
            Err(e) => errors.push(e),
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    let bands = match &config.bootstrap {
        None => None,
        Some(boot) => {
            // Horizons resample independently.
            let boot = BootConfig {
                seed: rng::derive_seed(boot.seed, &[h as u64]),
                ..*boot
            };
            let intervals = bootstrap::block_bootstrap_many(
                &frame,
                |f| {
                    rows.iter()
                        .map(|&tau| {
                            estimate_cell(f, config.estimator, tau, config.spec, &config.gqr)
                        })
                        .collect()
                },
                &boot,
            )
            .map_err(|e| vec![e.in_cell(None, h)])?;
            // Percentile bands need not contain the point estimate; widen them so they do.
            let lower = intervals
                .iter()
                .zip(&estimates)
                .map(|(ci, &e)| ci.lower.min(e))
                .collect();
            let upper = intervals
                .iter()
                .zip(&estimates)
                .map(|(ci, &e)| ci.upper.max(e))
                .collect();
            Some((lower, upper))
        }
    };
    Ok(HorizonResult { estimates, bands })
}

/// Runs the estimator for every horizon `0..=H` and quantile. Cell failures
/// are collected and returned together as [`Error::Cells`].
pub fn run_lp(
    panel: &crate::timeseries::Panel,
    design: &LpDesign,
    config: &LpConfig,
    seed: Option<u64>,
) -> Result<QirSurface> {
    config.validate()?;
    let per_h: Vec<_> = (0..=config.horizons)
        .into_par_iter()
        .map(|h| run_horizon(panel, design, config, h))
        .collect();
    let mut errors = Vec::new();
    let mut columns = Vec::new();
    for r in per_h {
        match r {
            Ok(c) => columns.push(c),
            Err(e) => errors.extend(e),
        }
    }
    if !errors.is_empty() {
        return Err(Error::Cells(errors));
    }
    let n_rows = config.rows().len();
    let transpose = |get: &dyn Fn(&HorizonResult) -> Vec<f64>| -> Vec<Vec<f64>> {
        let cols: Vec<Vec<f64>> = columns.iter().map(get).collect();
        (0..n_rows)
            .map(|i| cols.iter().map(|c| c[i]).collect())
            .collect()
    };
    let estimates = transpose(&|c| c.estimates.clone());
    let (lower, upper) = if config.bootstrap.is_some() {
        (
            Some(transpose(&|c| c.bands.as_ref().unwrap().0.clone())),
            Some(transpose(&|c| c.bands.as_ref().unwrap().1.clone())),
        )
    } else {
        (None, None)
    };

    let control_width = build_frame(panel, &design.frame, 0)
        .map(|f| f.controls().ncols())
        .unwrap_or(0);
    let mut notes = Vec::new();
    if !matches!(
        design.frame.outcome_transform,
        crate::timeseries::OutcomeTransform::Lead
    ) {
        notes.push(CUMULATIVE_NOTE.to_string());
    }
    let index = panel.index();
    Ok(QirSurface {
        estimator: config.estimator,
        quantiles: if config.estimator.is_quantile() {
            config.quantiles.clone()
        } else {
            Vec::new()
        },
        horizons: (0..=config.horizons).collect(),
        estimates,
        lower,
        upper,
        metadata: SurfaceMetadata {
            version: VERSION.to_string(),
            config_hash: config_hash(&(design, config)),
            seed,
            generator: rng::GENERATOR.to_string(),
            design: design.clone(),
            config: config.clone(),
            sample: (index[0], index[index.len() - 1]),
            control_width,
            notes,
            source: None,
        },
    })
}

impl QirSurface {
    /// Row labels (`None` for the mean row).
    pub fn row_labels(&self) -> Vec<Option<f64>> {
        if self.estimator.is_quantile() {
            self.quantiles.iter().map(|&t| Some(t)).collect()
        } else {
            vec![None]
        }
    }

    /// Estimate for a quantile level (or the mean row when `tau` is `None`).
    pub fn get(&self, tau: Option<f64>, h: usize) -> Option<f64> {
        let row = self.row_labels().iter().position(|&t| t == tau)?;
        self.estimates.get(row)?.get(h).copied()
    }

    /// Header comment lines recorded at the top of CSV outputs.
    pub fn header_lines(&self) -> Vec<String> {
        let m = &self.metadata;
        let mut lines = vec![
            format!("qirlab {}", m.version),
            format!("config_hash={}", m.config_hash),
            format!(
                "seed={}",
                m.seed
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| "none".into())
            ),
            format!("generator={}", m.generator),
        ];
        lines.extend(m.notes.iter().map(|n| format!("note: {n}")));
        lines
    }

    /// Writes one row per (estimator, tau, horizon) with `#` comment lines first.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for line in self.header_lines() {
            writeln!(out, "# {line}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["estimator", "tau", "horizon", "estimate", "lower", "upper"])?;
        for (i, tau) in self.row_labels().into_iter().enumerate() {
            for (j, h) in self.horizons.iter().enumerate() {
                let band = |b: &Option<Vec<Vec<f64>>>| {
                    b.as_ref().map(|m| m[i][j].to_string()).unwrap_or_default()
                };
                w.write_record([
                    self.estimator.name().to_string(),
                    tau.map(|t| t.to_string()).unwrap_or_default(),
                    h.to_string(),
                    self.estimates[i][j].to_string(),
                    band(&self.lower),
                    band(&self.upper),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        Ok(serde_json::from_reader(f)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::timeseries::{OutcomeTransform, Panel};
    use rand_distr::{Distribution, StandardNormal};

    fn panel(n: usize, seed: u64) -> Panel {
        let mut rng = rng_from_seed(seed);
        let mut draw =
            |n: usize| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(&mut rng)).collect() };
        let d = draw(n);
        let w = draw(n);
        let e = draw(n);
        let mut y = vec![0.0; n];
        for t in 1..n {
            y[t] = 0.3 * y[t - 1] + 0.5 * d[t - 1] + 0.4 * w[t] + e[t];
        }
        Panel::new(
            (0..n as i64).collect(),
            vec![("y".into(), y), ("d".into(), d), ("w".into(), w)],
        )
        .unwrap()
    }

    fn design(timing: bool) -> LpDesign {
        LpDesign {
            frame: FrameSpec {
                outcome: "y".into(),
                outcome_transform: OutcomeTransform::Lead,
                treatment: "d".into(),
                contemporaneous: vec!["w".into()],
                lagged: vec!["y".into(), "d".into()],
                max_lag: 1,
            },
            shock: Some("d".into()),
            timing_restriction: timing,
        }
    }

    #[test]
    fn surface_shape_and_timing_restriction() {
        let p = panel(300, 1);
        let mut cfg = LpConfig::new(EstimatorKind::QlpWithControls, 4, vec![0.25, 0.5, 0.75]);
        cfg.bootstrap = None;
        let s = run_lp(&p, &design(true), &cfg, Some(5)).unwrap();
        assert_eq!(s.estimates.len(), 3);
        assert!(s.estimates.iter().all(|r| r.len() == 5 && r[0] == 0.0));
        // The lag-one response is 0.5 at every quantile of an additive model.
        for r in &s.estimates {
            assert!((r[1] - 0.5).abs() < 0.2, "{r:?}");
        }
        assert_eq!(s.metadata.control_width, 4);
    }

    #[test]
    fn ols_matches_normal_equations() {
        let p = panel(120, 2);
        let d = design(false);
        let cfg = LpConfig::new(EstimatorKind::OlsLp, 2, vec![]);
        let s = run_lp(&p, &d, &cfg, None).unwrap();
        assert_eq!(s.estimates.len(), 1);
        for h in 0..=2 {
            let f = build_frame(&p, &d.frame, h).unwrap();
            let x = with_treatment(&f, 1);
            let xtx = x.transpose() * &x;
            let xty = x.transpose() * nalgebra::DVector::from_column_slice(f.outcome());
            let b = xtx.try_inverse().unwrap() * xty;
            assert!((s.estimates[0][h] - b[0]).abs() < 1e-8);
        }
    }

    #[test]
    fn bands_bracket_estimates_and_are_deterministic() {
        let p = panel(200, 3);
        let mut cfg = LpConfig::new(EstimatorKind::QlpNoControls, 2, vec![0.5]);
        cfg.bootstrap = Some(BootConfig {
            replications: 40,
            seed: 11,
            ..BootConfig::default()
        });
        let a = run_lp(&p, &design(false), &cfg, Some(11)).unwrap();
        let b = run_lp(&p, &design(false), &cfg, Some(11)).unwrap();
        assert_eq!(a, b);
        let (lo, hi) = (a.lower.unwrap(), a.upper.unwrap());
        for h in 0..=2 {
            assert!(lo[0][h] <= a.estimates[0][h] && a.estimates[0][h] <= hi[0][h]);
        }
    }

    #[test]
    fn csv_has_header_and_one_row_per_cell() {
        let p = panel(150, 4);
        let cfg = LpConfig::new(EstimatorKind::OracleQlp, 3, vec![0.1, 0.9]);
        let s = run_lp(&p, &design(false), &cfg, Some(1)).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().next().unwrap().starts_with("# qirlab"));
        assert!(text.contains(&s.metadata.config_hash));
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data.len(), 1 + 2 * 4);
        assert!(data[1].starts_with("oracle-qlp,0.1,0,"));
    }

    #[test]
    fn failures_name_their_cells() {
        let p = panel(40, 5);
        let cfg = LpConfig::new(EstimatorKind::QlpWithControls, 40, vec![0.5]);
        match run_lp(&p, &design(false), &cfg, None) {
            Err(Error::Cells(errs)) => {
                assert!(errs.iter().any(|e| e.to_string().contains("h=40")));
            }
            other => panic!("expected cell errors, got {other:?}"),
        }
    }

    #[test]
    fn estimator_names_round_trip() {
        for k in EstimatorKind::ALL {
            assert_eq!(k.name().parse::<EstimatorKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
    }
}
