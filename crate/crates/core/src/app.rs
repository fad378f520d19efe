//! Command implementations behind the `qirlab` binary. Each command writes its
//! artifacts into an output directory and returns the paths it wrote.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bootstrap::BootConfig;
use crate::gqr::SqfSpec;
use crate::ingest::{self, DataSource, DatasetManifest, Treatment};
use crate::lp::{self, EstimatorKind, LpConfig, QirSurface};
use crate::svar::{self, DgpParams, McSpec, SimConfig};
use crate::svg::{Band, Chart, Marker, Series};
use crate::{rng, Error, Result};

/// Parses `0.1,0.5,0.9` or an inclusive range `0.05:0.95:0.05`.
pub fn parse_taus(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidInput(format!("cannot parse quantile list `{s}`"));
    let taus: Vec<f64> = if s.contains(':') {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let [start, end, step] = parts[..] else {
            return Err(bad());
        };
        if !(step > 0.0) || end < start {
            return Err(bad());
        }
        let n = ((end - start) / step + 1e-9).floor() as usize;
        // Round to suppress accumulation noise such as 0.15000000000000002.
        (0..=n)
            .map(|i| ((start + i as f64 * step) * 1e10).round() / 1e10)
            .collect()
    } else {
        s.split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    if taus.is_empty() {
        return Err(bad());
    }
    if let Some(&t) = taus.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(Error::InvalidTau(t));
    }
    Ok(taus)
}

/// Header comment lines shared by every CSV artifact.
pub fn provenance<T: Serialize>(config: &T, seed: u64) -> Vec<String> {
    vec![
        format!("qirlab {}", lp::VERSION),
        format!("config_hash={}", lp::config_hash(config)),
        format!("seed={seed}"),
        format!("generator={}", rng::GENERATOR),
    ]
}

fn write_with_header(
    path: &Path,
    header: &[String],
    body: impl FnOnce(&mut Vec<u8>) -> Result<()>,
) -> Result<()> {
    let mut buf = Vec::new();
    for line in header {
        buf.extend_from_slice(format!("# {line}\n").as_bytes());
    }
    body(&mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

const MARKERS: [Marker; 3] = [Marker::Diamond, Marker::Circle, Marker::Triangle];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateArgs {
    pub params: DgpParams,
    pub sim: SimConfig,
    /// Horizons `1..=horizons` get binned curves.
    pub horizons: usize,
    pub taus: Vec<f64>,
    pub bins: usize,
    pub out: PathBuf,
}

/// Simulates one long path and writes it, the binned structural quantile
/// curves, oracle linear and quadratic fits, and one figure per horizon.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(&args.out)?;
    let header = provenance(args, args.sim.seed);
    let path = svar::simulate(&args.params, &args.sim)?;
    let mut written = Vec::new();

    let p = args.out.join("path.csv");
    write_with_header(&p, &header, |buf| path.write_csv(buf))?;
    written.push(p);

    let mut bins_csv = csv::Writer::from_writer(Vec::new());
    bins_csv.write_record([
        "tau", "horizon", "bin", "centre", "lower", "upper", "count", "quantile",
    ])?;
    let mut fits_csv = csv::Writer::from_writer(Vec::new());
    fits_csv.write_record(["tau", "horizon", "spec", "alpha", "beta1", "beta2"])?;
    for h in 1..=args.horizons {
        let bins = svar::sqf_by_binning(std::slice::from_ref(&path), h, &args.taus, args.bins)?;
        let mut chart = Chart::new(
            format!("Structural quantile function, h = {h}"),
            "structural shock Z^D",
            format!("quantile of cumulative Y, h = {h}"),
        );
        chart.zero_line = false;
        let zs: Vec<f64> = bins.iter().map(|b| b.centre).collect();
        let (zmin, zmax) = (zs[0], zs[zs.len() - 1]);
        for (i, &tau) in args.taus.iter().enumerate() {
            for (b, bin) in bins.iter().enumerate() {
                bins_csv.write_record([
                    tau.to_string(),
                    h.to_string(),
                    b.to_string(),
                    bin.centre.to_string(),
                    bin.lower.to_string(),
                    bin.upper.to_string(),
                    bin.count.to_string(),
                    bin.quantiles[i].to_string(),
                ])?;
            }
            chart.series.push(Series::markers(
                format!("binned tau={tau}"),
                bins.iter().map(|b| (b.centre, b.quantiles[i])).collect(),
                MARKERS[i % MARKERS.len()],
                i,
            ));
            for spec in [SqfSpec::Linear, SqfSpec::Quadratic] {
                let c = svar::oracle_sqf(&path, h, tau, spec)?;
                let b2 = c.get(2).copied().unwrap_or(0.0);
                fits_csv.write_record([
                    tau.to_string(),
                    h.to_string(),
                    format!("{spec:?}").to_lowercase(),
                    c[0].to_string(),
                    c[1].to_string(),
                    if spec == SqfSpec::Quadratic {
                        b2.to_string()
                    } else {
                        String::new()
                    },
                ])?;
                if spec == SqfSpec::Quadratic {
                    let curve = (0..=40)
                        .map(|k| {
                            let z = zmin + (zmax - zmin) * k as f64 / 40.0;
                            (z, c[0] + c[1] * z + b2 * z * z)
                        })
                        .collect();
                    chart
                        .series
                        .push(Series::line(format!("quadratic fit tau={tau}"), curve, i));
                }
            }
        }
        let f = args.out.join(format!("sqf_h{h}.svg"));
        chart.save(&f)?;
        written.push(f);
    }
    let p = args.out.join("sqf_bins.csv");
    let body = bins_csv
        .into_inner()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    write_with_header(&p, &header, |buf| {
        buf.extend_from_slice(&body);
        Ok(())
    })?;
    written.push(p);
    let p = args.out.join("sqf_fits.csv");
    let body = fits_csv
        .into_inner()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    write_with_header(&p, &header, |buf| {
        buf.extend_from_slice(&body);
        Ok(())
    })?;
    written.push(p);
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McTableArgs {
    pub params: DgpParams,
    pub sim: SimConfig,
    pub mc: McSpec,
    pub out: PathBuf,
}

impl McTableArgs {
    /// The published layout: three estimators, quantiles 0.1 / 0.5 / 0.9, horizons 1..=10.
    pub fn standard(params: DgpParams, sim: SimConfig, out: PathBuf) -> Self {
        Self {
            params,
            sim,
            mc: McSpec::new(
                vec![
                    EstimatorKind::QlpNoControls,
                    EstimatorKind::QlpWithControls,
                    EstimatorKind::GqrLp,
                ],
                vec![0.1, 0.5, 0.9],
                10,
            ),
            out,
        }
    }
}

/// Monte Carlo bias/RMSE table plus one figure per quantile comparing mean
/// estimates with the oracle truth across horizons.
pub fn cmd_mc_table(args: &McTableArgs) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(&args.out)?;
    let header = provenance(args, args.sim.seed);
    let table = svar::monte_carlo(&args.params, &args.sim, &args.mc)?;
    let mut written = Vec::new();
    let p = args.out.join("mc_table.csv");
    let mut h = header.clone();
    h.push(format!(
        "replications={} failed={}",
        table.replications, table.failures
    ));
    table.save_csv(&p, &h)?;
    written.push(p);
    for &tau in &args.mc.taus {
        let mut chart = Chart::new(
            format!("Cumulative QIR, tau = {tau}"),
            "horizon",
            "mean estimate",
        );
        let truth: Vec<(f64, f64)> = table
            .rows
            .iter()
            .filter(|r| r.tau == Some(tau) && r.estimator == args.mc.estimators[0])
            .map(|r| (r.horizon as f64, r.truth))
            .collect();
        chart
            .series
            .push(Series::markers("oracle", truth, Marker::Diamond, 5));
        for (i, &k) in args.mc.estimators.iter().enumerate() {
            let pts = table
                .rows
                .iter()
                .filter(|r| r.estimator == k && (r.tau == Some(tau) || r.tau.is_none()))
                .map(|r| (r.horizon as f64, r.mean_estimate))
                .collect();
            chart.series.push(Series::line(k.name(), pts, i));
        }
        let f = args.out.join(format!("mc_tau{tau}.svg"));
        chart.save(&f)?;
        written.push(f);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateArgs {
    pub manifest: PathBuf,
    pub treatment: Treatment,
    pub estimator: EstimatorKind,
    pub horizons: usize,
    pub taus: Vec<f64>,
    pub spec: SqfSpec,
    /// `None` skips bands.
    pub bootstrap: Option<BootConfig>,
    /// Also estimate the 0.05..0.95 quantile sweep when `taus` is coarser.
    pub sweep: bool,
    pub seed: u64,
    pub out: PathBuf,
}

/// Loads the manifest, builds the treatment and control design and runs the
/// estimator. The impact response is restricted to zero.
pub fn estimate_surface(args: &EstimateArgs, taus: &[f64], bands: bool) -> Result<QirSurface> {
    let manifest = DatasetManifest::load(&args.manifest)?;
    let raw = ingest::load_panel(&manifest)?;
    let (panel, treatment) = ingest::add_treatment(&raw, &manifest, &args.treatment)?;
    let design = ingest::empirical_design(&panel, &manifest, &treatment)?;
    let config = LpConfig {
        spec: args.spec,
        bootstrap: if bands { args.bootstrap } else { None },
        ..LpConfig::new(args.estimator, args.horizons, taus.to_vec())
    };
    let mut surface = lp::run_lp(&panel, &design, &config, Some(args.seed))?;
    surface.metadata.source = Some(DataSource {
        manifest: args.manifest.clone(),
        treatment: args.treatment.clone(),
    });
    Ok(surface)
}

fn write_surface(surface: &QirSurface, out: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    let csv = out.join(format!("{stem}.csv"));
    let json = out.join(format!("{stem}.json"));
    surface.save_csv(&csv)?;
    surface.save_json(&json)?;
    Ok(vec![csv, json])
}

/// Horizon paths: all quantiles on one chart plus one chart per quantile with its band.
pub fn horizon_charts(surface: &QirSurface, label: &str) -> Vec<(String, Chart)> {
    let mut charts = Vec::new();
    let hs: Vec<f64> = surface.horizons.iter().map(|&h| h as f64).collect();
    let rows = surface.row_labels();
    let name = |t: Option<f64>| {
        t.map(|t| format!("tau={t}"))
            .unwrap_or_else(|| "mean".into())
    };
    let mut all = Chart::new(
        format!("{label}: {}", surface.estimator),
        "horizon (months)",
        "response",
    );
    for (i, &t) in rows.iter().enumerate() {
        let pts = hs
            .iter()
            .copied()
            .zip(surface.estimates[i].iter().copied())
            .collect();
        all.series.push(Series::line(name(t), pts, i));
    }
    charts.push(("qir_paths".to_string(), all));
    if let (Some(lo), Some(hi)) = (&surface.lower, &surface.upper) {
        for (i, &t) in rows.iter().enumerate() {
            let mut c = Chart::new(
                format!("{label}: {} {}", surface.estimator, name(t)),
                "horizon (months)",
                "response",
            );
            c.bands.push(Band {
                x: hs.clone(),
                lower: lo[i].clone(),
                upper: hi[i].clone(),
                colour: i,
            });
            let pts = hs
                .iter()
                .copied()
                .zip(surface.estimates[i].iter().copied())
                .collect();
            c.series.push(Series::line(name(t), pts, i));
            let stem = t
                .map(|t| format!("qir_tau{t}"))
                .unwrap_or_else(|| "qir_mean".into());
            charts.push((stem, c));
        }
    }
    charts
}

/// Quantile sweeps at horizons 6, 12, 18 and 24 (those within range).
pub fn sweep_charts(surface: &QirSurface, label: &str) -> Vec<(String, Chart)> {
    let mut charts = Vec::new();
    for h in [6usize, 12, 18, 24] {
        let Some(j) = surface.horizons.iter().position(|&x| x == h) else {
            continue;
        };
        let mut c = Chart::new(format!("{label}: h = {h}"), "quantile", "response");
        let pts = surface
            .quantiles
            .iter()
            .zip(&surface.estimates)
            .map(|(&t, row)| (t, row[j]))
            .collect();
        if let (Some(lo), Some(hi)) = (&surface.lower, &surface.upper) {
            c.bands.push(Band {
                x: surface.quantiles.clone(),
                lower: lo.iter().map(|r| r[j]).collect(),
                upper: hi.iter().map(|r| r[j]).collect(),
                colour: 0,
            });
        }
        c.series
            .push(Series::markers("estimate", pts, Marker::Circle, 0));
        charts.push((format!("sweep_h{h}"), c));
    }
    charts
}

fn save_charts(charts: Vec<(String, Chart)>, out: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (stem, chart) in charts {
        let p = out.join(format!("{stem}.svg"));
        chart.save(&p)?;
        written.push(p);
    }
    Ok(written)
}

/// Empirical surface with optional bands, CSV/JSON outputs and figures.
pub fn cmd_estimate(args: &EstimateArgs) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(&args.out)?;
    let label = args.treatment.to_string();
    let surface = estimate_surface(args, &args.taus, true)?;
    let mut written = write_surface(&surface, &args.out, "surface")?;
    written.extend(save_charts(horizon_charts(&surface, &label), &args.out)?);

    let grid = parse_taus("0.05:0.95:0.05").expect("static grid");
    if surface.quantiles.len() >= 5 {
        written.extend(save_charts(sweep_charts(&surface, &label), &args.out)?);
    } else if args.sweep && args.estimator.is_quantile() {
        let sweep = estimate_surface(args, &grid, false)?;
        written.extend(write_surface(&sweep, &args.out, "sweep")?);
        written.extend(save_charts(sweep_charts(&sweep, &label), &args.out)?);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapArgs {
    pub surface: PathBuf,
    /// Overrides the manifest recorded in the surface.
    pub manifest: Option<PathBuf>,
    pub bootstrap: BootConfig,
    pub out: PathBuf,
}

/// Adds bootstrap bands to a previously estimated surface. The point
/// estimates are recomputed and must match the stored ones.
pub fn cmd_bootstrap(args: &BootstrapArgs) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(&args.out)?;
    let stored = QirSurface::load_json(&args.surface)?;
    let source = stored.metadata.source.clone().ok_or_else(|| {
        Error::InvalidInput("the surface does not record the data it was estimated from".into())
    })?;
    let manifest = args.manifest.clone().unwrap_or(source.manifest);
    let cfg = &stored.metadata.config;
    let est = EstimateArgs {
        manifest,
        treatment: source.treatment,
        estimator: stored.estimator,
        horizons: cfg.horizons,
        taus: cfg.quantiles.clone(),
        spec: cfg.spec,
        bootstrap: Some(args.bootstrap),
        sweep: false,
        seed: args.bootstrap.seed,
        out: args.out.clone(),
    };
    let surface = estimate_surface(&est, &cfg.quantiles, true)?;
    if surface.estimates != stored.estimates {
        return Err(Error::InvalidInput(
            "recomputed estimates differ from the stored surface; the data or version changed"
                .into(),
        ));
    }
    let label = est.treatment.to_string();
    let mut written = write_surface(&surface, &args.out, "surface_bands")?;
    written.extend(save_charts(horizon_charts(&surface, &label), &args.out)?);
    Ok(written)
}

/// Bundles every SVG in `dir` into `report.html`, with the CSV provenance headers.
pub fn cmd_report(dir: &Path, title: &str) -> Result<PathBuf> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    let mut html = format!(
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>{title}</title></head><body>\n<h1>{title}</h1>\n"
    );
    let csvs: Vec<&PathBuf> = entries
        .iter()
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    if !csvs.is_empty() {
        html.push_str("<h2>Tables</h2>\n<ul>\n");
        for p in csvs {
            let text = std::fs::read_to_string(p)?;
            let meta: Vec<&str> = text
                .lines()
                .take_while(|l| l.starts_with('#'))
                .map(|l| l.trim_start_matches('#').trim())
                .collect();
            let name = p.file_name().unwrap_or_default().to_string_lossy();
            html.push_str(&format!(
                "<li><a href=\"{name}\">{name}</a> <small>{}</small></li>\n",
                meta.join("; ")
            ));
        }
        html.push_str("</ul>\n");
    }
    html.push_str("<h2>Figures</h2>\n");
    for p in entries
        .iter()
        .filter(|p| p.extension().is_some_and(|e| e == "svg"))
    {
        let name = p.file_name().unwrap_or_default().to_string_lossy();
        html.push_str(&format!("<h3>{name}</h3>\n"));
        html.push_str(&std::fs::read_to_string(p)?);
    }
    html.push_str("</body></html>\n");
    let out = dir.join("report.html");
    std::fs::write(&out, html)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_lists_and_ranges() {
        assert_eq!(parse_taus("0.1, 0.5,0.9").unwrap(), vec![0.1, 0.5, 0.9]);
        let grid = parse_taus("0.05:0.95:0.05").unwrap();
        assert_eq!(grid.len(), 19);
        assert_eq!(grid[2], 0.15);
        assert_eq!(grid[18], 0.95);
        assert!(parse_taus("0.5,1.0").is_err());
        assert!(parse_taus("a").is_err());
        assert!(parse_taus("0.1:0.2").is_err());
    }

    #[test]
    fn simulate_writes_expected_files() {
        let dir = tempfile::tempdir().unwrap();
        let args = SimulateArgs {
            params: DgpParams::default(),
            sim: SimConfig {
                t: 3000,
                burn_in: 200,
                seed: 3,
                mc_reps: 2,
            },
            horizons: 1,
            taus: vec![0.1, 0.5, 0.9],
            bins: 10,
            out: dir.path().to_path_buf(),
        };
        let files = cmd_simulate(&args).unwrap();
        assert!(files.iter().all(|f| f.exists()));
        let bins = std::fs::read_to_string(dir.path().join("sqf_bins.csv")).unwrap();
        assert!(bins.starts_with("# qirlab"));
        let rows = bins.lines().filter(|l| !l.starts_with('#')).count();
        assert_eq!(rows, 1 + 3 * 10);
        let first = std::fs::read(dir.path().join("path.csv")).unwrap();
        cmd_simulate(&args).unwrap();
        assert_eq!(first, std::fs::read(dir.path().join("path.csv")).unwrap());
        let report = cmd_report(dir.path(), "sim").unwrap();
        assert!(std::fs::read_to_string(report).unwrap().contains("<svg"));
    }
}
