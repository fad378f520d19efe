//! Estimates a quantile impulse response surface on the bundled synthetic
//! monthly sample: credit-risk treatment, 21-column control design, cumulative
//! log growth of the level series as outcome.

use std::path::Path;

use qirlab::ingest::{add_treatment, empirical_design, load_panel, DatasetManifest, Treatment};
use qirlab::lp::{run_lp, EstimatorKind, LpConfig};

fn main() -> qirlab::Result<()> {
    let manifest_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/sample/manifest.toml");
    let manifest = DatasetManifest::load(&manifest_path)?;
    let raw = load_panel(&manifest)?;
    println!("loaded {} months, columns {:?}", raw.len(), raw.names());
    let (panel, treatment) = add_treatment(&raw, &manifest, &Treatment::CreditRisk)?;
    let design = empirical_design(&panel, &manifest, &treatment)?;
    for estimator in [EstimatorKind::OlsLp, EstimatorKind::GqrLp] {
        let config = LpConfig::new(estimator, 12, vec![0.1, 0.5, 0.9]);
        let surface = run_lp(&panel, &design, &config, None)?;
        println!(
            "{estimator} (control width {})",
            surface.metadata.control_width
        );
        for (label, row) in surface.row_labels().iter().zip(&surface.estimates) {
            let name = label
                .map(|t| format!("tau={t}"))
                .unwrap_or_else(|| "mean".into());
            let cells: Vec<String> = row.iter().map(|v| format!("{v:6.2}")).collect();
            println!("  {name:>8}: {}", cells.join(" "));
        }
    }
    Ok(())
}
