//! Monthly CSV ingestion, treatment construction and the empirical control design.
//!
//! CSV files are wide: a `date` column in `YYYY-MM` form followed by numeric
//! columns. A manifest (TOML or JSON) lists the files, the sample window and
//! the eight-variable ordering; the fifth entry is the treatment slot.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::lp::LpDesign;
use crate::timeseries::{first_difference, z_score, FrameSpec, OutcomeTransform, Panel};
use crate::{Error, Result};

/// Position of the treatment in the ordering (zero-based).
pub const TREATMENT_SLOT: usize = 4;
pub const CREDIT_RISK: &str = "credit_risk";
pub const VOLATILITY_RISK: &str = "volatility_risk";

/// Month encoded as `12 * year + (month - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth(pub i64);

impl YearMonth {
    pub fn new(year: i64, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidInput(format!("month {month} outside 1..=12")));
        }
        Ok(Self(year * 12 + month as i64 - 1))
    }

    pub fn year(self) -> i64 {
        self.0.div_euclid(12)
    }

    pub fn month(self) -> u32 {
        self.0.rem_euclid(12) as u32 + 1
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("date `{s}` is not in YYYY-MM form"));
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        YearMonth::new(y.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?)
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year(), self.month())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleWindow {
    pub start: String,
    pub end: String,
}

impl Default for SampleWindow {
    fn default() -> Self {
        Self {
            start: "1985-01".into(),
            end: "2023-08".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    /// CSV files, relative to the manifest.
    pub files: Vec<PathBuf>,
    #[serde(default = "default_date_column")]
    pub date_column: String,
    #[serde(default)]
    pub window: SampleWindow,
    /// Eight column names; entry five names the default treatment.
    pub ordering: Vec<String>,
    /// Level series whose cumulative log growth is the outcome.
    pub outcome_level: String,
    /// Excess bond premium column, for the credit-risk treatment.
    #[serde(default)]
    pub ebp: Option<String>,
    #[serde(default)]
    pub realized_vol: Option<String>,
    #[serde(default)]
    pub implied_vol: Option<String>,
    /// Directory the file paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_date_column() -> String {
    "date".into()
}

impl DatasetManifest {
    /// Reads a `.toml` or `.json` manifest; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut m: DatasetManifest = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text)?,
            _ => toml::from_str(&text).map_err(|e| Error::Manifest(e.to_string()))?,
        };
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ordering.len() != 8 {
            return Err(Error::Manifest(format!(
                "ordering must list exactly 8 variables, found {}",
                self.ordering.len()
            )));
        }
        if self.files.is_empty() {
            return Err(Error::Manifest("no data files listed".into()));
        }
        let (s, e) = self.window()?;
        if s > e {
            return Err(Error::Manifest(format!(
                "window start {s} is after end {e}"
            )));
        }
        Ok(())
    }

    pub fn window(&self) -> Result<(YearMonth, YearMonth)> {
        Ok((self.window.start.parse()?, self.window.end.parse()?))
    }

    pub fn treatment_name(&self) -> &str {
        &self.ordering[TREATMENT_SLOT]
    }
}

/// Reads a wide monthly CSV into `(month -> row)` plus the column names.
fn read_csv(
    path: &Path,
    date_column: &str,
) -> Result<(Vec<String>, BTreeMap<YearMonth, Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = rdr.headers()?.clone();
    let date_idx = headers
        .iter()
        .position(|h| h == date_column)
        .ok_or_else(|| {
            Error::Manifest(format!("{} has no `{date_column}` column", path.display()))
        })?;
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != date_idx)
        .map(|(_, h)| h.to_string())
        .collect();
    let mut rows = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let date: YearMonth = rec[date_idx].parse()?;
        let values = rec
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != date_idx)
            .map(|(_, v)| {
                if v.is_empty() {
                    Ok(f64::NAN)
                } else {
                    v.parse::<f64>()
                }
            })
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| {
                Error::InvalidInput(format!("{}: bad number at {date}: {e}", path.display()))
            })?;
        if rows.insert(date, values).is_some() {
            return Err(Error::InvalidInput(format!(
                "{}: duplicate date {date}",
                path.display()
            )));
        }
    }
    Ok((names, rows))
}

/// Loads every file, inner-joins on month and clips to the window. Months
/// missing inside the retained span (or holding empty cells) are an error
/// listing the first ten.
pub fn load_panel(manifest: &DatasetManifest) -> Result<Panel> {
    manifest.validate()?;
    let (start, end) = manifest.window()?;
    let mut tables = Vec::new();
    for f in &manifest.files {
        let path = manifest.base_dir.join(f);
        tables.push(read_csv(&path, &manifest.date_column)?);
    }
    let mut common: BTreeSet<YearMonth> = tables[0]
        .1
        .keys()
        .copied()
        .filter(|d| *d >= start && *d <= end)
        .collect();
    for (_, rows) in &tables[1..] {
        common.retain(|d| rows.contains_key(d));
    }
    let (first, last) = match (common.first(), common.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => {
            return Err(Error::InvalidInput(
                "the data files share no month inside the sample window".into(),
            ))
        }
    };
    let mut gaps = Vec::new();
    for m in first.0..=last.0 {
        let ym = YearMonth(m);
        let complete = common.contains(&ym)
            && tables
                .iter()
                .all(|(_, rows)| rows[&ym].iter().all(|v| v.is_finite()));
        if !complete {
            gaps.push(ym.to_string());
        }
    }
    if !gaps.is_empty() {
        gaps.truncate(10);
        return Err(Error::MissingDates(gaps));
    }
    let months: Vec<YearMonth> = common.into_iter().collect();
    let mut columns = Vec::new();
    for (names, rows) in &tables {
        for (j, name) in names.iter().enumerate() {
            columns.push((name.clone(), months.iter().map(|m| rows[m][j]).collect()));
        }
    }
    Panel::new(months.iter().map(|m| m.0).collect(), columns)
}

/// First difference of the excess bond premium, z-scored.
pub fn make_credit_risk(ebp: &[f64]) -> Result<Vec<f64>> {
    if ebp.len() < 3 {
        return Err(Error::InsufficientObservations {
            rows: ebp.len(),
            needed: 3,
        });
    }
    z_score(&first_difference(ebp))
}

/// Realized minus implied volatility, z-scored.
pub fn make_volatility_risk(realized: &[f64], implied: &[f64]) -> Result<Vec<f64>> {
    if realized.len() != implied.len() {
        return Err(Error::InvalidInput(
            "realized and implied volatility must be aligned".into(),
        ));
    }
    let diff: Vec<f64> = realized.iter().zip(implied).map(|(r, i)| r - i).collect();
    z_score(&diff)
}

/// Manifest and treatment a surface was estimated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSource {
    pub manifest: PathBuf,
    pub treatment: Treatment,
}

/// Which treatment to study.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Treatment {
    CreditRisk,
    VolatilityRisk,
    /// An existing column, z-scored.
    Column(String),
}

impl FromStr for Treatment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "credit-risk" => Treatment::CreditRisk,
            "volatility-risk" => Treatment::VolatilityRisk,
            "" => return Err(Error::InvalidInput("empty treatment name".into())),
            other => Treatment::Column(other.to_string()),
        })
    }
}

impl fmt::Display for Treatment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Treatment::CreditRisk => f.write_str("credit-risk"),
            Treatment::VolatilityRisk => f.write_str("volatility-risk"),
            Treatment::Column(c) => f.write_str(c),
        }
    }
}

/// Adds the standardized treatment column to the panel and returns its name.
/// The credit-risk difference costs the first month.
pub fn add_treatment(
    panel: &Panel,
    manifest: &DatasetManifest,
    treatment: &Treatment,
) -> Result<(Panel, String)> {
    let role = |r: &Option<String>, what: &str| {
        r.clone()
            .ok_or_else(|| Error::Manifest(format!("manifest does not name the {what} column")))
    };
    match treatment {
        Treatment::CreditRisk => {
            let ebp = panel.column(&role(&manifest.ebp, "excess bond premium")?)?;
            let d = make_credit_risk(ebp)?;
            Ok((panel.with_column(CREDIT_RISK, d)?, CREDIT_RISK.into()))
        }
        Treatment::VolatilityRisk => {
            let rv = panel.column(&role(&manifest.realized_vol, "realized volatility")?)?;
            let iv = panel.column(&role(&manifest.implied_vol, "implied volatility")?)?;
            let d = make_volatility_risk(rv, iv)?;
            Ok((
                panel.with_column(VOLATILITY_RISK, d)?,
                VOLATILITY_RISK.into(),
            ))
        }
        Treatment::Column(c) => {
            let name = format!("{c}_z");
            let d = z_score(panel.column(c)?)?;
            Ok((panel.with_column(&name, d)?, name))
        }
    }
}

/// Control recipe: the four variables ordered before the treatment enter
/// contemporaneously; lags one and two of all eight enter as well (with the
/// chosen treatment in slot five). The outcome is `100 * ln(level_{t+h} / level_{t-1})`
/// and the impact response is restricted to zero.
pub fn empirical_design(
    panel: &Panel,
    manifest: &DatasetManifest,
    treatment: &str,
) -> Result<LpDesign> {
    let mut ordering = manifest.ordering.clone();
    ordering[TREATMENT_SLOT] = treatment.to_string();
    for name in ordering
        .iter()
        .chain(std::iter::once(&manifest.outcome_level))
    {
        if !panel.has_column(name) {
            return Err(Error::UnknownColumn(name.clone()));
        }
    }
    Ok(LpDesign {
        frame: FrameSpec {
            outcome: manifest.outcome_level.clone(),
            outcome_transform: OutcomeTransform::CumulativeLogGrowth { scale: 100.0 },
            treatment: treatment.to_string(),
            contemporaneous: ordering[..TREATMENT_SLOT].to_vec(),
            lagged: ordering,
            max_lag: 2,
        },
        shock: None,
        timing_restriction: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{mean, sample_sd};

    fn write(dir: &Path, name: &str, body: &str) {
        std::fs::write(dir.join(name), body).unwrap();
    }

    fn manifest(dir: &Path, files: &[&str]) -> DatasetManifest {
        DatasetManifest {
            files: files.iter().map(PathBuf::from).collect(),
            date_column: "date".into(),
            window: SampleWindow::default(),
            ordering: (0..8).map(|i| format!("v{i}")).collect(),
            outcome_level: "ip".into(),
            ebp: None,
            realized_vol: None,
            implied_vol: None,
            base_dir: dir.to_path_buf(),
        }
    }

    #[test]
    fn year_month_round_trip() {
        let m: YearMonth = "1985-01".parse().unwrap();
        assert_eq!(m.to_string(), "1985-01");
        assert_eq!(YearMonth(m.0 + 12 * 38 + 7).to_string(), "2023-08");
        assert!("1985-13".parse::<YearMonth>().is_err());
        assert!("85-01".parse::<YearMonth>().is_err());
        // The default window holds 464 months.
        let (s, e) = (
            "1985-01".parse::<YearMonth>().unwrap(),
            "2023-08".parse::<YearMonth>().unwrap(),
        );
        assert_eq!(e.0 - s.0 + 1, 464);
    }

    #[test]
    fn inner_join_keeps_the_overlap() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "a.csv",
            "date,x\n2000-01,1\n2000-02,2\n2000-03,3\n2000-04,4\n",
        );
        write(
            dir.path(),
            "b.csv",
            "date,z\n2000-02,20\n2000-03,30\n2000-04,40\n2000-05,50\n",
        );
        let p = load_panel(&manifest(dir.path(), &["a.csv", "b.csv"])).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.column("x").unwrap(), &[2.0, 3.0, 4.0]);
        assert_eq!(p.column("z").unwrap(), &[20.0, 30.0, 40.0]);
        assert_eq!(YearMonth(p.index()[0]).to_string(), "2000-02");
    }

    #[test]
    fn gaps_are_named() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "a.csv",
            "date,x\n2000-01,1\n2000-02,2\n2000-04,4\n2000-05,\n2000-06,6\n",
        );
        match load_panel(&manifest(dir.path(), &["a.csv"])) {
            Err(Error::MissingDates(g)) => assert_eq!(g, vec!["2000-03", "2000-05"]),
            other => panic!("expected missing dates, got {other:?}"),
        }
    }

    #[test]
    fn window_clips() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "a.csv",
            "date,x\n1984-12,0\n1985-01,1\n1985-02,2\n",
        );
        let mut m = manifest(dir.path(), &["a.csv"]);
        m.window.end = "1985-01".into();
        let p = load_panel(&m).unwrap();
        assert_eq!(p.column("x").unwrap(), &[1.0]);
    }

    #[test]
    fn credit_risk_differences_then_standardizes() {
        let ebp = [0.5, 0.7, 0.4];
        let diffs = first_difference(&ebp);
        assert!((diffs[0] - 0.2).abs() < 1e-12 && (diffs[1] + 0.3).abs() < 1e-12);
        let d = make_credit_risk(&[0.5, 0.7, 0.4, 0.9, 0.1]).unwrap();
        assert!(mean(&d).abs() < 1e-10 && (sample_sd(&d) - 1.0).abs() < 1e-10);
        let trend: Vec<f64> = (0..10).map(|i| 0.1 * i as f64).collect();
        assert!(make_credit_risk(&trend).is_err());
    }

    #[test]
    fn volatility_risk_is_realized_minus_implied() {
        let d = make_volatility_risk(&[20.0, 25.0], &[18.0, 30.0]).unwrap();
        // differences [2, -5] standardize to [1/sqrt(2), -1/sqrt(2)]
        assert!((d[0] - 0.5f64.sqrt()).abs() < 1e-12 && (d[1] + 0.5f64.sqrt()).abs() < 1e-12);
        assert!(make_volatility_risk(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn manifest_parses_and_rejects_bad_ordering() {
        let dir = tempfile::tempdir().unwrap();
        let body = r#"
files = ["a.csv"]
ordering = ["a", "b", "c", "d", "credit_risk", "f", "g", "h"]
outcome_level = "ip"
ebp = "ebp"
"#;
        write(dir.path(), "m.toml", body);
        let m = DatasetManifest::load(&dir.path().join("m.toml")).unwrap();
        assert_eq!(m.treatment_name(), "credit_risk");
        assert_eq!(m.window, SampleWindow::default());
        assert_eq!(m.base_dir, dir.path());
        write(dir.path(), "bad.toml", &body.replace("\"h\"", ""));
        assert!(DatasetManifest::load(&dir.path().join("bad.toml")).is_err());
    }
}
