//! Aligned time series, transformations, and per-horizon regression frames.

use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::stats;

/// Name given to the intercept column of every control matrix.
pub const INTERCEPT: &str = "const";

/// A set of equally long, named series on a strictly increasing integer time index.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    index: Vec<i64>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Panel {
    pub fn new(index: Vec<i64>, columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let len = index.len();
        if len == 0 {
            return Err(Error::InvalidInput(
                "panel must have at least one row".into(),
            ));
        }
        if index.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "panel index must be strictly increasing".into(),
            ));
        }
        let mut seen = HashSet::new();
        let mut names = Vec::with_capacity(columns.len());
        let mut values = Vec::with_capacity(columns.len());
        for (name, col) in columns {
            if !seen.insert(name.clone()) {
                return Err(Error::InvalidInput(format!("duplicate column `{name}`")));
            }
            if col.len() != len {
                return Err(Error::InvalidInput(format!(
                    "column `{name}` has {} values, index has {len}",
                    col.len()
                )));
            }
            if let Some(pos) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "column `{name}` has a missing or non-finite value at row {pos}"
                )));
            }
            names.push(name);
            values.push(col);
        }
        Ok(Self {
            index,
            names,
            columns: values,
        })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn index(&self) -> &[i64] {
        &self.index
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    /// Returns a copy with an extra column. The column may be shorter than the
    /// panel, in which case it is aligned to the *end* of the panel and the
    /// leading rows without a value are dropped from every column.
    pub fn with_column(&self, name: &str, values: Vec<f64>) -> Result<Panel> {
        if values.len() > self.len() {
            return Err(Error::InvalidInput(format!(
                "column `{name}` is longer than the panel"
            )));
        }
        let skip = self.len() - values.len();
        let mut cols: Vec<(String, Vec<f64>)> = self
            .names
            .iter()
            .cloned()
            .zip(self.columns.iter().map(|c| c[skip..].to_vec()))
            .collect();
        cols.push((name.to_string(), values));
        Panel::new(self.index[skip..].to_vec(), cols)
    }

    /// Rows `range` of every column.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Panel> {
        let cols = self
            .names
            .iter()
            .cloned()
            .zip(self.columns.iter().map(|c| c[range.clone()].to_vec()))
            .collect();
        Panel::new(self.index[range].to_vec(), cols)
    }
}

/// How the outcome column is turned into the left-hand side at horizon `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum OutcomeTransform {
    /// `y[t + h]`.
    Lead,
    /// `y[t] + y[t + 1] + ... + y[t + h]`.
    CumulativeSum,
    /// `scale * (ln x[t + h] - ln x[t - 1])` for a level series `x`.
    CumulativeLogGrowth { scale: f64 },
}

impl OutcomeTransform {
    /// Number of rows before `t` the transform needs.
    fn lookback(&self) -> usize {
        match self {
            OutcomeTransform::CumulativeLogGrowth { .. } => 1,
            _ => 0,
        }
    }
}

/// Series-level transformations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum TransformSpec {
    CumulativeLogGrowth { horizon: usize, scale: f64 },
    FirstDifference { scale: f64 },
    ZScore,
    Identity { scale: f64 },
}

impl TransformSpec {
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        match *self {
            TransformSpec::CumulativeLogGrowth { horizon, scale } => {
                Ok(cumulative_log_growth(x, horizon)?
                    .into_iter()
                    .map(|v| v * scale / 100.0)
                    .collect())
            }
            TransformSpec::FirstDifference { scale } => {
                Ok(first_difference(x).into_iter().map(|v| v * scale).collect())
            }
            TransformSpec::ZScore => z_score(x),
            TransformSpec::Identity { scale } => Ok(x.iter().map(|v| v * scale).collect()),
        }
    }
}

/// `100 * (ln levels[t + h] - ln levels[t - 1])` for every `t` where both terms exist.
///
/// Element `i` of the output corresponds to `t = i + 1`.
pub fn cumulative_log_growth(levels: &[f64], h: usize) -> Result<Vec<f64>> {
    if let Some((index, &value)) = levels.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositiveLevel { index, value });
    }
    if h + 1 >= levels.len() {
        return Err(Error::InsufficientObservations {
            rows: levels.len(),
            needed: h + 2,
        });
    }
    Ok((1..levels.len() - h)
        .map(|t| 100.0 * (levels[t + h].ln() - levels[t - 1].ln()))
        .collect())
}

/// `x[t] - x[t - 1]`; one element shorter than the input.
pub fn first_difference(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Standardizes to sample mean 0 and sample (n - 1) standard deviation 1.
pub fn z_score(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::DegenerateSeries);
    }
    let m = stats::mean(x);
    let sd = stats::sample_sd(x);
    let scale = x.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1.0);
    if !(sd > 1e-12 * scale) {
        return Err(Error::DegenerateSeries);
    }
    Ok(x.iter().map(|v| (v - m) / sd).collect())
}

/// Per-horizon regression frame: outcome lead, scalar treatment and controls
/// sharing the treatment time stamp `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionFrame {
    horizon: usize,
    times: Vec<i64>,
    outcome: Vec<f64>,
    treatment: Vec<f64>,
    controls: DMatrix<f64>,
    control_names: Vec<String>,
}

impl ProjectionFrame {
    /// Validates row alignment, the observation count (at least `k + 2` rows
    /// for `k` controls) and full column rank of the control matrix.
    pub fn new(
        horizon: usize,
        times: Vec<i64>,
        outcome: Vec<f64>,
        treatment: Vec<f64>,
        controls: DMatrix<f64>,
        control_names: Vec<String>,
    ) -> Result<Self> {
        let n = outcome.len();
        if treatment.len() != n || times.len() != n || controls.nrows() != n {
            return Err(Error::InvalidInput(
                "outcome, treatment, times and controls must have equal row counts".into(),
            ));
        }
        if control_names.len() != controls.ncols() {
            return Err(Error::InvalidInput(
                "one name per control column is required".into(),
            ));
        }
        let needed = controls.ncols() + 2;
        if n < needed {
            return Err(Error::InsufficientObservations { rows: n, needed });
        }
        linalg::ensure_full_rank(&controls)?;
        Ok(Self {
            horizon,
            times,
            outcome,
            treatment,
            controls,
            control_names,
        })
    }

    /// Frame with an intercept-only control matrix.
    pub fn from_series(horizon: usize, outcome: Vec<f64>, treatment: Vec<f64>) -> Result<Self> {
        let n = outcome.len();
        Self::new(
            horizon,
            (0..n as i64).collect(),
            outcome,
            treatment,
            DMatrix::from_element(n, 1, 1.0),
            vec![INTERCEPT.to_string()],
        )
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Effective number of rows.
    pub fn len(&self) -> usize {
        self.outcome.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcome.is_empty()
    }

    /// Time stamp of the treatment in each row.
    pub fn times(&self) -> &[i64] {
        &self.times
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn treatment(&self) -> &[f64] {
        &self.treatment
    }

    pub fn controls(&self) -> &DMatrix<f64> {
        &self.controls
    }

    pub fn control_names(&self) -> &[String] {
        &self.control_names
    }

    /// Same rows with only the intercept as control.
    pub fn intercept_only(&self) -> Result<Self> {
        Self::new(
            self.horizon,
            self.times.clone(),
            self.outcome.clone(),
            self.treatment.clone(),
            DMatrix::from_element(self.len(), 1, 1.0),
            vec![INTERCEPT.to_string()],
        )
    }

    /// Frame made of verbatim copies of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let pick = |v: &[f64]| rows.iter().map(|&r| v[r]).collect::<Vec<_>>();
        let controls = DMatrix::from_fn(rows.len(), self.controls.ncols(), |i, j| {
            self.controls[(rows[i], j)]
        });
        Self::new(
            self.horizon,
            rows.iter().map(|&r| self.times[r]).collect(),
            pick(&self.outcome),
            pick(&self.treatment),
            controls,
            self.control_names.clone(),
        )
    }

    /// Returns a copy with the outcome replaced.
    pub fn with_outcome(&self, outcome: Vec<f64>) -> Result<Self> {
        Self::new(
            self.horizon,
            self.times.clone(),
            outcome,
            self.treatment.clone(),
            self.controls.clone(),
            self.control_names.clone(),
        )
    }
}

/// Which panel columns play which role in a projection frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub outcome: String,
    pub outcome_transform: OutcomeTransform,
    pub treatment: String,
    /// Controls entering at the treatment date `t`.
    pub contemporaneous: Vec<String>,
    /// Columns entering with lags `1..=max_lag`.
    pub lagged: Vec<String>,
    pub max_lag: usize,
}

/// Builds the horizon-`h` frame. Rows whose leads or lags fall outside the
/// panel are dropped, so `T_eff = T - h - max(max_lag, lookback)` where the
/// lookback is one for log-growth outcomes and zero otherwise.
///
/// Controls are ordered `[const, contemporaneous..., for each lagged column its lags 1..=max_lag]`.
pub fn build_frame(panel: &Panel, spec: &FrameSpec, h: usize) -> Result<ProjectionFrame> {
    let t_len = panel.len();
    let outcome_col = panel.column(&spec.outcome)?;
    let treatment_col = panel.column(&spec.treatment)?;
    let contemporaneous = spec
        .contemporaneous
        .iter()
        .map(|n| panel.column(n))
        .collect::<Result<Vec<_>>>()?;
    let lagged = spec
        .lagged
        .iter()
        .map(|n| panel.column(n))
        .collect::<Result<Vec<_>>>()?;

    let start = spec.max_lag.max(spec.outcome_transform.lookback());
    let k = 1 + contemporaneous.len() + lagged.len() * spec.max_lag;
    if t_len < start + h + 1 {
        return Err(Error::InsufficientObservations {
            rows: t_len.saturating_sub(start + h),
            needed: k + 2,
        });
    }
    let rows: Vec<usize> = (start..t_len - h).collect();
    let n = rows.len();

    let outcome = rows
        .iter()
        .map(|&t| match spec.outcome_transform {
            OutcomeTransform::Lead => Ok(outcome_col[t + h]),
            OutcomeTransform::CumulativeSum => Ok(outcome_col[t..=t + h].iter().sum()),
            OutcomeTransform::CumulativeLogGrowth { scale } => {
                for idx in [t - 1, t + h] {
                    if !(outcome_col[idx] > 0.0) {
                        return Err(Error::NonPositiveLevel {
                            index: idx,
                            value: outcome_col[idx],
                        });
                    }
                }
                Ok(scale * (outcome_col[t + h].ln() - outcome_col[t - 1].ln()))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let treatment = rows.iter().map(|&t| treatment_col[t]).collect();
    let times = rows.iter().map(|&t| panel.index()[t]).collect();

    let mut names = vec![INTERCEPT.to_string()];
    names.extend(spec.contemporaneous.iter().cloned());
    for name in &spec.lagged {
        for lag in 1..=spec.max_lag {
            names.push(format!("{name}_lag{lag}"));
        }
    }
    let controls = DMatrix::from_fn(n, k, |i, j| {
        let t = rows[i];
        if j == 0 {
            return 1.0;
        }
        let j = j - 1;
        if j < contemporaneous.len() {
            return contemporaneous[j][t];
        }
        let j = j - contemporaneous.len();
        let (col, lag) = (j / spec.max_lag, j % spec.max_lag + 1);
        lagged[col][t - lag]
    });

    ProjectionFrame::new(h, times, outcome, treatment, controls, names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy_panel() -> Panel {
        Panel::new(
            vec![10, 11, 12, 13, 14, 15, 16, 17],
            vec![
                (
                    "y".into(),
                    vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0],
                ),
                ("d".into(), vec![0.5, -0.5, 1.5, 0.0, 2.0, -1.0, 0.7, 0.1]),
                ("w".into(), vec![3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn log_growth_hand_value() {
        let out = cumulative_log_growth(&[100.0, 101.0, 102.01], 1).unwrap();
        assert_eq!(out.len(), 1);
        assert!((out[0] - 100.0 * 1.0201_f64.ln()).abs() < 1e-12);
        assert!((out[0] - 1.99007).abs() < 1e-5);
    }

    #[test]
    fn log_growth_flat_levels_are_zero() {
        for h in 0..3 {
            let out = cumulative_log_growth(&[5.0; 6], h).unwrap();
            assert!(out.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn log_growth_h0_is_one_period_growth() {
        let lv = [2.0, 3.0, 2.5, 4.0];
        let out = cumulative_log_growth(&lv, 0).unwrap();
        for (i, v) in out.iter().enumerate() {
            assert!((v - 100.0 * (lv[i + 1] / lv[i]).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn log_growth_rejects_non_positive_level() {
        match cumulative_log_growth(&[1.0, 2.0, 0.0, 3.0], 1) {
            Err(Error::NonPositiveLevel { index, .. }) => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn z_score_small_example() {
        let z = z_score(&[1.0, 2.0, 3.0]).unwrap();
        for (a, b) in z.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(matches!(z_score(&[2.0; 4]), Err(Error::DegenerateSeries)));
    }

    #[test]
    fn frame_row_count() {
        let panel = Panel::new(
            (0..10).collect(),
            vec![
                ("y".into(), (0..10).map(|v| v as f64).collect()),
                ("d".into(), (0..10).map(|v| ((v * 7) % 5) as f64).collect()),
            ],
        )
        .unwrap();
        let spec = FrameSpec {
            outcome: "y".into(),
            outcome_transform: OutcomeTransform::Lead,
            treatment: "d".into(),
            contemporaneous: vec![],
            lagged: vec![],
            max_lag: 2,
        };
        let frame = build_frame(&panel, &spec, 2).unwrap();
        assert_eq!(frame.len(), 6);
        assert_eq!(frame.controls().ncols(), 1);
        assert_eq!(frame.control_names(), &["const".to_string()]);
    }

    #[test]
    fn frame_hand_aligned_row() {
        let spec = FrameSpec {
            outcome: "y".into(),
            outcome_transform: OutcomeTransform::Lead,
            treatment: "d".into(),
            contemporaneous: vec!["w".into()],
            lagged: vec!["y".into(), "d".into()],
            max_lag: 1,
        };
        let frame = build_frame(&toy_panel(), &spec, 1).unwrap();
        // rows t = 1..=6; h = 1
        assert_eq!(frame.len(), 6);
        assert_eq!(frame.times(), &[11, 12, 13, 14, 15, 16]);
        // row for t = 2 (time 12): y[3]=8, d[2]=1.5, [1, w[2]=4, y[1]=2, d[1]=-0.5]
        assert_eq!(frame.outcome()[1], 8.0);
        assert_eq!(frame.treatment()[1], 1.5);
        let row: Vec<f64> = frame.controls().row(1).iter().cloned().collect();
        assert_eq!(row, vec![1.0, 4.0, 2.0, -0.5]);
        assert_eq!(
            frame.control_names(),
            &["const", "w", "y_lag1", "d_lag1"].map(String::from)
        );
    }

    #[test]
    fn frame_cumulative_outcomes() {
        let spec = FrameSpec {
            outcome: "y".into(),
            outcome_transform: OutcomeTransform::CumulativeSum,
            treatment: "d".into(),
            contemporaneous: vec![],
            lagged: vec![],
            max_lag: 0,
        };
        let frame = build_frame(&toy_panel(), &spec, 2).unwrap();
        assert_eq!(frame.outcome(), &[7.0, 14.0, 28.0, 56.0, 112.0, 224.0]);

        let spec = FrameSpec {
            outcome_transform: OutcomeTransform::CumulativeLogGrowth { scale: 100.0 },
            ..spec
        };
        let frame = build_frame(&toy_panel(), &spec, 1).unwrap();
        // t = 1..=6: 100 * ln(y[t+1] / y[t-1]) = 100 ln 4
        assert_eq!(frame.len(), 6);
        for v in frame.outcome() {
            assert!((v - 100.0 * 4f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn frame_rejects_too_few_rows_and_rank_deficiency() {
        let spec = FrameSpec {
            outcome: "y".into(),
            outcome_transform: OutcomeTransform::Lead,
            treatment: "d".into(),
            contemporaneous: vec!["w".into(), "y".into()],
            lagged: vec!["w".into(), "d".into()],
            max_lag: 2,
        };
        assert!(matches!(
            build_frame(&toy_panel(), &spec, 1),
            Err(Error::InsufficientObservations { .. })
        ));

        let n = 12;
        let panel = Panel::new(
            (0..n as i64).collect(),
            vec![
                ("y".into(), (0..n).map(|v| (v as f64).sin()).collect()),
                ("d".into(), (0..n).map(|v| (v as f64).cos()).collect()),
                ("c".into(), vec![2.0; n]),
            ],
        )
        .unwrap();
        let spec = FrameSpec {
            outcome: "y".into(),
            outcome_transform: OutcomeTransform::Lead,
            treatment: "d".into(),
            contemporaneous: vec!["c".into()],
            lagged: vec![],
            max_lag: 0,
        };
        assert!(matches!(
            build_frame(&panel, &spec, 0),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn panel_validation() {
        assert!(Panel::new(vec![1, 1], vec![("a".into(), vec![0.0, 1.0])]).is_err());
        assert!(Panel::new(
            vec![1, 2],
            vec![("a".into(), vec![0.0, 1.0]), ("a".into(), vec![0.0, 1.0])]
        )
        .is_err());
        assert!(Panel::new(vec![1, 2], vec![("a".into(), vec![0.0, f64::NAN])]).is_err());
        assert!(Panel::new(vec![1, 2], vec![("a".into(), vec![0.0])]).is_err());
    }

    fn random_panel(seed: u64, n: usize) -> Panel {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let cols = ["y", "d", "a", "b"]
            .iter()
            .map(|c| (c.to_string(), (0..n).map(|_| rng.random::<f64>()).collect()))
            .collect();
        Panel::new((0..n as i64).collect(), cols).unwrap()
    }

    proptest! {
        #[test]
        fn rows_are_aligned_h_steps_ahead(seed in 0u64..1000, h in 0usize..5, lag in 0usize..3) {
            let panel = random_panel(seed, 40);
            let spec = FrameSpec {
                outcome: "y".into(),
                outcome_transform: OutcomeTransform::Lead,
                treatment: "d".into(),
                contemporaneous: vec!["a".into()],
                lagged: vec!["b".into()],
                max_lag: lag,
            };
            let frame = build_frame(&panel, &spec, h).unwrap();
            prop_assert_eq!(frame.len(), 40 - h - lag);
            let y = panel.column("y").unwrap();
            let d = panel.column("d").unwrap();
            for (i, &t) in frame.times().iter().enumerate() {
                let t = t as usize;
                prop_assert_eq!(frame.outcome()[i], y[t + h]);
                prop_assert_eq!(frame.treatment()[i], d[t]);
            }
        }

        #[test]
        fn control_order_only_permutes_columns(seed in 0u64..1000) {
            let panel = random_panel(seed, 40);
            let spec = FrameSpec {
                outcome: "y".into(),
                outcome_transform: OutcomeTransform::Lead,
                treatment: "d".into(),
                contemporaneous: vec!["a".into(), "b".into()],
                lagged: vec!["a".into(), "b".into()],
                max_lag: 2,
            };
            let swapped = FrameSpec {
                contemporaneous: vec!["b".into(), "a".into()],
                lagged: vec!["b".into(), "a".into()],
                ..spec.clone()
            };
            let f1 = build_frame(&panel, &spec, 1).unwrap();
            let f2 = build_frame(&panel, &swapped, 1).unwrap();
            prop_assert_eq!(f1.outcome(), f2.outcome());
            for (j, name) in f1.control_names().iter().enumerate() {
                let j2 = f2.control_names().iter().position(|n| n == name).unwrap();
                prop_assert_eq!(f1.controls().column(j), f2.controls().column(j2));
            }
        }

        #[test]
        fn z_score_is_idempotent(xs in prop::collection::vec(-1e3f64..1e3, 3..50)) {
            prop_assume!(stats::sample_sd(&xs) > 1e-6);
            let z = z_score(&xs).unwrap();
            prop_assert!(stats::mean(&z).abs() < 1e-12);
            prop_assert!((stats::sample_sd(&z) - 1.0).abs() < 1e-12);
            let zz = z_score(&z).unwrap();
            for (a, b) in z.iter().zip(&zz) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
