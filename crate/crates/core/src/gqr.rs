//! Generalized quantile regression for a scalar treatment.
//!
//! Targets the structural quantile function `q(tau | d)` that conditions on
//! the treatment only, while the controls `W` are used for identification:
//!
//! 1. for a candidate slope vector, the intercept is the empirical
//!    `tau`-quantile of the partial residuals, which pins the unconditional
//!    coverage of the candidate quantile function at `tau`;
//! 2. a binary model of the event `Y <= q(tau | D)` on `W` gives the
//!    conditional probabilities `p_W`;
//! 3. the moment `g = (1/T) sum_t D_t^j (1{Y_t <= q(tau | D_t)} - p_W,t)` is
//!    driven towards zero by a refining grid search.

use std::collections::HashMap;

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::binary::{self, BinaryOptions, LinkKind};
use crate::error::{Error, Result};
use crate::qr;
use crate::stats::{self, QuantileRule};
use crate::timeseries::ProjectionFrame;

/// Polynomial order of the treatment in the structural quantile function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SqfSpec {
    #[default]
    Linear,
    Quadratic,
}

impl SqfSpec {
    pub fn degree(self) -> usize {
        match self {
            SqfSpec::Linear => 1,
            SqfSpec::Quadratic => 2,
        }
    }

    /// Treatment polynomial terms `[d, d^2, ...]` up to the spec's degree.
    pub fn terms(self, d: f64) -> [f64; 2] {
        [d, d * d]
    }

    /// `q(d) - alpha` for the given slope coefficients.
    #[inline]
    pub fn shift(self, betas: &[f64], d: f64) -> f64 {
        match self {
            SqfSpec::Linear => betas[0] * d,
            SqfSpec::Quadratic => betas[0] * d + betas[1] * d * d,
        }
    }
}

/// Weighting matrix `A` in the criterion `g' A g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    #[default]
    Identity,
    /// Row-major square matrix matching the number of moments.
    Matrix(Vec<f64>),
}

impl Weighting {
    fn quadratic_form(&self, g: &[f64]) -> f64 {
        match self {
            Weighting::Identity => g.iter().map(|v| v * v).sum(),
            Weighting::Matrix(a) => {
                let m = g.len();
                let mut s = 0.0;
                for i in 0..m {
                    for j in 0..m {
                        s += g[i] * a[i * m + j] * g[j];
                    }
                }
                s
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GqrConfig {
    pub link: LinkKind,
    pub weighting: Weighting,
    /// Points per axis for the linear spec; odd and at least 11.
    pub grid_points: usize,
    /// Points per axis for the quadratic product grid.
    pub quadratic_grid_points: usize,
    /// Initial half-width in units of the rough standard-error proxy.
    pub grid_halfwidth_factor: f64,
    pub refinements: usize,
    pub shrink: f64,
    /// Times the initial grid may be re-centred when the incumbent sits on its edge.
    pub max_recentres: usize,
    pub quantile_rule: QuantileRule,
    pub binary: BinaryOptions,
}

impl Default for GqrConfig {
    fn default() -> Self {
        Self {
            link: LinkKind::Logit,
            weighting: Weighting::Identity,
            grid_points: 101,
            quadratic_grid_points: 41,
            grid_halfwidth_factor: 5.0,
            refinements: 2,
            shrink: 10.0,
            max_recentres: 20,
            quantile_rule: QuantileRule::Linear,
            binary: BinaryOptions::default(),
        }
    }
}

impl GqrConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, n) in [
            ("grid_points", self.grid_points),
            ("quadratic_grid_points", self.quadratic_grid_points),
        ] {
            if n < 11 || n % 2 == 0 {
                return Err(Error::InvalidInput(format!(
                    "{name} must be odd and at least 11, got {n}"
                )));
            }
        }
        if !(self.grid_halfwidth_factor > 0.0) || !(self.shrink > 1.0) {
            return Err(Error::InvalidInput(
                "grid half-width factor must be positive and shrink factor above one".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GqrFit {
    pub tau: f64,
    pub horizon: usize,
    pub alpha: f64,
    pub betas: Vec<f64>,
    /// Attained `g' A g`.
    pub objective: f64,
    /// Grid step of the final refinement stage (per slope coefficient).
    pub grid_resolution: Vec<f64>,
    /// Share of rows with `Y <= q(tau | D)` at the estimate.
    pub coverage: f64,
    /// Moment vector at the estimate.
    pub moments: Vec<f64>,
    /// Centre of the initial grid (the conditional quantile regression slope).
    pub grid_centre: Vec<f64>,
    /// Incumbent objective after each stage.
    pub stage_objectives: Vec<f64>,
    /// True when the estimate is still on the edge of the searched region.
    pub on_boundary: bool,
    /// Candidate slopes evaluated and distinct binary fits performed.
    pub evaluations: usize,
    pub binary_fits: usize,
}

/// The intercept that makes `alpha + shift(D)` an empirical `tau`-quantile of the outcome.
pub fn solve_intercept(
    outcome: &[f64],
    treatment: &[f64],
    betas: &[f64],
    tau: f64,
    spec: SqfSpec,
    rule: QuantileRule,
) -> Result<f64> {
    if outcome.len() != treatment.len() {
        return Err(Error::InvalidInput(
            "outcome and treatment lengths differ".into(),
        ));
    }
    if outcome.is_empty() {
        return Err(Error::InsufficientObservations { rows: 0, needed: 1 });
    }
    check_betas(betas, spec)?;
    let mut resid: Vec<f64> = outcome
        .iter()
        .zip(treatment)
        .map(|(y, d)| y - spec.shift(betas, *d))
        .collect();
    Ok(stats::quantile_in_place(&mut resid, tau, rule))
}

fn check_betas(betas: &[f64], spec: SqfSpec) -> Result<()> {
    if betas.len() != spec.degree() {
        return Err(Error::InvalidInput(format!(
            "expected {} slope coefficient(s), got {}",
            spec.degree(),
            betas.len()
        )));
    }
    Ok(())
}

/// Criterion value and moment vector at a candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEval {
    pub objective: f64,
    pub moments: Vec<f64>,
    pub alpha: f64,
    pub coverage: f64,
    /// False when ties among the residuals keep the coverage more than
    /// `1/T` away from `tau`; the grid search never selects such a point.
    pub admissible: bool,
}

impl MomentEval {
    fn search_value(&self) -> f64 {
        if self.admissible {
            self.objective
        } else {
            f64::INFINITY
        }
    }
}

/// Orders two search values: `Less` when `a` is lower by more than the
/// relative tie tolerance, `Equal` for ties (including two infinities).
fn compare(a: f64, b: f64) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    match (a.is_finite(), b.is_finite()) {
        (false, false) => Ordering::Equal,
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (true, true) => {
            let tie = 1e-9 * b.abs().max(f64::MIN_POSITIVE);
            if a < b - tie {
                Ordering::Less
            } else if a > b + tie {
                Ordering::Greater
            } else {
                Ordering::Equal
            }
        }
    }
}

/// Evaluates the criterion `g' A g` at the slope candidate `betas`.
pub fn gqr_objective(
    frame: &ProjectionFrame,
    tau: f64,
    betas: &[f64],
    spec: SqfSpec,
    config: &GqrConfig,
) -> Result<(f64, Vec<f64>)> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidTau(tau));
    }
    let mut ws = Workspace::new(frame.len());
    let eval = ws.evaluate(frame, tau, betas, spec, config, None)?;
    Ok((eval.objective, eval.moments))
}

/// Scratch buffers plus a memo of binary fits keyed by the indicator pattern.
///
/// The moment depends on the candidate only through the indicator, so equal
/// patterns give bit-identical criterion values and flat regions tie exactly.
struct Workspace {
    resid: Vec<f64>,
    scratch: Vec<f64>,
    indicator: Vec<bool>,
    memo: HashMap<Vec<u64>, (Vec<f64>, Vec<f64>)>,
    evaluations: usize,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            resid: vec![0.0; n],
            scratch: vec![0.0; n],
            indicator: vec![false; n],
            memo: HashMap::new(),
            evaluations: 0,
        }
    }

    fn pattern_key(&self) -> Vec<u64> {
        let mut key = vec![0u64; self.indicator.len().div_ceil(64)];
        for (i, &b) in self.indicator.iter().enumerate() {
            if b {
                key[i / 64] |= 1 << (i % 64);
            }
        }
        key
    }

    /// Returns the evaluation and the binary-model coefficients.
    fn evaluate_full(
        &mut self,
        frame: &ProjectionFrame,
        tau: f64,
        betas: &[f64],
        spec: SqfSpec,
        config: &GqrConfig,
        start: Option<&[f64]>,
    ) -> Result<(MomentEval, Vec<f64>)> {
        check_betas(betas, spec)?;
        self.evaluations += 1;
        let y = frame.outcome();
        let d = frame.treatment();
        let n = y.len();
        for i in 0..n {
            self.resid[i] = y[i] - spec.shift(betas, d[i]);
        }
        self.scratch.copy_from_slice(&self.resid);
        let alpha = stats::quantile_in_place(&mut self.scratch, tau, config.quantile_rule);
        // Residuals within rounding noise of alpha count as ties, so the
        // indicator does not hinge on the last bits of the outcome.
        let scale = self.resid.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-12 * scale;
        let mut alpha = alpha;
        let mut below = self.resid.iter().filter(|&&r| r <= alpha + tol).count();
        // A tie group at alpha can overshoot the target count; the order
        // statistic just below the group may then be closer to tau.
        let target = tau * n as f64;
        if below as f64 - target > 1.0 {
            let lower = self
                .resid
                .iter()
                .copied()
                .filter(|&r| r < alpha - tol)
                .fold(f64::NEG_INFINITY, f64::max);
            if lower.is_finite() {
                let count = self.resid.iter().filter(|&&r| r <= lower + tol).count();
                if (count as f64 - target).abs() < (below as f64 - target).abs() {
                    alpha = lower;
                    below = count;
                }
            }
        }
        for i in 0..n {
            self.indicator[i] = self.resid[i] <= alpha + tol;
        }
        let key = self.pattern_key();
        let (g, coefficients) = match self.memo.get(&key) {
            Some(hit) => hit.clone(),
            None => {
                let fit = binary::fit_binary_with(
                    frame.controls(),
                    &self.indicator,
                    config.link,
                    &config.binary,
                    start,
                )?;
                let p = &fit.fitted_probabilities;
                let m = spec.degree();
                let mut g = vec![0.0; m];
                for i in 0..n {
                    let e = if self.indicator[i] { 1.0 } else { 0.0 } - p[i];
                    let terms = spec.terms(d[i]);
                    for j in 0..m {
                        g[j] += terms[j] * e;
                    }
                }
                for v in g.iter_mut() {
                    *v /= n as f64;
                }
                self.memo.insert(key, (g.clone(), fit.coefficients.clone()));
                (g, fit.coefficients)
            }
        };
        Ok((
            MomentEval {
                objective: config.weighting.quadratic_form(&g),
                moments: g,
                alpha,
                coverage: below as f64 / n as f64,
                admissible: (below as f64 - target).abs() <= 1.0 + 1e-9,
            },
            coefficients,
        ))
    }

    fn evaluate(
        &mut self,
        frame: &ProjectionFrame,
        tau: f64,
        betas: &[f64],
        spec: SqfSpec,
        config: &GqrConfig,
        start: Option<&[f64]>,
    ) -> Result<MomentEval> {
        self.evaluate_full(frame, tau, betas, spec, config, start)
            .map(|(e, _)| e)
    }
}

/// Rough standard-error proxy for a slope on `regressor`:
/// `IQR(outcome) / (sqrt(T) * sd(regressor))`.
fn scale_proxy(outcome: &[f64], regressor: &[f64], centre: f64) -> f64 {
    let s = stats::iqr(outcome) / ((outcome.len() as f64).sqrt() * stats::sample_sd(regressor));
    if s.is_finite() && s > 0.0 {
        s
    } else {
        centre.abs() + 1.0
    }
}

/// Conditional (treatment and controls) quantile regression slopes on the
/// treatment polynomial; used to centre the search.
pub fn conditional_qr_slopes(frame: &ProjectionFrame, tau: f64, spec: SqfSpec) -> Result<Vec<f64>> {
    let w = frame.controls();
    let (n, k) = w.shape();
    let m = spec.degree();
    let d = frame.treatment();
    let x = DMatrix::from_fn(n, k + m, |i, j| {
        if j < m {
            spec.terms(d[i])[j]
        } else {
            w[(i, j - m)]
        }
    });
    let fit = qr::fit_qr(&x, frame.outcome(), tau)?;
    Ok(fit.coefficients[..m].to_vec())
}

/// Generalized quantile regression estimate for one `(tau, h)` frame.
pub fn fit_gqr(
    frame: &ProjectionFrame,
    tau: f64,
    spec: SqfSpec,
    config: &GqrConfig,
) -> Result<GqrFit> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidTau(tau));
    }
    config.validate()?;
    let n = frame.len();
    let tail = (tau.min(1.0 - tau) * n as f64).floor() as usize;
    if tail < 5 {
        warn!(
            "tau={tau}, h={}: only {tail} observation(s) expected in the thinner tail; the binary fit is weakly identified",
            frame.horizon()
        );
    }

    let centre = conditional_qr_slopes(frame, tau, spec)?;
    let d = frame.treatment();
    let d2: Vec<f64> = d.iter().map(|v| v * v).collect();
    let mut half: Vec<f64> = (0..spec.degree())
        .map(|j| {
            let reg = if j == 0 { d } else { &d2[..] };
            config.grid_halfwidth_factor * scale_proxy(frame.outcome(), reg, centre[j])
        })
        .collect();
    let points = match spec {
        SqfSpec::Linear => config.grid_points,
        SqfSpec::Quadratic => config.quadratic_grid_points,
    };

    let mut ws = Workspace::new(n);
    // The binary model at the grid centre seeds every evaluation of a stage,
    // so results do not depend on evaluation order.
    let (_, mut seed_coef) = ws.evaluate_full(frame, tau, &centre, spec, config, None)?;

    let mut stage_centre = centre.clone();
    let mut incumbent: Option<(Vec<f64>, MomentEval)> = None;
    let mut stage_objectives = Vec::new();
    let mut on_boundary = false;
    let mut recentres = 0;
    let mut stage = 0;
    let mut step = vec![0.0; spec.degree()];
    while stage <= config.refinements {
        for j in 0..half.len() {
            step[j] = 2.0 * half[j] / (points - 1) as f64;
        }
        let best = search_grid(
            &mut ws,
            frame,
            tau,
            spec,
            config,
            &stage_centre,
            &centre,
            &step,
            points,
            &seed_coef,
        )?;
        let (cand_betas, cand_eval, edge) = best;
        let (improved, closer) = match &incumbent {
            None => (true, false),
            Some((inc_betas, inc)) => {
                let order = compare(cand_eval.search_value(), inc.search_value());
                let strict = order.is_lt();
                let level = order.is_eq();
                let nearer = anchor_distance(&cand_betas, &centre, &half)
                    < anchor_distance(inc_betas, &centre, &half);
                (strict, level && nearer)
            }
        };
        if improved || closer {
            incumbent = Some((cand_betas.clone(), cand_eval));
        }
        let (inc_betas, inc_eval) = incumbent.as_ref().unwrap();
        if stage == 0 && edge && improved && recentres < config.max_recentres {
            // The minimizer may lie outside the initial region: move the grid.
            recentres += 1;
            stage_centre = inc_betas.clone();
            seed_coef = ws
                .evaluate_full(frame, tau, &stage_centre, spec, config, Some(&seed_coef))?
                .1;
            continue;
        }
        if stage == 0 {
            on_boundary = edge && improved;
        }
        stage_objectives.push(inc_eval.objective);
        stage_centre = inc_betas.clone();
        seed_coef = ws
            .evaluate_full(frame, tau, &stage_centre, spec, config, Some(&seed_coef))?
            .1;
        for h in half.iter_mut() {
            *h /= config.shrink;
        }
        stage += 1;
    }
    if on_boundary {
        warn!(
            "tau={tau}, h={}: estimate lies on the boundary of the search grid; widen the grid",
            frame.horizon()
        );
    }
    let (betas, eval) = incumbent.unwrap();
    if !eval.admissible {
        warn!(
            "tau={tau}, h={}: tied outcomes keep the coverage {:.4} more than 1/T from tau",
            frame.horizon(),
            eval.coverage
        );
    }
    Ok(GqrFit {
        tau,
        horizon: frame.horizon(),
        alpha: eval.alpha,
        betas,
        objective: eval.objective,
        grid_resolution: step,
        coverage: eval.coverage,
        moments: eval.moments,
        grid_centre: centre,
        stage_objectives,
        on_boundary,
        evaluations: ws.evaluations,
        binary_fits: ws.memo.len(),
    })
}

/// Squared distance to `anchor` in units of `scale` per coordinate.
fn anchor_distance(betas: &[f64], anchor: &[f64], scale: &[f64]) -> f64 {
    betas
        .iter()
        .zip(anchor.iter().zip(scale))
        .map(|(b, (a, s))| ((b - a) / s).powi(2))
        .sum()
}

/// Evaluates a full grid around `centre` and returns the minimizer (ties go to
/// the point closest to `anchor`) and whether it lies on the grid's edge.
#[allow(clippy::too_many_arguments)]
fn search_grid(
    ws: &mut Workspace,
    frame: &ProjectionFrame,
    tau: f64,
    spec: SqfSpec,
    config: &GqrConfig,
    centre: &[f64],
    anchor: &[f64],
    step: &[f64],
    points: usize,
    seed_coef: &[f64],
) -> Result<(Vec<f64>, MomentEval, bool)> {
    let mid = (points / 2) as i64;
    let offsets: Vec<i64> = (0..points as i64).map(|i| i - mid).collect();
    let mut cells: Vec<Vec<i64>> = Vec::new();
    match spec {
        SqfSpec::Linear => cells.extend(offsets.iter().map(|&o| vec![o])),
        SqfSpec::Quadratic => {
            for &a in &offsets {
                for &b in &offsets {
                    cells.push(vec![a, b]);
                }
            }
        }
    }
    let mut best: Option<(Vec<i64>, Vec<f64>, MomentEval)> = None;
    for cell in cells {
        let betas: Vec<f64> = cell
            .iter()
            .zip(centre.iter().zip(step))
            .map(|(&o, (&c, &s))| c + o as f64 * s)
            .collect();
        let eval = ws.evaluate(frame, tau, &betas, spec, config, Some(seed_coef))?;
        let better = match &best {
            None => true,
            Some((_, bb, be)) => match compare(eval.search_value(), be.search_value()) {
                std::cmp::Ordering::Less => true,
                std::cmp::Ordering::Equal => {
                    anchor_distance(&betas, anchor, step) < anchor_distance(bb, anchor, step)
                }
                std::cmp::Ordering::Greater => false,
            },
        };
        if better {
            best = Some((cell, betas, eval));
        }
    }
    let (cell, betas, eval) = best.expect("grid has at least one point");
    let edge = cell.iter().any(|o| o.abs() == mid);
    Ok((betas, eval, edge))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn intercept_examples() {
        let y = [1.0, 2.0, 3.0, 4.0, 5.0];
        let d = [0.0; 5];
        let a = solve_intercept(&y, &d, &[0.7], 0.25, SqfSpec::Linear, QuantileRule::Linear);
        assert_eq!(a.unwrap(), 2.0);

        let d: Vec<f64> = (0..7).map(|v| v as f64 * 0.3 - 1.0).collect();
        let y: Vec<f64> = d.iter().map(|v| 2.0 * v).collect();
        for tau in [0.1, 0.5, 0.9] {
            let a = solve_intercept(&y, &d, &[2.0], tau, SqfSpec::Linear, QuantileRule::Linear)
                .unwrap();
            assert!(a.abs() < 1e-15);
        }
        let raw = solve_intercept(&y, &d, &[0.0], 0.5, SqfSpec::Linear, QuantileRule::Linear);
        assert_eq!(raw.unwrap(), stats::quantile(&y, 0.5, QuantileRule::Linear));
        assert!(solve_intercept(
            &y,
            &d[..3],
            &[0.0],
            0.5,
            SqfSpec::Linear,
            QuantileRule::Linear
        )
        .is_err());
    }

    fn hand_frame() -> ProjectionFrame {
        let d = vec![
            0.5, -1.0, 2.0, 0.0, 1.5, -0.5, 1.0, -2.0, 0.25, 3.0, -1.5, 0.75,
        ];
        let y = vec![
            1.0, -0.5, 2.5, 0.2, 1.1, -1.0, 0.9, -2.2, 0.6, 2.0, -0.3, 0.1,
        ];
        ProjectionFrame::from_series(1, y, d).unwrap()
    }

    #[test]
    fn treatment_zero_gives_zero_moment() {
        let frame =
            ProjectionFrame::from_series(0, vec![1.0, 3.0, 2.0, 5.0, 4.0], vec![0.0; 5]).unwrap();
        for b in [-3.0, 0.0, 2.5] {
            let (obj, g) =
                gqr_objective(&frame, 0.4, &[b], SqfSpec::Linear, &GqrConfig::default()).unwrap();
            assert_eq!(obj, 0.0);
            assert_eq!(g, vec![0.0]);
        }
    }

    #[test]
    fn hand_traced_objective_intercept_only() {
        // Hand trace at beta = 0.5, tau = 0.25: residuals r = y - 0.5 d,
        // alpha = linear-rule quartile, indicator I = 1{r <= alpha},
        // p = mean(I) (intercept-only binary fit), g = mean(d (I - p)).
        let frame = hand_frame();
        let y = frame.outcome();
        let d = frame.treatment();
        let r: Vec<f64> = y.iter().zip(d).map(|(y, d)| y - 0.5 * d).collect();
        let mut sorted = r.clone();
        sorted.sort_by(f64::total_cmp);
        let pos = 11.0 * 0.25;
        let alpha = sorted[2] + (pos - 2.0) * (sorted[3] - sorted[2]);
        let ind: Vec<f64> = r
            .iter()
            .map(|v| if *v <= alpha { 1.0 } else { 0.0 })
            .collect();
        let p = ind.iter().sum::<f64>() / 12.0;
        let g: f64 = d.iter().zip(&ind).map(|(d, i)| d * (i - p)).sum::<f64>() / 12.0;

        let (obj, moments) =
            gqr_objective(&frame, 0.25, &[0.5], SqfSpec::Linear, &GqrConfig::default()).unwrap();
        assert!((moments[0] - g).abs() < 1e-9, "{} vs {g}", moments[0]);
        assert!((obj - g * g).abs() < 1e-12);
        assert_eq!(p, 3.0 / 12.0);
    }

    fn random_frame(seed: u64, n: usize) -> ProjectionFrame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let y: Vec<f64> = d
            .iter()
            .map(|d| 0.7 * d + (1.0 + 0.5 * d) * (rng.random::<f64>() - 0.5))
            .collect();
        ProjectionFrame::from_series(0, y, d).unwrap()
    }

    #[test]
    fn coverage_and_monotone_stages() {
        for seed in 0..6 {
            let frame = random_frame(seed, 150);
            for tau in [0.1, 0.5, 0.77] {
                let fit = fit_gqr(&frame, tau, SqfSpec::Linear, &GqrConfig::default()).unwrap();
                assert!((fit.coverage - tau).abs() <= 1.0 / 150.0 + 1e-12);
                assert_eq!(fit.stage_objectives.len(), 3);
                for w in fit.stage_objectives.windows(2) {
                    assert!(w[1] <= w[0]);
                }
            }
        }
    }

    #[test]
    fn location_shift_moves_only_alpha() {
        let frame = random_frame(21, 200);
        let shifted = frame
            .with_outcome(frame.outcome().iter().map(|v| v + 4.0).collect())
            .unwrap();
        let cfg = GqrConfig::default();
        let a = fit_gqr(&frame, 0.3, SqfSpec::Linear, &cfg).unwrap();
        let b = fit_gqr(&shifted, 0.3, SqfSpec::Linear, &cfg).unwrap();
        assert!((b.alpha - a.alpha - 4.0).abs() < 1e-6 + a.grid_resolution[0]);
        assert!((a.betas[0] - b.betas[0]).abs() <= a.grid_resolution[0] + 1e-9);
    }

    #[test]
    fn quadratic_spec_runs_and_keeps_coverage() {
        let frame = random_frame(4, 120);
        let cfg = GqrConfig {
            refinements: 1,
            ..GqrConfig::default()
        };
        let fit = fit_gqr(&frame, 0.5, SqfSpec::Quadratic, &cfg).unwrap();
        assert_eq!(fit.betas.len(), 2);
        assert_eq!(fit.moments.len(), 2);
        assert!((fit.coverage - 0.5).abs() <= 1.0 / 120.0 + 1e-12);
    }

    #[test]
    fn config_validation() {
        let bad = GqrConfig {
            grid_points: 10,
            ..GqrConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = GqrConfig {
            grid_points: 9,
            ..GqrConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
