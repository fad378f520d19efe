//! Ridge-penalized binary-outcome models (logit and probit).
//!
//! The fitted probabilities feed the conditional-probability term of the
//! generalized quantile regression moment. Quasi-separation is common when the
//! indicator is heavily imbalanced, so the likelihood carries a small ridge
//! penalty on every non-intercept coefficient.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LinkKind {
    #[default]
    Logit,
    Probit,
}

/// Fitting options. The objective maximized is
/// `(1/T) * loglik(b) - penalty * |b without intercept|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryOptions {
    pub penalty: f64,
    /// Largest penalty tried when Newton fails to converge; the penalty is
    /// escalated by a factor of ten up to this value.
    pub max_penalty: f64,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for BinaryOptions {
    fn default() -> Self {
        Self {
            penalty: 1e-6,
            max_penalty: 1e-2,
            tolerance: 1e-8,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryFit {
    pub link: LinkKind,
    pub coefficients: Vec<f64>,
    /// In row order, each strictly inside `(0, 1)`.
    pub fitted_probabilities: Vec<f64>,
    pub converged: bool,
    /// Penalty actually used (after any escalation).
    pub penalty: f64,
    pub iterations: usize,
}

const PROB_FLOOR: f64 = 1e-15;

fn intercept_column(w: &DMatrix<f64>) -> Option<usize> {
    (0..w.ncols()).find(|&j| w.column(j).iter().all(|v| *v == 1.0))
}

struct LinkEval {
    prob: f64,
    /// d loglik_i / d eta
    score: f64,
    /// Weight for the (expected) information matrix.
    weight: f64,
    loglik: f64,
}

fn std_normal() -> Normal {
    Normal::standard()
}

#[inline]
fn eval_link(link: LinkKind, normal: &Normal, eta: f64, y: f64) -> LinkEval {
    match link {
        LinkKind::Logit => {
            let p = if eta >= 0.0 {
                1.0 / (1.0 + (-eta).exp())
            } else {
                let e = eta.exp();
                e / (1.0 + e)
            };
            // log(1 + exp(eta)) computed stably
            let softplus = if eta > 0.0 {
                eta + (-eta).exp().ln_1p()
            } else {
                eta.exp().ln_1p()
            };
            LinkEval {
                prob: p,
                score: y - p,
                weight: p * (1.0 - p),
                loglik: y * eta - softplus,
            }
        }
        LinkKind::Probit => {
            let p = normal.cdf(eta).clamp(1e-300, 1.0);
            let q = normal.cdf(-eta).clamp(1e-300, 1.0);
            let dens = normal.pdf(eta);
            let score = if y > 0.5 { dens / p } else { -dens / q };
            LinkEval {
                prob: p,
                score,
                weight: dens * dens / (p * q),
                loglik: if y > 0.5 { p.ln() } else { q.ln() },
            }
        }
    }
}

/// Fits the binary model of `indicator` on `w`; `w` must contain an
/// intercept column (all ones).
pub fn fit_binary(w: &DMatrix<f64>, indicator: &[bool], link: LinkKind) -> Result<BinaryFit> {
    fit_binary_with(w, indicator, link, &BinaryOptions::default(), None)
}

/// As [`fit_binary`] with explicit options and an optional starting point.
pub fn fit_binary_with(
    w: &DMatrix<f64>,
    indicator: &[bool],
    link: LinkKind,
    options: &BinaryOptions,
    start: Option<&[f64]>,
) -> Result<BinaryFit> {
    let (n, k) = w.shape();
    if indicator.len() != n {
        return Err(Error::InvalidInput(format!(
            "indicator has {} entries, design has {n} rows",
            indicator.len()
        )));
    }
    if n <= k {
        return Err(Error::InsufficientObservations {
            rows: n,
            needed: k + 1,
        });
    }
    let intercept = intercept_column(w).ok_or_else(|| {
        Error::InvalidInput("binary design must include an intercept column".into())
    })?;

    let ones = indicator.iter().filter(|v| **v).count();
    if ones == 0 || ones == n {
        let p = if ones == 0 {
            1.0 / (n as f64 + 1.0)
        } else {
            n as f64 / (n as f64 + 1.0)
        };
        let mut coefficients = vec![0.0; k];
        coefficients[intercept] = match link {
            LinkKind::Logit => (p / (1.0 - p)).ln(),
            LinkKind::Probit => std_normal().inverse_cdf(p),
        };
        return Ok(BinaryFit {
            link,
            coefficients,
            fitted_probabilities: vec![p; n],
            converged: true,
            penalty: options.penalty,
            iterations: 0,
        });
    }

    let y: Vec<f64> = indicator
        .iter()
        .map(|&b| if b { 1.0 } else { 0.0 })
        .collect();
    let mut penalty = options.penalty;
    loop {
        if let Some(fit) = newton(w, &y, link, penalty, intercept, options, start) {
            return Ok(fit);
        }
        if penalty >= options.max_penalty {
            return Err(Error::BinaryFitFailed(format!(
                "no convergence after escalating the penalty to {penalty:e}"
            )));
        }
        penalty = if penalty > 0.0 {
            (penalty * 10.0).min(options.max_penalty)
        } else {
            1e-6_f64.min(options.max_penalty)
        };
    }
}

fn newton(
    w: &DMatrix<f64>,
    y: &[f64],
    link: LinkKind,
    penalty: f64,
    intercept: usize,
    options: &BinaryOptions,
    start: Option<&[f64]>,
) -> Option<BinaryFit> {
    let (n, k) = w.shape();
    let normal = std_normal();
    let inv_n = 1.0 / n as f64;
    let mut beta = match start {
        Some(s) if s.len() == k && s.iter().all(|v| v.is_finite()) => s.to_vec(),
        _ => {
            let ybar = y.iter().sum::<f64>() * inv_n;
            let mut b = vec![0.0; k];
            b[intercept] = match link {
                LinkKind::Logit => (ybar / (1.0 - ybar)).ln(),
                LinkKind::Probit => normal.inverse_cdf(ybar),
            };
            b
        }
    };
    // Row-major copy: every pass below walks the design row by row.
    let rows: Vec<f64> = (0..n)
        .flat_map(|i| (0..k).map(move |j| w[(i, j)]))
        .collect();
    let mut eta = vec![0.0; n];
    let linear_predictor = |beta: &[f64], eta: &mut [f64]| {
        for (e, row) in eta.iter_mut().zip(rows.chunks_exact(k)) {
            *e = row.iter().zip(beta).map(|(a, b)| a * b).sum();
        }
    };
    let penalized = |beta: &[f64], eta: &[f64]| -> f64 {
        let ll: f64 = eta
            .iter()
            .zip(y)
            .map(|(&e, &yi)| eval_link(link, &normal, e, yi).loglik)
            .sum();
        let pen: f64 = (0..k)
            .filter(|&j| j != intercept)
            .map(|j| beta[j] * beta[j])
            .sum();
        ll * inv_n - penalty * pen
    };

    linear_predictor(&beta, &mut eta);
    let mut current = penalized(&beta, &eta);
    if !current.is_finite() {
        return None;
    }
    let mut hess = DMatrix::<f64>::zeros(k, k);
    let mut grad = DVector::<f64>::zeros(k);
    let mut packed = vec![0.0; k * (k + 1) / 2];
    for iter in 0..=options.max_iter {
        hess.fill(0.0);
        grad.fill(0.0);
        // Lower triangle accumulated in a packed row-major buffer.
        packed.fill(0.0);
        for (i, row) in rows.chunks_exact(k).enumerate() {
            let ev = eval_link(link, &normal, eta[i], y[i]);
            let mut off = 0;
            for r in 0..k {
                let wr = row[r];
                grad[r] += wr * ev.score;
                let wrw = wr * ev.weight;
                for (h, &wc) in packed[off..off + r + 1].iter_mut().zip(&row[..=r]) {
                    *h += wrw * wc;
                }
                off += r + 1;
            }
        }
        let mut off = 0;
        for r in 0..k {
            for c in 0..=r {
                hess[(r, c)] = packed[off + c];
            }
            off += r + 1;
        }
        for r in 0..k {
            grad[r] *= inv_n;
            for c in 0..=r {
                hess[(r, c)] *= inv_n;
                hess[(c, r)] = hess[(r, c)];
            }
            if r != intercept {
                grad[r] -= 2.0 * penalty * beta[r];
                hess[(r, r)] += 2.0 * penalty;
            }
        }
        let step = linalg::solve_spd(&hess, &grad)?;
        // Below this Newton decrement the likelihood cannot resolve further
        // progress in floating point.
        let decrement = grad.dot(&step);
        if grad.norm() < options.tolerance || decrement <= 1e-14 * (1.0 + current.abs()) {
            let fitted_probabilities = eta
                .iter()
                .map(|&e| {
                    eval_link(link, &normal, e, 0.0)
                        .prob
                        .clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
                })
                .collect();
            return Some(BinaryFit {
                link,
                coefficients: beta,
                fitted_probabilities,
                converged: true,
                penalty,
                iterations: iter,
            });
        }
        if iter == options.max_iter {
            break;
        }
        // Step halving keeps the penalized likelihood non-decreasing.
        let mut t = 1.0;
        let mut accepted = false;
        let mut trial = beta.clone();
        for _ in 0..40 {
            for j in 0..k {
                trial[j] = beta[j] + t * step[j];
            }
            linear_predictor(&trial, &mut eta);
            let value = penalized(&trial, &eta);
            if value.is_finite() && value >= current - 1e-15 * current.abs() {
                current = value;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return None;
        }
        std::mem::swap(&mut beta, &mut trial);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn intercept_only_recovers_share() {
        let n = 100;
        let w = DMatrix::from_element(n, 1, 1.0);
        let ind: Vec<bool> = (0..n).map(|i| i % 10 < 3).collect();
        for link in [LinkKind::Logit, LinkKind::Probit] {
            let fit = fit_binary(&w, &ind, link).unwrap();
            assert!(fit.converged);
            for p in &fit.fitted_probabilities {
                assert!((p - 0.3).abs() < 1e-6, "{link:?}: {p}");
            }
        }
    }

    #[test]
    fn two_cell_logit_matches_log_odds() {
        // x = 0: 40 rows with 10 ones; x = 1: 60 rows with 45 ones
        let mut rows = Vec::new();
        for i in 0..40 {
            rows.push((0.0, i < 10));
        }
        for i in 0..60 {
            rows.push((1.0, i < 45));
        }
        let w = DMatrix::from_fn(rows.len(), 2, |i, j| if j == 0 { 1.0 } else { rows[i].0 });
        let ind: Vec<bool> = rows.iter().map(|r| r.1).collect();
        let a = (10.0_f64 / 30.0).ln();
        let b = (45.0_f64 / 15.0).ln() - a;

        let exact = BinaryOptions {
            penalty: 0.0,
            ..BinaryOptions::default()
        };
        let fit = fit_binary_with(&w, &ind, LinkKind::Logit, &exact, None).unwrap();
        assert!((fit.coefficients[0] - a).abs() < 1e-6);
        assert!((fit.coefficients[1] - b).abs() < 1e-6);

        let fit = fit_binary(&w, &ind, LinkKind::Logit).unwrap();
        assert!((fit.coefficients[0] - a).abs() < 1e-4);
        assert!((fit.coefficients[1] - b).abs() < 1e-4);
    }

    #[test]
    fn separable_data_stays_finite() {
        let n = 50;
        let w = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { i as f64 / n as f64 });
        let ind: Vec<bool> = (0..n).map(|i| i >= 25).collect();
        for link in [LinkKind::Logit, LinkKind::Probit] {
            let fit = fit_binary(&w, &ind, link).unwrap();
            assert!(fit.coefficients.iter().all(|c| c.is_finite()));
            assert!(fit
                .fitted_probabilities
                .iter()
                .all(|p| *p > 0.0 && *p < 1.0));
        }
    }

    #[test]
    fn degenerate_indicator_is_clamped() {
        let n = 9;
        let w = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let fit = fit_binary(&w, &[false; 9], LinkKind::Logit).unwrap();
        assert!(fit.converged);
        assert!(fit
            .fitted_probabilities
            .iter()
            .all(|p| (p - 0.1).abs() < 1e-15));
        let fit = fit_binary(&w, &[true; 9], LinkKind::Probit).unwrap();
        assert!(fit
            .fitted_probabilities
            .iter()
            .all(|p| (p - 0.9).abs() < 1e-15));
    }

    #[test]
    fn requires_intercept() {
        let w = DMatrix::from_fn(10, 1, |i, _| i as f64);
        let ind: Vec<bool> = (0..10).map(|i| i % 2 == 0).collect();
        assert!(fit_binary(&w, &ind, LinkKind::Logit).is_err());
    }

    fn random_problem(seed: u64, n: usize) -> (DMatrix<f64>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = DMatrix::from_fn(n, 3, |_, j| {
            if j == 0 {
                1.0
            } else {
                rng.random::<f64>() * 2.0 - 1.0
            }
        });
        let ind = (0..n)
            .map(|i| {
                let eta = -0.5 + 1.2 * w[(i, 1)] - 0.8 * w[(i, 2)];
                rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp())
            })
            .collect();
        (w, ind)
    }

    #[test]
    fn logit_preserves_mean() {
        for seed in 0..5 {
            let (w, ind) = random_problem(seed, 400);
            let fit = fit_binary(&w, &ind, LinkKind::Logit).unwrap();
            let share = ind.iter().filter(|v| **v).count() as f64 / ind.len() as f64;
            let mean_p = fit.fitted_probabilities.iter().sum::<f64>() / ind.len() as f64;
            assert!((share - mean_p).abs() < 1e-4);
        }
    }

    #[test]
    fn affine_recoding_leaves_probabilities_unchanged() {
        let (w, ind) = random_problem(42, 300);
        let recoded = DMatrix::from_fn(w.nrows(), 3, |i, j| match j {
            0 => 1.0,
            1 => 3.0 * w[(i, 1)] + 2.0,
            _ => -0.5 * w[(i, 2)] + w[(i, 1)] - 1.0,
        });
        let exact = BinaryOptions {
            penalty: 0.0,
            ..BinaryOptions::default()
        };
        for (opts, tol) in [(exact, 1e-6), (BinaryOptions::default(), 1e-4)] {
            let a = fit_binary_with(&w, &ind, LinkKind::Logit, &opts, None).unwrap();
            let b = fit_binary_with(&recoded, &ind, LinkKind::Logit, &opts, None).unwrap();
            for (p, q) in a.fitted_probabilities.iter().zip(&b.fitted_probabilities) {
                assert!((p - q).abs() < tol);
            }
        }
    }

    #[test]
    fn probit_gradient_vanishes_at_optimum() {
        let (w, ind) = random_problem(7, 500);
        let fit = fit_binary(&w, &ind, LinkKind::Probit).unwrap();
        assert!(fit.converged);
        // the probit with a free intercept still roughly matches the share
        let share = ind.iter().filter(|v| **v).count() as f64 / 500.0;
        let mean_p = fit.fitted_probabilities.iter().sum::<f64>() / 500.0;
        assert!((share - mean_p).abs() < 1e-2);
    }
}
