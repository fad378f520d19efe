//! Linear quantile regression (check-loss minimization).
//!
//! The solver runs a Frisch-Newton primal-dual interior point method on the
//! dual linear program to get close to the optimum, then moves to an exact
//! basic solution (an observation subset of size `k` that the fit
//! interpolates) and finishes with simplex-type edge descent. The result is a
//! vertex of the LP, so the attained check loss is the global minimum up to
//! floating point rounding.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Check loss `u * (tau - 1{u < 0})`.
#[inline]
pub fn check_loss(u: f64, tau: f64) -> f64 {
    if u < 0.0 {
        u * (tau - 1.0)
    } else {
        u * tau
    }
}

/// Total check loss of the coefficients `b` on `(x, y)`.
pub fn objective(x: &DMatrix<f64>, y: &[f64], b: &[f64], tau: f64) -> f64 {
    (0..y.len())
        .map(|i| {
            let fit: f64 = (0..b.len()).map(|j| x[(i, j)] * b[j]).sum();
            check_loss(y[i] - fit, tau)
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QrFit {
    pub tau: f64,
    pub coefficients: Vec<f64>,
    /// Attained check loss.
    pub objective: f64,
    /// Observations interpolated by the fit (a basic solution of the LP).
    pub basis: Vec<usize>,
}

/// Minimizes `sum_t rho_tau(y_t - x_t' b)` over `b`.
///
/// Requires `T > k`, full column rank of `x` and `tau` in `(0, 1)`.
pub fn fit_qr(x: &DMatrix<f64>, y: &[f64], tau: f64) -> Result<QrFit> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidTau(tau));
    }
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::InvalidInput(format!(
            "design has {n} rows but response has {}",
            y.len()
        )));
    }
    if n <= k {
        return Err(Error::InsufficientObservations {
            rows: n,
            needed: k + 1,
        });
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite response at row {i}"
        )));
    }
    linalg::ensure_full_rank(x)?;

    let start = interior_point(x, y, tau);
    let (coefficients, basis) = vertex_descent(x, y, tau, &start)?;
    let objective = objective(x, y, &coefficients, tau);
    Ok(QrFit {
        tau,
        coefficients,
        objective,
        basis,
    })
}

fn step_bound(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(1e20, f64::min)
}

fn weighted_normal_equations(x: &DMatrix<f64>, q: &[f64], rhs: &[f64]) -> Option<DVector<f64>> {
    let (n, k) = x.shape();
    let mut a = DMatrix::<f64>::zeros(k, k);
    let mut b = DVector::<f64>::zeros(k);
    for i in 0..n {
        let qi = q[i];
        for r in 0..k {
            let xr = x[(i, r)] * qi;
            b[r] += xr * rhs[i];
            for c in 0..=r {
                a[(r, c)] += xr * x[(i, c)];
            }
        }
    }
    for r in 0..k {
        for c in 0..r {
            a[(c, r)] = a[(r, c)];
        }
    }
    linalg::solve_spd(&a, &b)
}

/// Frisch-Newton interior point on the dual problem
/// `max y'a  s.t.  X'a = (1 - tau) X'1,  0 <= a <= 1`.
/// Returns approximate primal coefficients.
fn interior_point(x: &DMatrix<f64>, y: &[f64], tau: f64) -> Vec<f64> {
    const BETA: f64 = 0.99995;
    const MAX_IT: usize = 100;
    let (n, k) = x.shape();

    let c: Vec<f64> = y.iter().map(|v| -v).collect();
    let b: Vec<f64> = (0..k).map(|j| (1.0 - tau) * x.column(j).sum()).collect();
    let scale = 1.0 + y.iter().map(|v| v.abs()).sum::<f64>();
    let eps = 1e-12 * scale;

    let mut xa = vec![1.0 - tau; n];
    let mut s: Vec<f64> = xa.iter().map(|v| 1.0 - v).collect();

    let ols = match linalg::least_squares(x, &c) {
        Ok(v) => v,
        Err(_) => return vec![0.0; k],
    };
    let mut yd: Vec<f64> = ols.iter().cloned().collect();
    let xty = |yd: &[f64], i: usize| -> f64 { (0..k).map(|j| x[(i, j)] * yd[j]).sum() };
    let mut r: Vec<f64> = (0..n).map(|i| c[i] - xty(&yd, i)).collect();
    let mean_abs = r.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
    let delta = 1e-3 * mean_abs.max(1e-8);
    let mut z: Vec<f64> = r.iter().map(|v| v.max(0.0) + delta).collect();
    let mut w: Vec<f64> = z.iter().zip(&r).map(|(zi, ri)| zi - ri).collect();

    let gap = |xa: &[f64], yd: &[f64], w: &[f64]| -> f64 {
        let cx: f64 = c.iter().zip(xa).map(|(a, b)| a * b).sum();
        let yb: f64 = yd.iter().zip(&b).map(|(a, b)| a * b).sum();
        let wu: f64 = w.iter().sum();
        cx - yb + wu
    };
    let mut g = gap(&xa, &yd, &w);
    let mut it = 0;
    let mut q = vec![0.0; n];
    let mut dx = vec![0.0; n];
    let mut ds = vec![0.0; n];
    let mut dz = vec![0.0; n];
    let mut dw = vec![0.0; n];
    while g.abs() > eps && it < MAX_IT {
        it += 1;
        for i in 0..n {
            q[i] = 1.0 / (z[i] / xa[i] + w[i] / s[i]);
            r[i] = z[i] - w[i];
        }
        let Some(dy) = weighted_normal_equations(x, &q, &r) else {
            break;
        };
        let mut dy: Vec<f64> = dy.iter().cloned().collect();
        for i in 0..n {
            dx[i] = q[i] * (xty(&dy, i) - r[i]);
            ds[i] = -dx[i];
            dz[i] = -z[i] * (dx[i] / xa[i] + 1.0);
            dw[i] = -w[i] * (ds[i] / s[i] + 1.0);
        }
        let mut fp = (BETA * step_bound(&xa, &dx).min(step_bound(&s, &ds))).min(1.0);
        let mut fd = (BETA * step_bound(&w, &dw).min(step_bound(&z, &dz))).min(1.0);
        if fp.min(fd) < 1.0 {
            // Mehrotra corrector
            let mu0: f64 = (0..n).map(|i| z[i] * xa[i] + w[i] * s[i]).sum();
            let gg: f64 = (0..n)
                .map(|i| {
                    (z[i] + fd * dz[i]) * (xa[i] + fp * dx[i])
                        + (w[i] + fd * dw[i]) * (s[i] + fp * ds[i])
                })
                .sum();
            let mu = mu0 * (gg / mu0).powi(3) / (2.0 * n as f64);
            let mut rhs = vec![0.0; n];
            let mut xi = vec![0.0; n];
            let mut dxdz = vec![0.0; n];
            let mut dsdw = vec![0.0; n];
            for i in 0..n {
                dxdz[i] = dx[i] * dz[i];
                dsdw[i] = ds[i] * dw[i];
                xi[i] = mu * (1.0 / xa[i] - 1.0 / s[i]);
                rhs[i] = r[i] + dxdz[i] - dsdw[i] - xi[i];
            }
            let Some(dy2) = weighted_normal_equations(x, &q, &rhs) else {
                break;
            };
            dy = dy2.iter().cloned().collect();
            for i in 0..n {
                dx[i] = q[i] * (xty(&dy, i) + xi[i] - r[i] - dxdz[i] + dsdw[i]);
                ds[i] = -dx[i];
                dz[i] = mu / xa[i] - z[i] - z[i] * dx[i] / xa[i] - dxdz[i];
                dw[i] = mu / s[i] - w[i] - w[i] * ds[i] / s[i] - dsdw[i];
            }
            fp = (BETA * step_bound(&xa, &dx).min(step_bound(&s, &ds))).min(1.0);
            fd = (BETA * step_bound(&w, &dw).min(step_bound(&z, &dz))).min(1.0);
        }
        for i in 0..n {
            xa[i] += fp * dx[i];
            s[i] += fp * ds[i];
            w[i] += fd * dw[i];
            z[i] += fd * dz[i];
        }
        for j in 0..k {
            yd[j] += fd * dy[j];
        }
        let g_next = gap(&xa, &yd, &w);
        if !g_next.is_finite() {
            break;
        }
        g = g_next;
    }
    yd.iter().map(|v| -v).collect()
}

/// Picks `k` linearly independent rows, preferring those listed first.
fn independent_rows(x: &DMatrix<f64>, order: &[usize]) -> Option<Vec<usize>> {
    let k = x.ncols();
    let mut basis_vecs: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut rows = Vec::with_capacity(k);
    for &i in order {
        let row = x.row(i).transpose();
        let norm = row.norm();
        if norm == 0.0 {
            continue;
        }
        let mut v = row.clone();
        for b in &basis_vecs {
            let proj = b.dot(&v);
            v -= b * proj;
        }
        let vn = v.norm();
        if vn > 1e-8 * norm {
            basis_vecs.push(v / vn);
            rows.push(i);
            if rows.len() == k {
                return Some(rows);
            }
        }
    }
    None
}

fn basis_solution(
    x: &DMatrix<f64>,
    y: &[f64],
    basis: &[usize],
) -> Option<(DMatrix<f64>, Vec<f64>)> {
    let k = x.ncols();
    let xb = DMatrix::from_fn(k, k, |i, j| x[(basis[i], j)]);
    let inv = xb.try_inverse()?;
    let yb = DVector::from_iterator(k, basis.iter().map(|&i| y[i]));
    let b = &inv * yb;
    Some((inv, b.iter().cloned().collect()))
}

/// Exact simplex-type descent over basic solutions, started from the basis
/// closest to `start`.
fn vertex_descent(
    x: &DMatrix<f64>,
    y: &[f64],
    tau: f64,
    start: &[f64],
) -> Result<(Vec<f64>, Vec<usize>)> {
    let (n, k) = x.shape();
    let fitted = |b: &[f64], i: usize| -> f64 { (0..k).map(|j| x[(i, j)] * b[j]).sum() };

    let mut order: Vec<usize> = (0..n).collect();
    let res0: Vec<f64> = (0..n).map(|i| (y[i] - fitted(start, i)).abs()).collect();
    order.sort_by(|&a, &b| res0[a].total_cmp(&res0[b]).then(a.cmp(&b)));
    let mut basis = independent_rows(x, &order).ok_or(Error::RankDeficient {
        rank: 0,
        columns: k,
    })?;

    let y_scale = 1.0 + y.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let zero_tol = 1e-11 * y_scale;
    let max_iter = 50 * n + 100;

    let mut in_basis = vec![false; n];
    let mut a = vec![0.0; n];
    let mut breaks: Vec<(f64, usize)> = Vec::with_capacity(n);

    for _ in 0..max_iter {
        let Some((inv, b)) = basis_solution(x, y, &basis) else {
            break;
        };
        in_basis.iter_mut().for_each(|v| *v = false);
        for &i in &basis {
            in_basis[i] = true;
        }
        let resid: Vec<f64> = (0..n)
            .map(|i| {
                if in_basis[i] {
                    0.0
                } else {
                    y[i] - fitted(&b, i)
                }
            })
            .collect();

        // Steepest (most negative) directional derivative over the 2k edges.
        let mut best: Option<(f64, usize, f64)> = None;
        for (j, &leaving) in basis.iter().enumerate() {
            for sign in [1.0, -1.0] {
                let dir: Vec<f64> = (0..k).map(|r| sign * inv[(r, j)]).collect();
                let mut slope = 0.0;
                for i in 0..n {
                    let ai = if in_basis[i] {
                        if i == leaving {
                            sign
                        } else {
                            0.0
                        }
                    } else {
                        fitted(&dir, i)
                    };
                    // residual moves as r_i - t a_i
                    let r = resid[i];
                    let positive_side = if r > zero_tol {
                        true
                    } else if r < -zero_tol {
                        false
                    } else {
                        -ai > 0.0
                    };
                    slope += if positive_side {
                        -ai * tau
                    } else {
                        -ai * (tau - 1.0)
                    };
                }
                let dnorm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                let rel = slope / dnorm.max(f64::MIN_POSITIVE);
                if slope < -1e-12 * y_scale.max(1.0) && best.is_none_or(|(s, _, _)| rel < s) {
                    best = Some((rel, j, sign));
                }
            }
        }
        let Some((_, j, sign)) = best else {
            return Ok((b, basis));
        };

        // Exact line search along the chosen edge.
        let leaving = basis[j];
        let dir: Vec<f64> = (0..k).map(|r| sign * inv[(r, j)]).collect();
        let mut slope = 0.0;
        breaks.clear();
        for i in 0..n {
            a[i] = if in_basis[i] {
                if i == leaving {
                    sign
                } else {
                    0.0
                }
            } else {
                fitted(&dir, i)
            };
            let r = resid[i];
            let positive_side = if r > zero_tol {
                true
            } else if r < -zero_tol {
                false
            } else {
                -a[i] > 0.0
            };
            slope += if positive_side {
                -a[i] * tau
            } else {
                -a[i] * (tau - 1.0)
            };
            if !in_basis[i] && r.abs() > zero_tol && a[i] != 0.0 {
                let t = r / a[i];
                if t > 0.0 {
                    breaks.push((t, i));
                }
            }
        }
        breaks.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
        let mut entering = None;
        for &(_, i) in breaks.iter() {
            slope += a[i].abs();
            if slope >= 0.0 {
                entering = Some(i);
                break;
            }
        }
        let Some(entering) = entering else {
            break;
        };
        let mut candidate = basis.clone();
        candidate[j] = entering;
        if basis_solution(x, y, &candidate).is_none() {
            break;
        }
        let old = objective(x, y, &b, tau);
        let new_b = basis_solution(x, y, &candidate).unwrap().1;
        if objective(x, y, &new_b, tau) > old + 1e-12 * y_scale {
            break;
        }
        basis = candidate;
    }
    let (_, b) = basis_solution(x, y, &basis).ok_or(Error::RankDeficient {
        rank: k - 1,
        columns: k,
    })?;
    Ok((b, basis))
}
