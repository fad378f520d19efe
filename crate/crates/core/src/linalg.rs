//! Small dense linear-algebra helpers shared by the estimators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Numerical rank of `x` after scaling every column to unit Euclidean norm.
///
/// Column scaling makes the rank decision independent of the units of each
/// regressor. Zero columns count as rank-deficient.
pub fn column_rank(x: &DMatrix<f64>) -> usize {
    let (rows, cols) = x.shape();
    if rows == 0 || cols == 0 {
        return 0;
    }
    let mut scaled = x.clone();
    for mut col in scaled.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    let sv = scaled.singular_values();
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    let tol = max * (rows.max(cols) as f64) * 1e-12;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Fails with [`Error::RankDeficient`] unless `x` has full column rank.
pub fn ensure_full_rank(x: &DMatrix<f64>) -> Result<()> {
    let rank = column_rank(x);
    if rank < x.ncols() {
        return Err(Error::RankDeficient {
            rank,
            columns: x.ncols(),
        });
    }
    Ok(())
}

/// Ordinary least squares coefficients of `y` on the columns of `x`.
pub fn least_squares(x: &DMatrix<f64>, y: &[f64]) -> Result<DVector<f64>> {
    if x.nrows() != y.len() {
        return Err(Error::InvalidInput(format!(
            "design has {} rows but response has {}",
            x.nrows(),
            y.len()
        )));
    }
    ensure_full_rank(x)?;
    let y = DVector::from_column_slice(y);
    let svd = x.clone().svd(true, true);
    svd.solve(&y, 1e-14)
        .map_err(|e| Error::InvalidInput(format!("least squares failed: {e}")))
}

/// Solves the symmetric positive definite system `a * x = b`, falling back to LU.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(chol) = a.clone().cholesky() {
        return Some(chol.solve(b));
    }
    a.clone().lu().solve(b)
}

/// Stacks columns (all of equal length) into a matrix.
pub fn from_columns(rows: usize, columns: &[&[f64]]) -> DMatrix<f64> {
    DMatrix::from_fn(rows, columns.len(), |i, j| columns[j][i])
}
