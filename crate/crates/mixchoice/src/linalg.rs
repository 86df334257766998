//! Shared dense symmetric-positive-definite factorization helpers.

use nalgebra::{Cholesky, DMatrix, Dyn};

/// Reciprocal-condition floor below which an information matrix is treated
/// as singular.
pub const RCOND_MIN: f64 = 1e-12;

/// Cholesky factorization gated by a cheap reciprocal-condition estimate.
///
/// Returns `None` when the matrix has non-finite entries, is not positive
/// definite, or the estimated reciprocal condition number
/// `(min_i L_ii / max_i L_ii)^2` falls below [`RCOND_MIN`].
pub fn spd_cholesky(a: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if a.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let chol = Cholesky::new(a.clone())?;
    let diag = chol.l_dirty().diagonal();
    let mut dmin = f64::INFINITY;
    let mut dmax = 0.0_f64;
    for d in diag.iter() {
        dmin = dmin.min(*d);
        dmax = dmax.max(*d);
    }
    let rcond = (dmin / dmax) * (dmin / dmax);
    if !rcond.is_finite() || rcond < RCOND_MIN {
        return None;
    }
    Some(chol)
}

/// Log-determinant from a Cholesky factor.
pub fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}
