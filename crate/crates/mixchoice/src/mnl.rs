//! Multinomial-logit choice probabilities, the design information matrix,
//! and pointwise prediction variance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::spd_cholesky;
use crate::model::{Design, DesignPoint, ModelSpec};

/// Identified model coefficients, ordered like [`ModelSpec::term_table`].
pub type ParameterVector = DVector<f64>;

/// Symmetric positive-semidefinite information matrix (m x m).
pub type InfoMatrix = DMatrix<f64>;

/// Softmax over utilities with max subtraction, so utilities up to |700|
/// cannot overflow.
fn softmax(utilities: &[f64]) -> Vec<f64> {
    let max = utilities.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = utilities.iter().map(|u| (u - max).exp()).collect();
    let total: f64 = p.iter().sum();
    for v in &mut p {
        *v /= total;
    }
    p
}

/// Choice probabilities for one choice set: `p_j = exp(f_j' theta) / sum_t
/// exp(f_t' theta)`.
pub fn choice_probabilities(
    spec: &ModelSpec,
    theta: &ParameterVector,
    set: &[DesignPoint],
) -> Result<Vec<f64>> {
    if theta.len() != spec.m() {
        return Err(Error::DimensionMismatch(format!(
            "parameter vector has {} entries, model expects {}",
            theta.len(),
            spec.m()
        )));
    }
    let utilities: Vec<f64> = set
        .iter()
        .map(|p| spec.expand(p).map(|f| f.dot(theta)))
        .collect::<Result<_>>()?;
    Ok(softmax(&utilities))
}

/// Information contribution of a single choice set given the expansions of
/// its alternatives: `X' (P - p p') X` with `X` stacking the expansions as
/// rows and `P = diag(p)`.
pub(crate) fn set_information(
    expansions: &[DVector<f64>],
    theta: &ParameterVector,
) -> DMatrix<f64> {
    let j = expansions.len();
    let m = theta.len();
    let utilities: Vec<f64> = expansions.iter().map(|f| f.dot(theta)).collect();
    let p = softmax(&utilities);

    let mut x = DMatrix::zeros(j, m);
    for (row, f) in expansions.iter().enumerate() {
        x.row_mut(row).copy_from(&f.transpose());
    }
    let mut a = DMatrix::zeros(j, j);
    for t in 0..j {
        for u in 0..j {
            a[(t, u)] = if t == u {
                p[t] - p[t] * p[u]
            } else {
                -p[t] * p[u]
            };
        }
    }
    x.transpose() * a * x
}

/// Information matrix of a design: the sum over choice sets of
/// `X_s' (P_s - p_s p_s') X_s`.
pub fn information_matrix(
    spec: &ModelSpec,
    theta: &ParameterVector,
    design: &Design,
) -> Result<InfoMatrix> {
    design.validate_for(spec)?;
    if theta.len() != spec.m() {
        return Err(Error::DimensionMismatch(format!(
            "parameter vector has {} entries, model expects {}",
            theta.len(),
            spec.m()
        )));
    }
    let m = spec.m();
    let mut info = DMatrix::zeros(m, m);
    for set in design.sets() {
        let expansions: Vec<DVector<f64>> =
            set.iter().map(|p| spec.expand_unchecked(p)).collect();
        info += set_information(&expansions, theta);
    }
    Ok(info)
}

/// Prediction variance `f(p)' I^{-1} f(p)`, computed through a symmetric
/// factorization solve.
pub fn prediction_variance(
    spec: &ModelSpec,
    info: &InfoMatrix,
    p: &DesignPoint,
) -> Result<f64> {
    let f = spec.expand(p)?;
    if info.nrows() != f.len() || info.ncols() != f.len() {
        return Err(Error::DimensionMismatch(format!(
            "information matrix is {}x{}, expansion has {} entries",
            info.nrows(),
            info.ncols(),
            f.len()
        )));
    }
    let chol = spd_cholesky(info).ok_or(Error::SingularInformation)?;
    let solved = chol.solve(&f);
    Ok(f.dot(&solved))
}
