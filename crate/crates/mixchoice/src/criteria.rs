//! Moments matrix over the experimental region, D- and I-criterion values,
//! and their averages over prior draws.
//!
//! Both criteria are "lower is better". Singular information matrices map to
//! `+inf` so searches can reject the corresponding moves uniformly instead of
//! handling errors.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{log_det, spd_cholesky};
use crate::mnl::{set_information, InfoMatrix, ParameterVector};
use crate::model::{Design, ModelSpec};

/// Which optimality criterion to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriterionKind {
    /// Generalized variance of the parameter estimators:
    /// `det(I^{-1})^{1/m}`.
    D,
    /// Region-averaged variance of the predicted utility: `tr(I^{-1} W)`.
    I,
}

impl CriterionKind {
    pub fn letter(&self) -> &'static str {
        match self {
            CriterionKind::D => "d",
            CriterionKind::I => "i",
        }
    }
}

/// Evaluated criterion, `+inf` when any contributing information matrix was
/// singular.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriterionValue {
    pub value: f64,
    pub kind: CriterionKind,
    pub bayesian: bool,
    pub draws_used: usize,
}

fn factorial(n: u32) -> BigInt {
    let mut acc = BigInt::one();
    for k in 2..=u64::from(n) {
        acc *= k;
    }
    acc
}

/// Moment of a mixture monomial over the unit simplex:
/// `prod_k n_k! / (q - 1 + sum_k n_k)!`, exact.
pub fn simplex_moment(n: &[u32]) -> Result<BigRational> {
    let q = n.len();
    if q < 2 {
        return Err(Error::InvalidArgument(format!(
            "simplex moment needs q >= 2 exponents, got {q}"
        )));
    }
    let total: u32 = n.iter().sum();
    let numer = n.iter().fold(BigInt::one(), |acc, &e| acc * factorial(e));
    let denom = factorial(q as u32 - 1 + total);
    Ok(BigRational::new(numer, denom))
}

/// Moment of a process monomial over the `[-1, +1]^r` hypercube:
/// `prod_l (1^{m_l+1} - (-1)^{m_l+1}) / (m_l + 1)`. Any odd exponent forces
/// zero; the empty product (r = 0) is one.
pub fn box_moment(m_exp: &[u32]) -> BigRational {
    let mut acc = BigRational::one();
    for &e in m_exp {
        if e % 2 == 1 {
            return BigRational::zero();
        }
        acc *= BigRational::new(BigInt::from(2), BigInt::from(e + 1));
    }
    acc
}

/// Exact region-moments matrix `W = integral of f f' over the region`,
/// depending only on the model dimensions.
#[derive(Debug, Clone)]
pub struct MomentsMatrix {
    m: usize,
    rationals: Vec<BigRational>,
    floats: DMatrix<f64>,
}

impl MomentsMatrix {
    pub fn m(&self) -> usize {
        self.m
    }

    /// Exact entry, row-major indexing.
    pub fn rational(&self, i: usize, j: usize) -> &BigRational {
        &self.rationals[i * self.m + j]
    }

    /// Floating-point view, converted from the exact entries once.
    pub fn as_float(&self) -> &DMatrix<f64> {
        &self.floats
    }

    /// Exact trace.
    pub fn trace_rational(&self) -> BigRational {
        (0..self.m).map(|i| self.rational(i, i).clone()).sum()
    }
}

/// Builds the moments matrix for a model: the (i, j) entry multiplies the
/// box moment and the simplex moment of the product monomial `term_i *
/// term_j` (exponents add).
pub fn moments_matrix(spec: &ModelSpec) -> MomentsMatrix {
    let m = spec.m();
    let terms = spec.term_table();
    let mut rationals = vec![BigRational::zero(); m * m];
    for i in 0..m {
        for j in i..m {
            let x_exp: Vec<u32> = terms[i]
                .x_exp
                .iter()
                .zip(&terms[j].x_exp)
                .map(|(a, b)| a + b)
                .collect();
            let z_exp: Vec<u32> = terms[i]
                .z_exp
                .iter()
                .zip(&terms[j].z_exp)
                .map(|(a, b)| a + b)
                .collect();
            let w = box_moment(&z_exp) * simplex_moment(&x_exp).expect("q >= 2 by construction");
            rationals[i * m + j] = w.clone();
            rationals[j * m + i] = w;
        }
    }
    let floats = DMatrix::from_fn(m, m, |i, j| {
        rationals[i * m + j].to_f64().expect("moment fits in f64")
    });
    MomentsMatrix {
        m,
        rationals,
        floats,
    }
}

/// D-criterion `det(I^{-1})^{1/m} = exp(-logdet(I)/m)` via the factorization
/// log-determinant; `+inf` when the information matrix is singular.
pub fn d_value(info: &InfoMatrix, m: usize) -> f64 {
    debug_assert_eq!(info.nrows(), m);
    match spd_cholesky(info) {
        Some(chol) => (-log_det(&chol) / m as f64).exp(),
        None => f64::INFINITY,
    }
}

/// I-criterion `tr(I^{-1} W)` via a factorization solve of W's columns;
/// `+inf` when the information matrix is singular.
pub fn i_value(info: &InfoMatrix, w: &MomentsMatrix) -> f64 {
    i_value_float(info, w.as_float())
}

pub(crate) fn i_value_float(info: &InfoMatrix, w: &DMatrix<f64>) -> f64 {
    match spd_cholesky(info) {
        Some(chol) => {
            let mut solved = w.clone();
            chol.solve_mut(&mut solved);
            solved.trace()
        }
        None => f64::INFINITY,
    }
}

pub(crate) fn criterion_from_info(
    info: &InfoMatrix,
    kind: CriterionKind,
    w: Option<&DMatrix<f64>>,
) -> f64 {
    match kind {
        CriterionKind::D => d_value(info, info.nrows()),
        CriterionKind::I => i_value_float(info, w.expect("W required for the I-criterion")),
    }
}

/// Criterion averaged over prior draws: `(1/R) sum_i criterion(I(design,
/// theta_i))`. A single draw reduces to the local criterion; any singular
/// draw makes the whole value `+inf`.
///
/// Per-draw terms are evaluated in parallel but reduced in draw order, so the
/// result is bit-reproducible.
pub fn bayesian_criterion(
    spec: &ModelSpec,
    design: &Design,
    draws: &[ParameterVector],
    kind: CriterionKind,
    w: Option<&MomentsMatrix>,
) -> Result<CriterionValue> {
    if draws.is_empty() {
        return Err(Error::InvalidArgument(
            "criterion needs at least one prior draw".into(),
        ));
    }
    if kind == CriterionKind::I && w.is_none() {
        return Err(Error::InvalidArgument(
            "the I-criterion needs a moments matrix".into(),
        ));
    }
    design.validate_for(spec)?;
    for d in draws {
        if d.len() != spec.m() {
            return Err(Error::DimensionMismatch(format!(
                "prior draw has {} entries, model expects {}",
                d.len(),
                spec.m()
            )));
        }
    }
    let expansions: Vec<Vec<DVector<f64>>> = design
        .sets()
        .map(|set| set.iter().map(|p| spec.expand_unchecked(p)).collect())
        .collect();
    let w_float = w.map(|w| w.as_float());
    let per_draw: Vec<f64> = draws
        .par_iter()
        .map(|theta| {
            let m = spec.m();
            let mut info = DMatrix::zeros(m, m);
            for set in &expansions {
                info += set_information(set, theta);
            }
            criterion_from_info(&info, kind, w_float)
        })
        .collect();
    let value = per_draw.iter().sum::<f64>() / draws.len() as f64;
    Ok(CriterionValue {
        value,
        kind,
        bayesian: draws.len() > 1,
        draws_used: draws.len(),
    })
}
