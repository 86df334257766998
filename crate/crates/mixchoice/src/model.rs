//! Experimental-region geometry and the identified model expansion.
//!
//! Alternatives are mixtures of `q` ingredient proportions (points on the
//! unit simplex) processed under `r` process variables coded to `[-1, +1]`.
//! The utility model combines a second-order Scheffé polynomial in the
//! proportions with mixture-by-process cross terms, process two-factor
//! interactions and process quadratics, written in the identified form that
//! drops the q-th linear proportion term.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Tolerance for the sum-to-one simplex constraint on input points.
pub const SIMPLEX_SUM_TOL: f64 = 1e-10;

/// Sum deviations below this are silently renormalized when ingesting
/// serialized designs; larger deviations are rejected.
pub const SIMPLEX_RENORM_TOL: f64 = 1e-6;

/// Identified parameter count for `q` ingredients and `r` process variables:
/// `q + q(q-1)/2 + qr + r(r-1)/2 + r - 1`.
pub fn param_count(q: usize, r: usize) -> Result<usize> {
    if q < 2 {
        return Err(Error::InvalidArgument(format!(
            "a mixture needs at least two ingredients, got q = {q}"
        )));
    }
    Ok(q + q * (q - 1) / 2 + q * r + r * r.saturating_sub(1) / 2 + r - 1)
}

/// One monomial of the model expansion: exponents of every ingredient
/// proportion and of every process variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub x_exp: Vec<u32>,
    pub z_exp: Vec<u32>,
}

impl Term {
    fn new(q: usize, r: usize) -> Self {
        Term {
            x_exp: vec![0; q],
            z_exp: vec![0; r],
        }
    }

    fn eval(&self, x: &[f64], z: &[f64]) -> f64 {
        let mut v = 1.0;
        for (xi, &e) in x.iter().zip(&self.x_exp) {
            if e > 0 {
                v *= xi.powi(e as i32);
            }
        }
        for (zi, &e) in z.iter().zip(&self.z_exp) {
            if e > 0 {
                v *= zi.powi(e as i32);
            }
        }
        v
    }
}

/// Model dimensions and the ordered monomial table of the identified
/// expansion `f(a)`.
///
/// Term order is frozen so that parameter vectors, priors, the moments
/// matrix and serialized designs all interoperate:
/// `x_1..x_{q-1}`, then all `x_i x_k` (i < k), then all `x_k z_i` grouped by
/// process variable i and ingredient k, then all `z_i z_k` (i < k), then all
/// `z_i^2`.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    q: usize,
    r: usize,
    m: usize,
    term_table: Vec<Term>,
}

impl ModelSpec {
    pub fn new(q: usize, r: usize) -> Result<Self> {
        let m = param_count(q, r)?;
        let mut table = Vec::with_capacity(m);
        // x_1 .. x_{q-1}
        for i in 0..q - 1 {
            let mut t = Term::new(q, r);
            t.x_exp[i] = 1;
            table.push(t);
        }
        // x_i x_k, i < k
        for i in 0..q - 1 {
            for k in i + 1..q {
                let mut t = Term::new(q, r);
                t.x_exp[i] = 1;
                t.x_exp[k] = 1;
                table.push(t);
            }
        }
        // x_k z_i, grouped by i then k
        for i in 0..r {
            for k in 0..q {
                let mut t = Term::new(q, r);
                t.x_exp[k] = 1;
                t.z_exp[i] = 1;
                table.push(t);
            }
        }
        // z_i z_k, i < k
        for i in 0..r.saturating_sub(1) {
            for k in i + 1..r {
                let mut t = Term::new(q, r);
                t.z_exp[i] = 1;
                t.z_exp[k] = 1;
                table.push(t);
            }
        }
        // z_i^2
        for i in 0..r {
            let mut t = Term::new(q, r);
            t.z_exp[i] = 2;
            table.push(t);
        }
        debug_assert_eq!(table.len(), m);
        Ok(ModelSpec {
            q,
            r,
            m,
            term_table: table,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// Identified parameter count m.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn term_table(&self) -> &[Term] {
        &self.term_table
    }

    /// Evaluates the identified model expansion `f(a)` at a design point.
    pub fn expand(&self, p: &DesignPoint) -> Result<DVector<f64>> {
        if p.x.len() != self.q || p.z.len() != self.r {
            return Err(Error::DimensionMismatch(format!(
                "point has {} proportions and {} process settings, model expects q = {}, r = {}",
                p.x.len(),
                p.z.len(),
                self.q,
                self.r
            )));
        }
        Ok(self.expand_unchecked(p))
    }

    pub(crate) fn expand_unchecked(&self, p: &DesignPoint) -> DVector<f64> {
        DVector::from_iterator(self.m, self.term_table.iter().map(|t| t.eval(&p.x, &p.z)))
    }
}

/// One alternative: `q` ingredient proportions on the simplex plus `r`
/// process-variable settings in `[-1, +1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoint {
    x: Vec<f64>,
    z: Vec<f64>,
}

impl DesignPoint {
    /// Validates the simplex and box constraints (sum within
    /// [`SIMPLEX_SUM_TOL`], proportions non-negative, `|z| <= 1`).
    pub fn new(x: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::InvalidArgument(
                "a mixture needs at least two ingredient proportions".into(),
            ));
        }
        let sum: f64 = x.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(Error::RegionViolation(format!(
                "ingredient proportions sum to {sum}, expected 1"
            )));
        }
        if let Some(bad) = x.iter().find(|&&v| !(v >= 0.0)) {
            return Err(Error::RegionViolation(format!(
                "negative or non-finite ingredient proportion {bad}"
            )));
        }
        if let Some(bad) = z.iter().find(|&&v| !(v.abs() <= 1.0)) {
            return Err(Error::RegionViolation(format!(
                "process setting {bad} outside [-1, +1]"
            )));
        }
        Ok(DesignPoint { x, z })
    }

    /// Ingestion constructor: renormalizes the proportion sum when the
    /// deviation is below [`SIMPLEX_RENORM_TOL`] (serialized values lose
    /// digits), otherwise defers to the strict checks.
    pub fn new_renormalizing(mut x: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        let sum: f64 = x.iter().sum();
        let dev = (sum - 1.0).abs();
        if dev > SIMPLEX_SUM_TOL && dev < SIMPLEX_RENORM_TOL {
            for v in &mut x {
                *v /= sum;
            }
        }
        DesignPoint::new(x, z)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    /// Same proportions with one process setting replaced.
    pub fn with_process_setting(&self, k: usize, value: f64) -> Result<Self> {
        if k >= self.z.len() {
            return Err(Error::InvalidArgument(format!(
                "process variable index {k} out of range"
            )));
        }
        if !(value.abs() <= 1.0) {
            return Err(Error::OutOfRange(format!(
                "process setting {value} outside [-1, +1]"
            )));
        }
        let mut z = self.z.clone();
        z[k] = value;
        Ok(DesignPoint { x: self.x.clone(), z })
    }

    /// Cox move applied to this point's mixture, process settings unchanged.
    pub fn with_cox_move(&self, i: usize, delta: f64) -> Result<Self> {
        let x = cox_move(&self.x, i, delta)?;
        Ok(DesignPoint {
            x,
            z: self.z.clone(),
        })
    }
}

/// Adjusts proportion `i` by `delta` along the Cox effect direction: the
/// remaining proportions shrink or grow proportionally, keeping the point on
/// the simplex. When `x_i = 1` the remainder is split equally.
pub fn cox_move(x: &[f64], i: usize, delta: f64) -> Result<Vec<f64>> {
    let q = x.len();
    if i >= q {
        return Err(Error::InvalidArgument(format!(
            "ingredient index {i} out of range for q = {q}"
        )));
    }
    let target = x[i] + delta;
    if !(-1e-12..=1.0 + 1e-12).contains(&target) {
        return Err(Error::OutOfRange(format!(
            "x_{} + delta = {target} outside [0, 1]",
            i + 1
        )));
    }
    let target = target.clamp(0.0, 1.0);
    let mut out = vec![0.0; q];
    if x[i] == 1.0 {
        let share = (1.0 - target) / (q as f64 - 1.0);
        for (k, o) in out.iter_mut().enumerate() {
            *o = if k == i { target } else { share };
        }
    } else {
        let factor = (1.0 - delta / (1.0 - x[i])).max(0.0);
        for (k, o) in out.iter_mut().enumerate() {
            *o = if k == i { target } else { x[k] * factor };
        }
    }
    Ok(out)
}

/// A choice design: `S` choice sets of `J` alternatives each.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    points: Vec<Vec<DesignPoint>>,
}

impl Design {
    pub fn new(points: Vec<Vec<DesignPoint>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument(
                "a design needs at least one choice set".into(),
            ));
        }
        let j = points[0].len();
        if j < 2 {
            return Err(Error::InvalidArgument(
                "a choice set needs at least two alternatives".into(),
            ));
        }
        let q = points[0][0].x().len();
        let r = points[0][0].z().len();
        for set in &points {
            if set.len() != j {
                return Err(Error::DimensionMismatch(
                    "all choice sets must hold the same number of alternatives".into(),
                ));
            }
            for p in set {
                if p.x().len() != q || p.z().len() != r {
                    return Err(Error::DimensionMismatch(
                        "all alternatives must share the same q and r".into(),
                    ));
                }
            }
        }
        Ok(Design { points })
    }

    pub fn n_sets(&self) -> usize {
        self.points.len()
    }

    pub fn n_alternatives(&self) -> usize {
        self.points[0].len()
    }

    pub fn set(&self, s: usize) -> &[DesignPoint] {
        &self.points[s]
    }

    pub fn point(&self, s: usize, j: usize) -> &DesignPoint {
        &self.points[s][j]
    }

    pub fn sets(&self) -> impl Iterator<Item = &[DesignPoint]> {
        self.points.iter().map(|s| s.as_slice())
    }

    pub(crate) fn replace_point(&mut self, s: usize, j: usize, p: DesignPoint) {
        self.points[s][j] = p;
    }

    /// Checks that every point matches the model's q and r.
    pub fn validate_for(&self, spec: &ModelSpec) -> Result<()> {
        let p = self.point(0, 0);
        if p.x().len() != spec.q() || p.z().len() != spec.r() {
            return Err(Error::DimensionMismatch(format!(
                "design has q = {}, r = {}; model expects q = {}, r = {}",
                p.x().len(),
                p.z().len(),
                spec.q(),
                spec.r()
            )));
        }
        Ok(())
    }

    /// Concatenates the choice sets of two designs over the same region.
    pub fn concat(&self, other: &Design) -> Result<Design> {
        let mut points = self.points.clone();
        points.extend(other.points.iter().cloned());
        Design::new(points)
    }
}

/// Lower bounds on the true ingredient proportions, defining a
/// pseudocomponent subregion of the simplex.
#[derive(Debug, Clone)]
pub struct IngredientBounds {
    lower: Vec<f64>,
}

impl IngredientBounds {
    pub fn new(lower: Vec<f64>) -> Result<Self> {
        if lower.iter().any(|&l| !(l >= 0.0)) {
            return Err(Error::InvalidArgument(
                "ingredient lower bounds must be non-negative".into(),
            ));
        }
        let l: f64 = lower.iter().sum();
        if l >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "lower bounds sum to {l}, must be below 1"
            )));
        }
        Ok(IngredientBounds { lower })
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    /// Sum of the lower bounds.
    pub fn total(&self) -> f64 {
        self.lower.iter().sum()
    }
}

/// Maps true ingredient proportions to pseudocomponents:
/// `x_i = (a_i - L_i) / (1 - L)`.
pub fn to_pseudocomponents(a: &[f64], bounds: &IngredientBounds) -> Result<Vec<f64>> {
    if a.len() != bounds.lower.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} proportions vs {} lower bounds",
            a.len(),
            bounds.lower.len()
        )));
    }
    let sum: f64 = a.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
        return Err(Error::RegionViolation(format!(
            "true proportions sum to {sum}, expected 1"
        )));
    }
    let l = bounds.total();
    let scale = 1.0 - l;
    a.iter()
        .zip(&bounds.lower)
        .map(|(&ai, &li)| {
            if ai < li - 1e-12 {
                Err(Error::RegionViolation(format!(
                    "proportion {ai} below its lower bound {li}"
                )))
            } else {
                Ok(((ai - li) / scale).max(0.0))
            }
        })
        .collect()
}

/// Inverse of [`to_pseudocomponents`]: `a_i = L_i + (1 - L) x_i`.
pub fn from_pseudocomponents(x: &[f64], bounds: &IngredientBounds) -> Result<Vec<f64>> {
    if x.len() != bounds.lower.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} pseudocomponents vs {} lower bounds",
            x.len(),
            bounds.lower.len()
        )));
    }
    let scale = 1.0 - bounds.total();
    Ok(x.iter()
        .zip(&bounds.lower)
        .map(|(&xi, &li)| li + scale * xi)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn point(x: &[f64], z: &[f64]) -> DesignPoint {
        DesignPoint::new(x.to_vec(), z.to_vec()).unwrap()
    }

    #[test]
    fn param_count_matches_known_models() {
        assert_eq!(param_count(3, 1).unwrap(), 9);
        assert_eq!(param_count(3, 3).unwrap(), 20);
        assert_eq!(param_count(2, 0).unwrap(), 2);
        assert!(param_count(1, 2).is_err());
    }

    #[test]
    fn expand_at_vertex_zeroes_all_products() {
        let spec = ModelSpec::new(3, 1).unwrap();
        let f = spec.expand(&point(&[1.0, 0.0, 0.0], &[0.0])).unwrap();
        assert_eq!(f.as_slice(), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn expand_last_vertex_with_process_extreme() {
        let spec = ModelSpec::new(3, 1).unwrap();
        let f = spec.expand(&point(&[0.0, 0.0, 1.0], &[1.0])).unwrap();
        assert_eq!(f.as_slice(), &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn expand_centroid() {
        let spec = ModelSpec::new(3, 1).unwrap();
        let c = 1.0 / 3.0;
        let f = spec.expand(&point(&[c, c, c], &[-1.0])).unwrap();
        let expected = [
            c,
            c,
            c * c,
            c * c,
            c * c,
            -c,
            -c,
            -c,
            1.0,
        ];
        for (got, want) in f.iter().zip(expected) {
            assert_relative_eq!(got, &want, max_relative = 1e-15);
        }
    }

    #[test]
    fn expand_entries_match_independent_monomial_evaluation() {
        // Cross-check every term against a direct product over exponents.
        let spec = ModelSpec::new(4, 2).unwrap();
        let p = point(&[0.1, 0.2, 0.3, 0.4], &[0.5, -0.25]);
        let f = spec.expand(&p).unwrap();
        for (ti, term) in spec.term_table().iter().enumerate() {
            let mut v = 1.0;
            for (k, &e) in term.x_exp.iter().enumerate() {
                for _ in 0..e {
                    v *= p.x()[k];
                }
            }
            for (l, &e) in term.z_exp.iter().enumerate() {
                for _ in 0..e {
                    v *= p.z()[l];
                }
            }
            assert_relative_eq!(f[ti], v, max_relative = 1e-14);
        }
    }

    #[test]
    fn expand_length_matches_param_count() {
        for q in 2..=6 {
            for r in 0..=4 {
                let spec = ModelSpec::new(q, r).unwrap();
                let x = vec![1.0 / q as f64; q];
                let z = vec![0.5; r];
                let f = spec.expand(&point(&x, &z)).unwrap();
                assert_eq!(f.len(), param_count(q, r).unwrap());
                assert_eq!(spec.term_table().len(), spec.m());
            }
        }
    }

    #[test]
    fn expand_rejects_dimension_mismatch() {
        let spec = ModelSpec::new(3, 1).unwrap();
        let p = point(&[0.5, 0.5], &[0.0]);
        assert!(matches!(
            spec.expand(&p),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn cox_move_from_unit_vertex_splits_remainder_equally() {
        let moved = cox_move(&[1.0, 0.0, 0.0], 0, -0.3).unwrap();
        assert_relative_eq!(moved[0], 0.7, epsilon = 1e-15);
        assert_relative_eq!(moved[1], 0.15, epsilon = 1e-15);
        assert_relative_eq!(moved[2], 0.15, epsilon = 1e-15);
    }

    #[test]
    fn cox_move_scales_other_coordinates() {
        let moved = cox_move(&[0.2, 0.5, 0.3], 0, 0.3).unwrap();
        assert_relative_eq!(moved[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(moved[1], 0.3125, epsilon = 1e-15);
        assert_relative_eq!(moved[2], 0.1875, epsilon = 1e-15);
    }

    #[test]
    fn cox_move_zero_delta_is_identity() {
        let x = [0.2, 0.5, 0.3];
        assert_eq!(cox_move(&x, 1, 0.0).unwrap(), x.to_vec());
    }

    #[test]
    fn cox_move_zero_delta_at_vertex_is_identity() {
        let x = [0.0, 1.0, 0.0];
        assert_eq!(cox_move(&x, 1, 0.0).unwrap(), x.to_vec());
    }

    #[test]
    fn cox_move_rejects_out_of_range_delta() {
        assert!(matches!(
            cox_move(&[0.2, 0.5, 0.3], 0, 0.9),
            Err(Error::OutOfRange(_))
        ));
        assert!(matches!(
            cox_move(&[0.2, 0.5, 0.3], 0, -0.3),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn pseudocomponent_vertex_case() {
        let bounds = IngredientBounds::new(vec![0.3, 0.15, 0.1]).unwrap();
        let x = to_pseudocomponents(&[0.75, 0.15, 0.10], &bounds).unwrap();
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(x[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(x[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn pseudocomponent_opposite_vertex() {
        let bounds = IngredientBounds::new(vec![0.3, 0.15, 0.1]).unwrap();
        let x = to_pseudocomponents(&[0.30, 0.15, 0.55], &bounds).unwrap();
        assert_relative_eq!(x[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(x[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(x[2], 1.0, epsilon = 1e-12);
        assert_relative_eq!(x.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pseudocomponent_centroid_roundtrip() {
        let bounds = IngredientBounds::new(vec![0.3, 0.15, 0.1]).unwrap();
        let x = to_pseudocomponents(&[0.45, 0.30, 0.25], &bounds).unwrap();
        for xi in &x {
            assert_relative_eq!(*xi, 1.0 / 3.0, epsilon = 1e-12);
        }
        let a = from_pseudocomponents(&x, &bounds).unwrap();
        assert_relative_eq!(a[0], 0.45, epsilon = 1e-12);
        assert_relative_eq!(a[1], 0.30, epsilon = 1e-12);
        assert_relative_eq!(a[2], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn pseudocomponent_rejects_bound_violation() {
        let bounds = IngredientBounds::new(vec![0.3, 0.15, 0.1]).unwrap();
        assert!(matches!(
            to_pseudocomponents(&[0.2, 0.25, 0.55], &bounds),
            Err(Error::RegionViolation(_))
        ));
    }

    #[test]
    fn bounds_reject_infeasible_lower_sum() {
        assert!(IngredientBounds::new(vec![0.6, 0.5]).is_err());
    }

    #[test]
    fn design_point_renormalizes_small_deviation_only() {
        let p = DesignPoint::new_renormalizing(vec![0.5000001, 0.5], vec![]).unwrap();
        assert_relative_eq!(p.x().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert!(DesignPoint::new_renormalizing(vec![0.6, 0.5], vec![]).is_err());
    }

    #[test]
    fn design_rejects_single_alternative_sets() {
        let p = point(&[0.5, 0.5], &[]);
        assert!(Design::new(vec![vec![p]]).is_err());
    }
}
