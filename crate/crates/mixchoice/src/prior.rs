//! Prior specification over the identified parameter space, the linear
//! identification transform, and deterministic Halton draws from a
//! multivariate normal prior.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mnl::ParameterVector;

/// First 50 primes, used as Halton bases in term-table order.
pub const HALTON_PRIMES: [u64; 50] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191,
    193, 197, 199, 211, 223, 227, 229,
];

/// Largest supported Halton dimension; higher dimensions are rejected
/// because plain (unscrambled) Halton columns correlate badly there.
pub const MAX_HALTON_DIM: usize = HALTON_PRIMES.len();

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorKind {
    Point,
    Normal,
}

/// Point estimate or multivariate normal prior over the identified
/// parameter space.
#[derive(Debug, Clone)]
pub struct PriorSpec {
    kind: PriorKind,
    mean: DVector<f64>,
    covariance: Option<DMatrix<f64>>,
    draws: usize,
}

impl PriorSpec {
    pub fn point(mean: DVector<f64>) -> Self {
        PriorSpec {
            kind: PriorKind::Point,
            mean,
            covariance: None,
            draws: 1,
        }
    }

    pub fn normal(mean: DVector<f64>, covariance: DMatrix<f64>, draws: usize) -> Result<Self> {
        let m = mean.len();
        if covariance.nrows() != m || covariance.ncols() != m {
            return Err(Error::DimensionMismatch(format!(
                "covariance is {}x{}, mean has {} entries",
                covariance.nrows(),
                covariance.ncols(),
                m
            )));
        }
        let asym = (&covariance - covariance.transpose()).amax();
        if asym > 1e-10 {
            return Err(Error::InvalidCovariance(format!(
                "covariance is asymmetric by {asym}"
            )));
        }
        if draws == 0 {
            return Err(Error::InvalidArgument("draw count must be positive".into()));
        }
        Ok(PriorSpec {
            kind: PriorKind::Normal,
            mean,
            covariance: Some(covariance),
            draws,
        })
    }

    pub fn kind(&self) -> PriorKind {
        self.kind
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> Option<&DMatrix<f64>> {
        self.covariance.as_ref()
    }

    pub fn draw_count(&self) -> usize {
        self.draws
    }

    /// Parameter dimension m.
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Materializes the draws this prior stands for: the mean itself for a
    /// point prior, Halton normal draws otherwise.
    pub fn materialize(&self, skip: usize) -> Result<Vec<ParameterVector>> {
        match self.kind {
            PriorKind::Point => Ok(vec![self.mean.clone()]),
            PriorKind::Normal => normal_draws(self, skip),
        }
    }
}

/// Prior over the full (unidentified) coefficient vector, one entry per
/// linear proportion term before the q-th is dropped. Dimension m + 1.
#[derive(Debug, Clone)]
pub struct UnidentifiedPrior {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub draws: usize,
}

/// Applies the identification map that replaces the first q linear
/// coefficients by the q - 1 differences against the q-th one and passes all
/// other coefficients through: means map as `T m`, covariances as `T S T'`.
pub fn identify_prior(u: &UnidentifiedPrior, q: usize) -> Result<PriorSpec> {
    let n = u.mean.len();
    if q < 2 || n <= q {
        return Err(Error::DimensionMismatch(format!(
            "unidentified prior of dimension {n} is inconsistent with q = {q}"
        )));
    }
    if u.covariance.nrows() != n || u.covariance.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "unidentified covariance is {}x{}, mean has {n} entries",
            u.covariance.nrows(),
            u.covariance.ncols()
        )));
    }
    let m = n - 1;
    let mut t = DMatrix::zeros(m, n);
    for i in 0..q - 1 {
        t[(i, i)] = 1.0;
        t[(i, q - 1)] = -1.0;
    }
    for i in q - 1..m {
        t[(i, i + 1)] = 1.0;
    }
    let mean = &t * &u.mean;
    let covariance = &t * &u.covariance * t.transpose();
    PriorSpec::normal(mean, covariance, u.draws)
}

/// Radical inverse of `index` in the given base as an exact fraction
/// (numerator, denominator). For prime bases the fraction is already in
/// lowest terms.
pub fn radical_inverse_rational(index: u64, base: u64) -> (u128, u128) {
    let mut i = index as u128;
    let b = base as u128;
    let mut num: u128 = 0;
    let mut den: u128 = 1;
    while i > 0 {
        num = num * b + i % b;
        den *= b;
        i /= b;
    }
    (num, den)
}

fn radical_inverse(index: u64, base: u64) -> f64 {
    let (num, den) = radical_inverse_rational(index, base);
    num as f64 / den as f64
}

/// Halton matrix: column d holds the radical-inverse sequence in the d-th
/// prime base, rows are entries `skip + 1 ..= skip + r`. All values lie in
/// (0, 1) and the sequence is deterministic.
pub fn halton_sequence(dim: usize, r: usize, skip: usize) -> Result<DMatrix<f64>> {
    if dim == 0 || r == 0 {
        return Err(Error::InvalidArgument(
            "halton_sequence needs dim >= 1 and R >= 1".into(),
        ));
    }
    if dim > MAX_HALTON_DIM {
        return Err(Error::UnsupportedDimension {
            dim,
            max: MAX_HALTON_DIM,
        });
    }
    Ok(DMatrix::from_fn(r, dim, |row, col| {
        radical_inverse((skip + row + 1) as u64, HALTON_PRIMES[col])
    }))
}

/// Standard normal quantile via Wichura's AS 241 (PPND16) rational
/// approximation; relative error below 1e-15 on (0, 1).
#[allow(clippy::excessive_precision)]
pub fn standard_normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile needs p in (0, 1), got {p}");
    const A: [f64; 8] = [
        3.3871328727963666080e0,
        1.3314166789178437745e2,
        1.9715909503065514427e3,
        1.3731693765509461125e4,
        4.5921953931549871457e4,
        6.7265770927008700853e4,
        3.3430575583588128105e4,
        2.5090809287301226727e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.2313330701600911252e1,
        6.8718700749205790830e2,
        5.3941960214247511077e3,
        2.1213794301586595867e4,
        3.9307895800092710610e4,
        2.8729085735721942674e4,
        5.2264952788528545610e3,
    ];
    const C: [f64; 8] = [
        1.42343711074968357734e0,
        4.63033784615654529590e0,
        5.76949722146069140550e0,
        3.64784832476320460504e0,
        1.27045825245236838258e0,
        2.41780725177450611770e-1,
        2.27238449892691845833e-2,
        7.74545014278341407640e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.05319162663775882187e0,
        1.67638483018380384940e0,
        6.89767334985100004550e-1,
        1.48103976427480074590e-1,
        1.51986665636164571966e-2,
        5.47593808499534494600e-4,
        1.05075007164441684324e-9,
    ];
    const E: [f64; 8] = [
        6.65790464350110377720e0,
        5.46378491116411436990e0,
        1.78482653991729133580e0,
        2.96560571828504891230e-1,
        2.65321895265761230930e-2,
        1.24266094738807843860e-3,
        2.71155556874348757815e-5,
        2.01033439929228813265e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.99832206555887937690e-1,
        1.36929880922735805310e-1,
        1.48753612908506148525e-2,
        7.86869131145613259100e-4,
        1.84631831751005468180e-6,
        1.42151175831644588870e-7,
        2.04426310338993978564e-15,
    ];
    fn poly(coef: &[f64; 8], r: f64) -> f64 {
        coef.iter().rev().fold(0.0, |acc, &c| acc * r + c)
    }

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-r.ln()).sqrt();
    let z = if r <= 5.0 {
        r -= 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        r -= 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -z
    } else {
        z
    }
}

/// Square-root factor of a PSD covariance: the lower-triangular Cholesky
/// factor when the matrix is positive definite, otherwise an
/// eigendecomposition square root with small negative eigenvalues clamped.
fn covariance_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(chol) = nalgebra::Cholesky::new(cov.clone()) {
        return Ok(chol.unpack());
    }
    let eig = nalgebra::SymmetricEigen::new(cov.clone());
    let tol = 1e-8 * cov.trace().abs();
    let mut sqrt_vals = DVector::zeros(cov.nrows());
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam < -tol {
            return Err(Error::InvalidCovariance(format!(
                "eigenvalue {lam} below tolerance -{tol}"
            )));
        }
        sqrt_vals[i] = lam.max(0.0).sqrt();
    }
    let mut factor = eig.eigenvectors;
    for (j, mut col) in factor.column_iter_mut().enumerate() {
        col *= sqrt_vals[j];
    }
    Ok(factor)
}

/// Deterministic draws from a normal prior: `theta_i = mean + C *
/// quantile(halton row i)` with `C` a square root of the covariance.
pub fn normal_draws(prior: &PriorSpec, skip: usize) -> Result<Vec<ParameterVector>> {
    if prior.kind() != PriorKind::Normal {
        return Err(Error::InvalidArgument(
            "normal_draws needs a normal prior".into(),
        ));
    }
    let cov = prior.covariance().expect("normal prior has a covariance");
    let factor = covariance_factor(cov)?;
    let m = prior.dim();
    let halton = halton_sequence(m, prior.draw_count(), skip)?;
    let mut draws = Vec::with_capacity(prior.draw_count());
    for row in 0..prior.draw_count() {
        let z = DVector::from_fn(m, |d, _| standard_normal_quantile(halton[(row, d)]));
        draws.push(prior.mean() + &factor * z);
    }
    Ok(draws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn radical_inverse_base_two_prefix() {
        let h = halton_sequence(1, 5, 0).unwrap();
        assert_eq!(h.column(0).iter().copied().collect::<Vec<_>>(), vec![
            0.5, 0.25, 0.75, 0.125, 0.625
        ]);
    }

    #[test]
    fn radical_inverse_base_three_prefix() {
        let h = halton_sequence(2, 4, 0).unwrap();
        let col: Vec<f64> = h.column(1).iter().copied().collect();
        assert_eq!(col, vec![1.0 / 3.0, 2.0 / 3.0, 1.0 / 9.0, 4.0 / 9.0]);
    }

    #[test]
    fn radical_inverse_rationals_are_reduced() {
        assert_eq!(radical_inverse_rational(1, 2), (1, 2));
        assert_eq!(radical_inverse_rational(4, 2), (1, 8));
        assert_eq!(radical_inverse_rational(5, 2), (5, 8));
        assert_eq!(radical_inverse_rational(3, 3), (1, 9));
        assert_eq!(radical_inverse_rational(4, 3), (4, 9));
    }

    #[test]
    fn halton_values_distinct_and_inside_unit_interval() {
        let h = halton_sequence(3, 200, 0).unwrap();
        for col in 0..3 {
            let mut vals: Vec<f64> = h.column(col).iter().copied().collect();
            assert!(vals.iter().all(|v| *v > 0.0 && *v < 1.0));
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            assert_eq!(vals.len(), 200);
        }
    }

    #[test]
    fn halton_streaming_consistency() {
        let whole = halton_sequence(4, 30, 5).unwrap();
        let first = halton_sequence(4, 12, 5).unwrap();
        let rest = halton_sequence(4, 18, 17).unwrap();
        for col in 0..4 {
            for row in 0..12 {
                assert_eq!(whole[(row, col)], first[(row, col)]);
            }
            for row in 0..18 {
                assert_eq!(whole[(12 + row, col)], rest[(row, col)]);
            }
        }
    }

    #[test]
    fn halton_rejects_unsupported_dimension() {
        assert!(matches!(
            halton_sequence(51, 4, 0),
            Err(Error::UnsupportedDimension { dim: 51, .. })
        ));
    }

    #[test]
    fn normal_quantile_matches_reference_table() {
        // Reference values from standard normal tables (15 digits).
        let table = [
            (0.001, -3.090_232_306_167_813_5),
            (0.01, -2.326_347_874_040_841),
            (0.025, -1.959_963_984_540_054_4),
            (0.05, -1.644_853_626_951_472_2),
            (0.1, -1.281_551_565_544_600_5),
            (0.25, -0.674_489_750_196_081_7),
            (0.5, 0.0),
            (0.75, 0.674_489_750_196_081_7),
            (0.9, 1.281_551_565_544_600_5),
            (0.975, 1.959_963_984_540_054_4),
            (0.999, 3.090_232_306_167_813_5),
            (1e-10, -6.361_340_902_404_056),
        ];
        for (p, z) in table {
            let got = standard_normal_quantile(p);
            if z == 0.0 {
                assert!(got.abs() < 1e-15);
            } else {
                assert_relative_eq!(got, z, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn identify_prior_fish_patty_means() {
        let mut mean = DVector::zeros(21);
        let raw = [
            2.864, 1.074, 2.003, -0.974, -0.834, 0.356, 0.376, 0.106, 0.206, 0.642, 0.2, 0.403,
            -0.078, -0.087, -0.01, 0.027, 0.001, -0.008, 0.0, 0.0, 0.0,
        ];
        for (i, v) in raw.iter().enumerate() {
            mean[i] = *v;
        }
        let u = UnidentifiedPrior {
            mean,
            covariance: DMatrix::identity(21, 21),
            draws: 128,
        };
        let prior = identify_prior(&u, 3).unwrap();
        assert_eq!(prior.dim(), 20);
        assert_relative_eq!(prior.mean()[0], 0.861, epsilon = 1e-12);
        assert_relative_eq!(prior.mean()[1], -0.929, epsilon = 1e-12);
        // Every non-linear coefficient passes through unchanged.
        for i in 2..20 {
            assert_eq!(prior.mean()[i], raw[i + 1]);
        }
    }

    #[test]
    fn identify_prior_scaled_identity_covariance_pattern() {
        let kappa = 30.0;
        let u = UnidentifiedPrior {
            mean: DVector::zeros(21),
            covariance: DMatrix::identity(21, 21) * kappa,
            draws: 8,
        };
        let prior = identify_prior(&u, 3).unwrap();
        let cov = prior.covariance().unwrap();
        let mut expected = DMatrix::identity(20, 20) * kappa;
        expected[(0, 0)] = 2.0 * kappa;
        expected[(1, 1)] = 2.0 * kappa;
        expected[(0, 1)] = kappa;
        expected[(1, 0)] = kappa;
        assert_eq!(cov, &expected);
    }

    #[test]
    fn identify_prior_two_ingredient_case() {
        // q = 2: single identified linear term gamma1 - gamma2; identity
        // covariance maps its variance to 2 kappa.
        let kappa = 0.5;
        let m_plus_1 = 3; // q = 2, r = 0 has m = 2
        let u = UnidentifiedPrior {
            mean: DVector::from_vec(vec![1.5, -0.5, 2.0]),
            covariance: DMatrix::identity(m_plus_1, m_plus_1) * kappa,
            draws: 4,
        };
        let prior = identify_prior(&u, 2).unwrap();
        assert_relative_eq!(prior.mean()[0], 2.0, epsilon = 1e-15);
        assert_relative_eq!(prior.mean()[1], 2.0, epsilon = 1e-15);
        let cov = prior.covariance().unwrap();
        assert_relative_eq!(cov[(0, 0)], 2.0 * kappa, epsilon = 1e-15);
        assert_relative_eq!(cov[(1, 1)], kappa, epsilon = 1e-15);
    }

    #[test]
    fn identify_prior_is_linear_in_the_mean() {
        let n = 9; // q = 3, r = 0: m = 5 unidentified is 6... use arbitrary sizes
        let q = 3;
        let mk = |seed: f64| {
            DVector::from_fn(n, |i, _| ((i as f64) + seed).sin())
        };
        let cov = DMatrix::identity(n, n);
        let u1 = UnidentifiedPrior { mean: mk(0.3), covariance: cov.clone(), draws: 2 };
        let u2 = UnidentifiedPrior { mean: mk(1.7), covariance: cov.clone(), draws: 2 };
        let combo = UnidentifiedPrior {
            mean: &u1.mean * 2.0 + &u2.mean * -0.5,
            covariance: cov,
            draws: 2,
        };
        let p1 = identify_prior(&u1, q).unwrap();
        let p2 = identify_prior(&u2, q).unwrap();
        let pc = identify_prior(&combo, q).unwrap();
        let expect = p1.mean() * 2.0 + p2.mean() * -0.5;
        assert_relative_eq!((pc.mean() - expect).amax(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn identified_covariance_stays_psd() {
        // Random PSD input covariance; output must stay PSD.
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(9);
        for _ in 0..10 {
            let n = 7;
            let a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
            let cov = &a * a.transpose();
            let u = UnidentifiedPrior {
                mean: DVector::zeros(n),
                covariance: cov,
                draws: 2,
            };
            let prior = identify_prior(&u, 3).unwrap();
            let eig = nalgebra::SymmetricEigen::new(prior.covariance().unwrap().clone());
            let trace = prior.covariance().unwrap().trace();
            assert!(eig
                .eigenvalues
                .iter()
                .all(|&l| l >= -1e-8 * trace.abs().max(1.0)));
        }
    }

    #[test]
    fn zero_covariance_draws_collapse_to_mean() {
        let mean = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let prior = PriorSpec::normal(mean.clone(), DMatrix::zeros(3, 3), 6).unwrap();
        for draw in normal_draws(&prior, 0).unwrap() {
            assert_eq!(draw, mean);
        }
    }

    #[test]
    fn univariate_draws_follow_the_quantile_sequence() {
        let prior = PriorSpec::normal(DVector::zeros(1), DMatrix::identity(1, 1), 2).unwrap();
        let draws = normal_draws(&prior, 0).unwrap();
        assert!(draws[0][0].abs() < 1e-15); // quantile(1/2)
        assert_relative_eq!(draws[1][0], -0.674_489_750_196_081_7, max_relative = 1e-9);
    }

    #[test]
    fn sample_mean_approaches_prior_mean() {
        let mean = DVector::from_vec(vec![1.0, 2.0]);
        let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]));
        let prior = PriorSpec::normal(mean, cov, 4096).unwrap();
        let draws = normal_draws(&prior, 0).unwrap();
        let mut acc = DVector::zeros(2);
        for d in &draws {
            acc += d;
        }
        acc /= draws.len() as f64;
        assert!((acc[0] - 1.0).abs() < 0.05, "mean[0] = {}", acc[0]);
        assert!((acc[1] - 2.0).abs() < 0.05, "mean[1] = {}", acc[1]);
    }

    #[test]
    fn normal_draws_are_reproducible() {
        let mean = DVector::from_vec(vec![0.3, -0.7, 1.1]);
        let mut cov = DMatrix::identity(3, 3) * 2.0;
        cov[(0, 1)] = 0.5;
        cov[(1, 0)] = 0.5;
        let prior = PriorSpec::normal(mean, cov, 16).unwrap();
        let a = normal_draws(&prior, 3).unwrap();
        let b = normal_draws(&prior, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_psd_covariance_is_rejected() {
        let mut cov = DMatrix::identity(2, 2);
        cov[(0, 0)] = -1.0;
        let prior = PriorSpec::normal(DVector::zeros(2), cov, 4).unwrap();
        assert!(matches!(
            normal_draws(&prior, 0),
            Err(Error::InvalidCovariance(_))
        ));
    }
}
