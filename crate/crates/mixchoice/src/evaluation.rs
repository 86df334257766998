//! Fraction-of-design-space curves and head-to-head design comparison.
//!
//! An FDS curve samples the experimental region uniformly, averages the
//! prediction variance of each sampled point over the prior draws, sorts the
//! averages ascending, and pairs them with the fractions i/M.

use nalgebra::{Cholesky, DVector, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::criteria::{bayesian_criterion, CriterionKind, MomentsMatrix};
use crate::error::{Error, Result};
use crate::linalg::spd_cholesky;
use crate::mnl::{information_matrix, ParameterVector};
use crate::model::{Design, DesignPoint, ModelSpec};
use crate::optimizer::random_point;

/// Sorted prediction-variance curve over the region: `variances[i]` pairs
/// with `fractions[i] = (i + 1) / M`.
#[derive(Debug, Clone)]
pub struct FdsCurve {
    pub fractions: Vec<f64>,
    pub variances: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

impl FdsCurve {
    /// Curve value at fraction one half (the lower sample median).
    pub fn median(&self) -> f64 {
        self.variances[(self.samples + 1) / 2 - 1]
    }

    pub fn min(&self) -> f64 {
        self.variances[0]
    }

    pub fn max(&self) -> f64 {
        self.variances[self.samples - 1]
    }
}

/// Uniform sample of the experimental region: mixtures uniform on the
/// simplex, process settings uniform on [-1, +1]. Deterministic given the
/// seed.
pub fn sample_region(spec: &ModelSpec, samples: usize, seed: u64) -> Result<Vec<DesignPoint>> {
    if samples == 0 {
        return Err(Error::InvalidArgument(
            "region sampling needs at least one point".into(),
        ));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Ok((0..samples).map(|_| random_point(spec, &mut rng)).collect())
}

/// Per-draw factorizations of the design's information matrices; fails with
/// the offending draw index when one is singular.
fn factorize_draws(
    spec: &ModelSpec,
    design: &Design,
    draws: &[ParameterVector],
) -> Result<Vec<Cholesky<f64, Dyn>>> {
    draws
        .iter()
        .enumerate()
        .map(|(i, theta)| {
            let info = information_matrix(spec, theta, design)?;
            spd_cholesky(&info).ok_or(Error::SingularDraw { draw: i })
        })
        .collect()
}

/// Averaged prediction variance of one region point over all factorized
/// draws.
fn averaged_variance(f: &DVector<f64>, chols: &[Cholesky<f64, Dyn>]) -> f64 {
    let total: f64 = chols.iter().map(|chol| f.dot(&chol.solve(f))).sum();
    total / chols.len() as f64
}

/// Builds the FDS curve of a design: variance averaged over draws per
/// sampled point, then sorted ascending.
pub fn fds_curve(
    spec: &ModelSpec,
    design: &Design,
    draws: &[ParameterVector],
    samples: usize,
    seed: u64,
) -> Result<FdsCurve> {
    if draws.is_empty() {
        return Err(Error::InvalidArgument(
            "FDS evaluation needs at least one prior draw".into(),
        ));
    }
    let chols = factorize_draws(spec, design, draws)?;
    let points = sample_region(spec, samples, seed)?;
    let mut variances: Vec<f64> = points
        .par_iter()
        .map(|p| averaged_variance(&spec.expand_unchecked(p), &chols))
        .collect();
    variances.sort_by(f64::total_cmp);
    let fractions = (1..=samples).map(|i| i as f64 / samples as f64).collect();
    Ok(FdsCurve {
        fractions,
        variances,
        samples,
        seed,
    })
}

/// One comparison row: criterion values and FDS summary statistics.
#[derive(Debug, Clone)]
pub struct DesignComparison {
    pub name: String,
    pub d_value: f64,
    pub i_value: f64,
    pub fds_min: f64,
    pub fds_median: f64,
    pub fds_max: f64,
}

/// Head-to-head comparison of named designs under one prior: Bayesian D- and
/// I-values plus FDS min/median/max, all over the same region sample.
pub fn compare_designs(
    spec: &ModelSpec,
    designs: &[(String, Design)],
    draws: &[ParameterVector],
    w: &MomentsMatrix,
    samples: usize,
    seed: u64,
) -> Result<Vec<DesignComparison>> {
    if designs.is_empty() {
        return Err(Error::InvalidArgument("no designs to compare".into()));
    }
    for (i, (name, _)) in designs.iter().enumerate() {
        if designs[..i].iter().any(|(other, _)| other == name) {
            return Err(Error::InvalidArgument(format!(
                "duplicate design name '{name}'"
            )));
        }
    }
    designs
        .iter()
        .map(|(name, design)| {
            let d = bayesian_criterion(spec, design, draws, CriterionKind::D, None)?;
            let i = bayesian_criterion(spec, design, draws, CriterionKind::I, Some(w))?;
            let curve = fds_curve(spec, design, draws, samples, seed)?;
            Ok(DesignComparison {
                name: name.clone(),
                d_value: d.value,
                i_value: i.value,
                fds_min: curve.min(),
                fds_median: curve.median(),
                fds_max: curve.max(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::{i_value, moments_matrix};
    use crate::optimizer::random_design;
    use approx::assert_relative_eq;

    #[test]
    fn region_samples_satisfy_invariants() {
        let spec = ModelSpec::new(3, 2).unwrap();
        let pts = sample_region(&spec, 2000, 5).unwrap();
        assert_eq!(pts.len(), 2000);
        for p in &pts {
            assert_relative_eq!(p.x().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            assert!(p.z().iter().all(|&z| z.abs() <= 1.0));
        }
        assert_eq!(pts, sample_region(&spec, 2000, 5).unwrap());
    }

    #[test]
    fn region_sample_matches_dirichlet_moments() {
        let spec = ModelSpec::new(3, 1).unwrap();
        let n = 100_000;
        let pts = sample_region(&spec, n, 11).unwrap();
        let mean_x1 = pts.iter().map(|p| p.x()[0]).sum::<f64>() / n as f64;
        let mean_x2 = pts.iter().map(|p| p.x()[1]).sum::<f64>() / n as f64;
        let var_x1 = pts
            .iter()
            .map(|p| (p.x()[0] - mean_x1).powi(2))
            .sum::<f64>()
            / n as f64;
        let cov_x1x2 = pts
            .iter()
            .map(|p| (p.x()[0] - mean_x1) * (p.x()[1] - mean_x2))
            .sum::<f64>()
            / n as f64;
        // Dirichlet(1,1,1): Var(x_i) = 1/18, Cov(x_i, x_j) = -1/36.
        assert!((var_x1 - 1.0 / 18.0).abs() / (1.0 / 18.0) < 0.1, "var {var_x1}");
        assert!(
            (cov_x1x2 + 1.0 / 36.0).abs() / (1.0 / 36.0) < 0.1,
            "cov {cov_x1x2}"
        );
        let mean_z = pts.iter().map(|p| p.z()[0]).sum::<f64>() / n as f64;
        assert!(mean_z.abs() < 0.01, "mean z = {mean_z}");
    }

    #[test]
    fn curve_is_sorted_total_and_median_is_the_sample_median() {
        let spec = ModelSpec::new(3, 1).unwrap();
        let design = random_design(&spec, 15, 2, 2).unwrap();
        let draws = vec![DVector::zeros(9)];
        let m = 501;
        let curve = fds_curve(&spec, &design, &draws, m, 77).unwrap();
        assert_eq!(curve.variances.len(), m);
        assert_eq!(curve.fractions.len(), m);
        assert!(curve.variances.windows(2).all(|w| w[0] <= w[1]));
        assert_relative_eq!(curve.fractions[m - 1], 1.0, epsilon = 1e-15);
        assert_relative_eq!(curve.fractions[0], 1.0 / m as f64, epsilon = 1e-15);

        // Median from the definition: recompute unsorted variances.
        let chols = factorize_draws(&spec, &design, &draws).unwrap();
        let mut unsorted: Vec<f64> = sample_region(&spec, m, 77)
            .unwrap()
            .iter()
            .map(|p| averaged_variance(&spec.expand(p).unwrap(), &chols))
            .collect();
        unsorted.sort_by(f64::total_cmp);
        assert_eq!(curve.median(), unsorted[(m + 1) / 2 - 1]);
    }

    #[test]
    fn mean_sampled_variance_matches_trace_identity() {
        // For a single draw, E[f' I^-1 f] over the region equals
        // tr(I^-1 W) / vol with vol = 2^r / (q-1)!.
        for (q, r) in [(3usize, 1usize), (3, 2)] {
            let spec = ModelSpec::new(q, r).unwrap();
            let design = random_design(&spec, 4 * spec.m(), 2, 31).unwrap();
            let theta = DVector::zeros(spec.m());
            let info = information_matrix(&spec, &theta, &design).unwrap();
            let w = moments_matrix(&spec);
            let trace = i_value(&info, &w);

            let chols = factorize_draws(&spec, &design, &[theta]).unwrap();
            let n = 400_000;
            let pts = sample_region(&spec, n, 13).unwrap();
            let mean: f64 = pts
                .iter()
                .map(|p| averaged_variance(&spec.expand(p).unwrap(), &chols))
                .sum::<f64>()
                / n as f64;
            let mut volume = 2.0_f64.powi(r as i32);
            for k in 2..q {
                volume /= k as f64;
            }
            let expected = trace / volume;
            assert!(
                (mean - expected).abs() / expected < 0.01,
                "(q={q}, r={r}) mean {mean} vs tr/vol {expected}"
            );
        }
    }

    #[test]
    fn medians_stable_across_disjoint_seeds() {
        let spec = ModelSpec::new(3, 1).unwrap();
        let design = random_design(&spec, 20, 2, 8).unwrap();
        let draws = vec![DVector::zeros(9)];
        let m = 4000;
        let a = fds_curve(&spec, &design, &draws, m, 100).unwrap();
        let b = fds_curve(&spec, &design, &draws, m, 200).unwrap();

        // Bootstrap standard error of each median.
        let boot_se = |curve: &FdsCurve, seed: u64| {
            use rand::Rng;
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let reps = 200;
            let mut medians = Vec::with_capacity(reps);
            for _ in 0..reps {
                let mut resample: Vec<f64> = (0..m)
                    .map(|_| curve.variances[rng.random_range(0..m)])
                    .collect();
                resample.sort_by(f64::total_cmp);
                medians.push(resample[(m + 1) / 2 - 1]);
            }
            let mean = medians.iter().sum::<f64>() / reps as f64;
            (medians.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / reps as f64).sqrt()
        };
        let se = (boot_se(&a, 1).powi(2) + boot_se(&b, 2).powi(2)).sqrt();
        assert!(
            (a.median() - b.median()).abs() < 3.0 * se,
            "medians {} vs {} (combined se {se})",
            a.median(),
            b.median()
        );
    }

    #[test]
    fn singular_draw_is_reported_with_its_index() {
        let spec = ModelSpec::new(3, 1).unwrap();
        let design = random_design(&spec, 12, 2, 2).unwrap();
        // Second draw has utilities so extreme that every choice is
        // saturated and the information matrix collapses.
        let draws = vec![DVector::zeros(9), DVector::from_element(9, 800.0)];
        match fds_curve(&spec, &design, &draws, 100, 4) {
            Err(Error::SingularDraw { draw }) => assert_eq!(draw, 1),
            other => panic!("expected singular draw error, got {other:?}"),
        }
    }

    #[test]
    fn comparison_of_a_design_with_itself_yields_identical_rows() {
        let spec = ModelSpec::new(3, 1).unwrap();
        let design = random_design(&spec, 15, 2, 6).unwrap();
        let draws = vec![DVector::zeros(9)];
        let w = moments_matrix(&spec);
        let rows = compare_designs(
            &spec,
            &[
                ("a".to_string(), design.clone()),
                ("b".to_string(), design),
            ],
            &draws,
            &w,
            500,
            3,
        )
        .unwrap();
        assert_eq!(rows[0].d_value, rows[1].d_value);
        assert_eq!(rows[0].i_value, rows[1].i_value);
        assert_eq!(rows[0].fds_median, rows[1].fds_median);
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let spec = ModelSpec::new(3, 1).unwrap();
        let design = random_design(&spec, 15, 2, 6).unwrap();
        let draws = vec![DVector::zeros(9)];
        let w = moments_matrix(&spec);
        assert!(matches!(
            compare_designs(
                &spec,
                &[
                    ("same".to_string(), design.clone()),
                    ("same".to_string(), design),
                ],
                &draws,
                &w,
                100,
                3,
            ),
            Err(Error::InvalidArgument(_))
        ));
    }
}
