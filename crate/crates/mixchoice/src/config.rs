//! Run configuration: a single JSON document describing the problem
//! dimensions, the prior, the criterion, optimizer settings and output
//! paths. Priors can be inlined or referenced as separate files; priors
//! given over the unidentified coefficient space are transformed on load.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::criteria::CriterionKind;
use crate::error::{Error, Result};
use crate::mnl::ParameterVector;
use crate::model::{param_count, ModelSpec};
use crate::optimizer::OptimizerConfig;
use crate::prior::{identify_prior, PriorKind, PriorSpec, UnidentifiedPrior};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub problem: ProblemConfig,
    pub criterion: CriterionChoice,
    #[serde(default)]
    pub bayesian: bool,
    pub prior: PriorSource,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    pub outputs: OutputsConfig,
    #[serde(default)]
    pub fds: Option<FdsSettings>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub q: usize,
    pub r: usize,
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "J")]
    pub j: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum CriterionChoice {
    #[serde(rename = "d")]
    D,
    #[serde(rename = "i")]
    I,
}

impl From<CriterionChoice> for CriterionKind {
    fn from(c: CriterionChoice) -> CriterionKind {
        match c {
            CriterionChoice::D => CriterionKind::D,
            CriterionChoice::I => CriterionKind::I,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PriorSource {
    File { file: PathBuf },
    Inline(PriorFile),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
pub enum SpaceChoice {
    #[default]
    #[serde(rename = "identified")]
    Identified,
    #[serde(rename = "unidentified")]
    Unidentified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum PriorKindChoice {
    #[serde(rename = "point")]
    Point,
    #[serde(rename = "normal")]
    Normal,
}

/// Covariance in one of three forms: a full matrix, or a scaled identity
/// given as kappa and its dimension. A plain diagonal uses the separate
/// `diag` field of [`PriorFile`].
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum CovarianceSpec {
    ScaledIdentity { kappa: f64, identity_dim: usize },
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorFile {
    pub q: usize,
    pub r: usize,
    pub kind: PriorKindChoice,
    #[serde(default)]
    pub space: SpaceChoice,
    pub mean: Vec<f64>,
    #[serde(default)]
    pub covariance: Option<CovarianceSpec>,
    #[serde(default)]
    pub diag: Option<Vec<f64>>,
    #[serde(default)]
    pub draws: Option<usize>,
    #[serde(default)]
    pub skip: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    pub design_csv: PathBuf,
    pub report_json: PathBuf,
    #[serde(default)]
    pub fds_csv: Option<PathBuf>,
    #[serde(default)]
    pub fds_svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdsSettings {
    #[serde(rename = "M", default = "default_fds_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_fds_samples() -> usize {
    10_000
}

impl Default for FdsSettings {
    fn default() -> Self {
        FdsSettings {
            samples: default_fds_samples(),
            seed: 0,
        }
    }
}

/// A parsed and validated run: model, prior (already identified), optimizer
/// settings and outputs.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub spec: ModelSpec,
    pub n_sets: usize,
    pub n_alts: usize,
    pub criterion: CriterionKind,
    pub bayesian: bool,
    pub prior: PriorSpec,
    pub skip: usize,
    pub optimizer: OptimizerConfig,
    pub outputs: OutputsConfig,
    pub fds: FdsSettings,
}

impl LoadedRun {
    /// Prior draws for optimization and evaluation: Halton normal draws when
    /// the run is Bayesian, the prior mean otherwise.
    pub fn draws(&self) -> Result<Vec<ParameterVector>> {
        if self.bayesian {
            self.prior.materialize(self.skip)
        } else {
            Ok(vec![self.prior.mean().clone()])
        }
    }
}

fn build_covariance(file: &PriorFile, dim: usize) -> Result<DMatrix<f64>> {
    match (&file.covariance, &file.diag) {
        (Some(_), Some(_)) => Err(Error::Config(
            "give either 'covariance' or 'diag', not both".into(),
        )),
        (None, None) => Err(Error::Config(
            "a normal prior needs a 'covariance' or 'diag' entry".into(),
        )),
        (None, Some(d)) => {
            if d.len() != dim {
                return Err(Error::Config(format!(
                    "diag has {} entries, expected {dim}",
                    d.len()
                )));
            }
            Ok(DMatrix::from_diagonal(&DVector::from_vec(d.clone())))
        }
        (Some(CovarianceSpec::Matrix(rows)), None) => {
            if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                return Err(Error::Config(format!(
                    "covariance must be a {dim}x{dim} matrix"
                )));
            }
            Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
        }
        (Some(CovarianceSpec::ScaledIdentity { kappa, identity_dim }), None) => {
            if *identity_dim != dim {
                return Err(Error::Config(format!(
                    "identity_dim is {identity_dim}, expected {dim}"
                )));
            }
            Ok(DMatrix::identity(dim, dim) * *kappa)
        }
    }
}

/// Turns a prior document into an identified [`PriorSpec`], applying the
/// identification transform when the document is flagged as unidentified.
pub fn build_prior(file: &PriorFile) -> Result<PriorSpec> {
    let m = param_count(file.q, file.r)?;
    let expected_len = match file.space {
        SpaceChoice::Identified => m,
        SpaceChoice::Unidentified => m + 1,
    };
    if file.mean.len() != expected_len {
        return Err(Error::Config(format!(
            "prior mean has {} entries; a q={}, r={} {} prior needs {expected_len}",
            file.mean.len(),
            file.q,
            file.r,
            match file.space {
                SpaceChoice::Identified => "identified",
                SpaceChoice::Unidentified => "unidentified",
            }
        )));
    }
    let mean = DVector::from_vec(file.mean.clone());
    match file.kind {
        PriorKindChoice::Point => {
            if file.draws.unwrap_or(1) != 1 {
                return Err(Error::Config("a point prior has exactly one draw".into()));
            }
            if file.covariance.is_some() || file.diag.is_some() {
                return Err(Error::Config(
                    "a point prior does not take a covariance".into(),
                ));
            }
            match file.space {
                SpaceChoice::Identified => Ok(PriorSpec::point(mean)),
                SpaceChoice::Unidentified => {
                    let u = UnidentifiedPrior {
                        mean,
                        covariance: DMatrix::zeros(expected_len, expected_len),
                        draws: 1,
                    };
                    let identified = identify_prior(&u, file.q)?;
                    Ok(PriorSpec::point(identified.mean().clone()))
                }
            }
        }
        PriorKindChoice::Normal => {
            let draws = file.draws.ok_or_else(|| {
                Error::Config("a normal prior needs a 'draws' entry".into())
            })?;
            let covariance = build_covariance(file, expected_len)?;
            match file.space {
                SpaceChoice::Identified => PriorSpec::normal(mean, covariance, draws),
                SpaceChoice::Unidentified => identify_prior(
                    &UnidentifiedPrior {
                        mean,
                        covariance,
                        draws,
                    },
                    file.q,
                ),
            }
        }
    }
}

fn resolve_prior(source: &PriorSource, config_dir: &Path) -> Result<PriorFile> {
    match source {
        PriorSource::Inline(file) => Ok(file.clone()),
        PriorSource::File { file } => {
            let path = if file.is_absolute() {
                file.clone()
            } else {
                config_dir.join(file)
            };
            let text = fs::read_to_string(&path).map_err(|e| {
                Error::Config(format!("cannot read prior file {}: {e}", path.display()))
            })?;
            serde_json::from_str(&text).map_err(|e| {
                Error::Config(format!("prior file {}: {e}", path.display()))
            })
        }
    }
}

/// Loads and validates a run configuration. Relative prior-file references
/// resolve against the config file's directory.
pub fn load_run_config(path: &Path) -> Result<LoadedRun> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let file: RunConfigFile = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let config_dir = path.parent().unwrap_or_else(|| Path::new("."));
    validate_run_config(&file, config_dir)
}

fn validate_run_config(file: &RunConfigFile, config_dir: &Path) -> Result<LoadedRun> {
    let p = file.problem;
    if p.s < 1 || p.j < 2 {
        return Err(Error::Config(format!(
            "problem needs S >= 1 and J >= 2, got S = {}, J = {}",
            p.s, p.j
        )));
    }
    let spec = ModelSpec::new(p.q, p.r)
        .map_err(|e| Error::Config(format!("problem dimensions: {e}")))?;

    let prior_file = resolve_prior(&file.prior, config_dir)?;
    if prior_file.q != p.q || prior_file.r != p.r {
        return Err(Error::Config(format!(
            "prior is for q = {}, r = {}; problem has q = {}, r = {}",
            prior_file.q, prior_file.r, p.q, p.r
        )));
    }
    let prior = build_prior(&prior_file)?;
    if prior.dim() != spec.m() {
        return Err(Error::Config(format!(
            "prior dimension {} does not match the {}-parameter model",
            prior.dim(),
            spec.m()
        )));
    }
    if file.bayesian && prior.kind() == PriorKind::Point {
        return Err(Error::Config(
            "a Bayesian run needs a normal prior, got a point prior".into(),
        ));
    }

    Ok(LoadedRun {
        spec,
        n_sets: p.s,
        n_alts: p.j,
        criterion: file.criterion.into(),
        bayesian: file.bayesian,
        prior,
        skip: prior_file.skip,
        optimizer: file.optimizer.clone(),
        outputs: file.outputs.clone(),
        fds: file.fds.unwrap_or_default(),
    })
}
