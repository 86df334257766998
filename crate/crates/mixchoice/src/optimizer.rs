//! Multi-start coordinate-exchange search over choice designs.
//!
//! Each sweep optimizes every ingredient proportion (through a Cox-direction
//! move) and every process-variable setting of every alternative in every
//! choice set with Brent's univariate method, accepting a move only when it
//! improves the criterion by more than a relative threshold. Starts are
//! independent and run in parallel; everything is deterministic given the
//! configured seed.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::brent::brent_minimize;
use crate::criteria::{criterion_from_info, moments_matrix, CriterionKind, CriterionValue};
use crate::error::{Error, Result};
use crate::mnl::{set_information, ParameterVector};
use crate::model::{Design, DesignPoint, ModelSpec};

/// Search parameters. Defaults: 10 starts, 25 passes, relative improvement
/// threshold 1e-6, Brent tolerance 1e-4 in coordinate units, 50 Brent
/// evaluations per coordinate.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OptimizerConfig {
    #[serde(default = "default_n_starts")]
    pub n_starts: usize,
    #[serde(default = "default_max_passes")]
    pub max_passes: usize,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_brent_tol")]
    pub brent_tol: f64,
    #[serde(default = "default_brent_max_iter")]
    pub brent_max_iter: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_n_starts() -> usize {
    10
}
fn default_max_passes() -> usize {
    25
}
fn default_rel_tol() -> f64 {
    1e-6
}
fn default_brent_tol() -> f64 {
    1e-4
}
fn default_brent_max_iter() -> usize {
    50
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            n_starts: default_n_starts(),
            max_passes: default_max_passes(),
            rel_tol: default_rel_tol(),
            brent_tol: default_brent_tol(),
            brent_max_iter: default_brent_max_iter(),
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    fn validate(&self) -> Result<()> {
        if self.n_starts == 0 || self.max_passes == 0 {
            return Err(Error::InvalidArgument(
                "optimizer needs n_starts >= 1 and max_passes >= 1".into(),
            ));
        }
        if !(self.rel_tol > 0.0) || !(self.brent_tol > 0.0) {
            return Err(Error::InvalidArgument(
                "optimizer tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of one random start.
#[derive(Debug, Clone, serde::Serialize)]
pub struct StartSummary {
    pub start: usize,
    pub initial_value: f64,
    pub final_value: f64,
    pub passes: usize,
}

/// Best design across starts plus per-start bookkeeping.
#[derive(Debug, Clone)]
pub struct OptimizationReport {
    pub best_design: Design,
    pub best_value: CriterionValue,
    /// Index of the winning start (first one on ties).
    pub best_start: usize,
    pub per_start: Vec<StartSummary>,
    /// Accepted criterion values of the best start, beginning with its
    /// initial value; non-increasing by construction.
    pub trace: Vec<f64>,
}

/// One searchable coordinate of an alternative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinate {
    /// Ingredient proportion index, moved along the Cox direction.
    Mixture(usize),
    /// Process-variable index, searched over [-1, +1].
    Process(usize),
}

/// Everything a coordinate search needs besides the design itself.
pub struct ExchangeContext<'a> {
    spec: &'a ModelSpec,
    draws: &'a [ParameterVector],
    kind: CriterionKind,
    w_float: Option<DMatrix<f64>>,
    config: OptimizerConfig,
}

impl<'a> ExchangeContext<'a> {
    pub fn new(
        spec: &'a ModelSpec,
        draws: &'a [ParameterVector],
        kind: CriterionKind,
        config: OptimizerConfig,
    ) -> Result<Self> {
        config.validate()?;
        if draws.is_empty() {
            return Err(Error::InvalidArgument(
                "coordinate exchange needs at least one prior draw".into(),
            ));
        }
        for d in draws {
            if d.len() != spec.m() {
                return Err(Error::DimensionMismatch(format!(
                    "prior draw has {} entries, model expects {}",
                    d.len(),
                    spec.m()
                )));
            }
        }
        let w_float = match kind {
            CriterionKind::I => Some(moments_matrix(spec).as_float().clone()),
            CriterionKind::D => None,
        };
        Ok(ExchangeContext {
            spec,
            draws,
            kind,
            w_float,
            config,
        })
    }

    fn criterion(&self, info: &DMatrix<f64>) -> f64 {
        criterion_from_info(info, self.kind, self.w_float.as_ref())
    }
}

/// Uniform random design: mixtures from normalized exponential spacings
/// (uniform on the simplex), process settings uniform on [-1, +1].
/// Deterministic given the seed.
pub fn random_design(spec: &ModelSpec, n_sets: usize, n_alts: usize, seed: u64) -> Result<Design> {
    if n_sets == 0 || n_alts < 2 {
        return Err(Error::InvalidArgument(
            "a design needs S >= 1 choice sets and J >= 2 alternatives".into(),
        ));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut sets = Vec::with_capacity(n_sets);
    for _ in 0..n_sets {
        let mut alts = Vec::with_capacity(n_alts);
        for _ in 0..n_alts {
            alts.push(random_point(spec, &mut rng));
        }
        sets.push(alts);
    }
    Design::new(sets)
}

pub(crate) fn random_point(spec: &ModelSpec, rng: &mut ChaCha20Rng) -> DesignPoint {
    let x = loop {
        let e: Vec<f64> = (0..spec.q())
            .map(|_| -(1.0 - rng.random::<f64>()).ln())
            .collect();
        let total: f64 = e.iter().sum();
        if total > 0.0 {
            break e.into_iter().map(|v| v / total).collect::<Vec<f64>>();
        }
    };
    let z: Vec<f64> = (0..spec.r())
        .map(|_| rng.random::<f64>() * 2.0 - 1.0)
        .collect();
    DesignPoint::new(x, z).expect("constructive sampling stays in the region")
}

/// Incrementally maintained search state: per-draw information totals and
/// per-draw per-set contributions, so a candidate move only recomputes the
/// touched choice set.
struct SearchState {
    design: Design,
    expansions: Vec<Vec<DVector<f64>>>,
    /// contribs[draw][set]
    contribs: Vec<Vec<DMatrix<f64>>>,
    /// totals[draw]
    totals: Vec<DMatrix<f64>>,
    value: f64,
    trace: Vec<f64>,
}

impl SearchState {
    fn init(ctx: &ExchangeContext, design: Design) -> Result<Self> {
        design.validate_for(ctx.spec)?;
        let m = ctx.spec.m();
        let expansions: Vec<Vec<DVector<f64>>> = design
            .sets()
            .map(|set| set.iter().map(|p| ctx.spec.expand_unchecked(p)).collect())
            .collect();
        let mut contribs = Vec::with_capacity(ctx.draws.len());
        let mut totals = Vec::with_capacity(ctx.draws.len());
        for theta in ctx.draws {
            let mut per_set = Vec::with_capacity(expansions.len());
            let mut total = DMatrix::zeros(m, m);
            for set in &expansions {
                let c = set_information(set, theta);
                total += &c;
                per_set.push(c);
            }
            contribs.push(per_set);
            totals.push(total);
        }
        let value = totals
            .iter()
            .map(|info| ctx.criterion(info))
            .sum::<f64>()
            / ctx.draws.len() as f64;
        let trace = vec![value];
        Ok(SearchState {
            design,
            expansions,
            contribs,
            totals,
            value,
            trace,
        })
    }

    /// Criterion value of the design with alternative (s, j) replaced.
    fn candidate_value(&self, ctx: &ExchangeContext, s: usize, j: usize, p: &DesignPoint) -> f64 {
        let mut scratch = self.expansions[s].clone();
        scratch[j] = ctx.spec.expand_unchecked(p);
        let mut acc = 0.0;
        for (r, theta) in ctx.draws.iter().enumerate() {
            let mut info = set_information(&scratch, theta);
            info += &self.totals[r];
            info -= &self.contribs[r][s];
            acc += ctx.criterion(&info);
        }
        acc / ctx.draws.len() as f64
    }

    /// Commits a move whose value has already been evaluated.
    fn apply(&mut self, ctx: &ExchangeContext, s: usize, j: usize, p: DesignPoint, value: f64) {
        self.expansions[s][j] = ctx.spec.expand_unchecked(&p);
        for (r, theta) in ctx.draws.iter().enumerate() {
            let c = set_information(&self.expansions[s], theta);
            self.totals[r] += &c;
            self.totals[r] -= &self.contribs[r][s];
            self.contribs[r][s] = c;
        }
        self.design.replace_point(s, j, p);
        self.value = value;
        self.trace.push(value);
    }
}

fn improves(current: f64, candidate: f64, rel_tol: f64) -> bool {
    if !candidate.is_finite() {
        return false;
    }
    if !current.is_finite() {
        return true;
    }
    current - candidate > rel_tol * current.abs()
}

fn candidate_point(base: &DesignPoint, coord: Coordinate, value: f64) -> Result<DesignPoint> {
    match coord {
        Coordinate::Mixture(i) => base.with_cox_move(i, value),
        Coordinate::Process(k) => base.with_process_setting(k, value),
    }
}

/// One Brent search over a single coordinate; returns whether a move was
/// accepted.
fn exchange_step(
    ctx: &ExchangeContext,
    state: &mut SearchState,
    s: usize,
    j: usize,
    coord: Coordinate,
) -> bool {
    let base = state.design.point(s, j).clone();
    let (lo, hi) = match coord {
        Coordinate::Mixture(i) => {
            let xi = base.x()[i];
            (-xi, 1.0 - xi)
        }
        Coordinate::Process(_) => (-1.0, 1.0),
    };
    if !(lo < hi) {
        return false;
    }
    let g = |t: f64| match candidate_point(&base, coord, t) {
        Ok(p) => state.candidate_value(ctx, s, j, &p),
        Err(_) => f64::INFINITY,
    };
    let (best_t, best_g) =
        brent_minimize(g, lo, hi, ctx.config.brent_tol, ctx.config.brent_max_iter);
    if improves(state.value, best_g, ctx.config.rel_tol) {
        let p = candidate_point(&base, coord, best_t)
            .expect("accepted move stays inside the region");
        state.apply(ctx, s, j, p, best_g);
        true
    } else {
        false
    }
}

/// Optimizes one coordinate of one alternative, returning the updated design
/// and criterion value. The move is kept only if it improves the criterion
/// by more than `rel_tol` relative; otherwise the design comes back
/// unchanged.
pub fn optimize_coordinate(
    ctx: &ExchangeContext,
    design: &Design,
    s: usize,
    j: usize,
    coord: Coordinate,
) -> Result<(Design, f64)> {
    if s >= design.n_sets() || j >= design.n_alternatives() {
        return Err(Error::InvalidArgument(format!(
            "choice set {s} / alternative {j} out of range"
        )));
    }
    match coord {
        Coordinate::Mixture(i) if i >= ctx.spec.q() => {
            return Err(Error::InvalidArgument(format!(
                "mixture coordinate {i} out of range for q = {}",
                ctx.spec.q()
            )));
        }
        Coordinate::Process(k) if k >= ctx.spec.r() => {
            return Err(Error::InvalidArgument(format!(
                "process coordinate {k} out of range for r = {}",
                ctx.spec.r()
            )));
        }
        _ => {}
    }
    let mut state = SearchState::init(ctx, design.clone())?;
    exchange_step(ctx, &mut state, s, j, coord);
    Ok((state.design, state.value))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn run_start(
    ctx: &ExchangeContext,
    n_sets: usize,
    n_alts: usize,
    start: usize,
) -> Result<(SearchState, StartSummary)> {
    let seed = splitmix64(ctx.config.seed ^ splitmix64(start as u64 + 1));
    let design = random_design(ctx.spec, n_sets, n_alts, seed)?;
    let mut state = SearchState::init(ctx, design)?;
    let initial_value = state.value;
    let mut passes = 0;
    for _ in 0..ctx.config.max_passes {
        passes += 1;
        let mut any_accepted = false;
        for s in 0..n_sets {
            for j in 0..n_alts {
                for i in 0..ctx.spec.q() {
                    any_accepted |= exchange_step(ctx, &mut state, s, j, Coordinate::Mixture(i));
                }
                for k in 0..ctx.spec.r() {
                    any_accepted |= exchange_step(ctx, &mut state, s, j, Coordinate::Process(k));
                }
            }
        }
        if !any_accepted {
            break;
        }
    }
    let summary = StartSummary {
        start,
        initial_value,
        final_value: state.value,
        passes,
    };
    Ok((state, summary))
}

/// Multi-start coordinate exchange. Sweeps coordinates in the fixed order
/// (set by set, alternative by alternative, proportions then process
/// settings) until a full pass accepts no move or `max_passes` is reached,
/// and reports the best start. Bit-reproducible for a fixed configuration.
pub fn coordinate_exchange(
    spec: &ModelSpec,
    n_sets: usize,
    n_alts: usize,
    draws: &[ParameterVector],
    kind: CriterionKind,
    config: OptimizerConfig,
) -> Result<OptimizationReport> {
    let ctx = ExchangeContext::new(spec, draws, kind, config)?;
    let results: Vec<Result<(SearchState, StartSummary)>> = (0..ctx.config.n_starts)
        .into_par_iter()
        .map(|start| run_start(&ctx, n_sets, n_alts, start))
        .collect();

    let mut states = Vec::with_capacity(results.len());
    let mut per_start = Vec::with_capacity(results.len());
    for r in results {
        let (state, summary) = r?;
        per_start.push(summary);
        states.push(state);
    }

    // First strictly-smallest finite start wins, so ties break toward the
    // lowest start index.
    let mut best: Option<usize> = None;
    for (i, s) in per_start.iter().enumerate() {
        if !s.final_value.is_finite() {
            continue;
        }
        if best.is_none_or(|b| s.final_value < per_start[b].final_value) {
            best = Some(i);
        }
    }
    let best = best.ok_or(Error::AllStartsSingular)?;

    let best_state = states.swap_remove(best);
    Ok(OptimizationReport {
        best_design: best_state.design,
        best_value: CriterionValue {
            value: best_state.value,
            kind,
            bayesian: draws.len() > 1,
            draws_used: draws.len(),
        },
        best_start: best,
        per_start,
        trace: best_state.trace,
    })
}
