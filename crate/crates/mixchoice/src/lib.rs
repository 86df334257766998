//! Optimal designs for discrete choice experiments whose alternatives are
//! mixtures processed under additional process variables.
//!
//! The library generates and evaluates locally and Bayesian D- and I-optimal
//! designs for the multinomial logit model over a region combining the unit
//! simplex (ingredient proportions) with a `[-1, +1]` hypercube (coded
//! process settings). Designs are constructed by a multi-start
//! coordinate-exchange search that moves mixture coordinates along the Cox
//! effect direction and optimizes each coordinate with Brent's method;
//! Bayesian criteria average over deterministic Halton draws from a normal
//! prior.
//!
//! Start from the runnable programs in `examples/`, or use the `mixchoice`
//! binary (`generate`, `evaluate`, `fds`) for config-driven runs.

pub mod brent;
pub mod cli;
pub mod config;
pub mod criteria;
pub mod error;
pub mod evaluation;
pub mod io;
mod linalg;
pub mod mnl;
pub mod model;
pub mod optimizer;
pub mod prior;

pub use brent::brent_minimize;
pub use criteria::{
    bayesian_criterion, box_moment, d_value, i_value, moments_matrix, simplex_moment,
    CriterionKind, CriterionValue, MomentsMatrix,
};
pub use error::{Error, Result};
pub use evaluation::{compare_designs, fds_curve, sample_region, DesignComparison, FdsCurve};
pub use mnl::{
    choice_probabilities, information_matrix, prediction_variance, InfoMatrix, ParameterVector,
};
pub use model::{
    cox_move, from_pseudocomponents, param_count, to_pseudocomponents, Design, DesignPoint,
    IngredientBounds, ModelSpec,
};
pub use optimizer::{
    coordinate_exchange, optimize_coordinate, random_design, Coordinate, ExchangeContext,
    OptimizationReport, OptimizerConfig, StartSummary,
};
pub use prior::{
    halton_sequence, identify_prior, normal_draws, standard_normal_quantile, PriorKind, PriorSpec,
    UnidentifiedPrior,
};
