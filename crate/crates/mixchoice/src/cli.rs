//! Command implementations behind the `mixchoice` binary: `generate`,
//! `evaluate` and `fds`, each driven by a JSON run config.
//!
//! Exit codes are stable for scripting: 0 success, 2 input error, 3
//! numerical failure.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;

use crate::config::{load_run_config, LoadedRun};
use crate::criteria::{bayesian_criterion, moments_matrix, CriterionKind};
use crate::error::{Error, Result};
use crate::evaluation::{compare_designs, fds_curve, FdsCurve};
use crate::io::{
    comparison_csv_string, read_design_csv, write_design_csv, write_fds_csv, write_fds_svg,
    write_report_json, RunReport,
};
use crate::model::Design;
use crate::optimizer::coordinate_exchange;

/// Scalar config fields that may be overridden from the command line.
#[derive(Debug, Default, Clone)]
pub struct GenerateOverrides {
    pub seed: Option<u64>,
    pub starts: Option<usize>,
    pub passes: Option<usize>,
    pub criterion: Option<CriterionKind>,
}

fn apply_overrides(run: &mut LoadedRun, overrides: &GenerateOverrides) {
    if let Some(seed) = overrides.seed {
        run.optimizer.seed = seed;
    }
    if let Some(starts) = overrides.starts {
        run.optimizer.n_starts = starts;
    }
    if let Some(passes) = overrides.passes {
        run.optimizer.max_passes = passes;
    }
    if let Some(kind) = overrides.criterion {
        run.criterion = kind;
    }
}

/// Runs the coordinate-exchange search described by the config and writes
/// the design CSV and the report JSON.
pub fn cmd_generate(config_path: &Path, overrides: &GenerateOverrides) -> Result<()> {
    let mut run = load_run_config(config_path)?;
    apply_overrides(&mut run, overrides);
    let draws = run.draws()?;
    let clock = Instant::now();
    let report = coordinate_exchange(
        &run.spec,
        run.n_sets,
        run.n_alts,
        &draws,
        run.criterion,
        run.optimizer.clone(),
    )?;
    let wall_seconds = clock.elapsed().as_secs_f64();

    write_design_csv(&report.best_design, &run.outputs.design_csv)?;
    let json_report = RunReport {
        criterion: run.criterion.letter().to_string(),
        kind: if run.bayesian { "bayesian" } else { "local" }.to_string(),
        bayesian: run.bayesian,
        value: report.best_value.value,
        draws: report.best_value.draws_used,
        seed: run.optimizer.seed,
        starts: run.optimizer.n_starts,
        passes: report.per_start[report.best_start].passes,
        wall_seconds,
        per_start: report.per_start.clone(),
    };
    write_report_json(&json_report, &run.outputs.report_json)?;
    println!(
        "{}-criterion {} after {} starts; design -> {}, report -> {}",
        run.criterion.letter().to_uppercase(),
        report.best_value.value,
        run.optimizer.n_starts,
        run.outputs.design_csv.display(),
        run.outputs.report_json.display(),
    );
    Ok(())
}

fn json_number(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!("inf")
    }
}

/// Evaluates a stored design under the config's prior: prints D- and
/// I-values as JSON. Returns exit code 3 when a criterion is infinite.
pub fn cmd_evaluate(config_path: &Path, design_path: &Path) -> Result<u8> {
    let run = load_run_config(config_path)?;
    let design = read_design_csv(design_path, &run.spec, run.n_sets, run.n_alts)?;
    // Evaluation is Bayesian whenever the prior is a distribution.
    let draws = run.prior.materialize(run.skip)?;
    let w = moments_matrix(&run.spec);
    let d = bayesian_criterion(&run.spec, &design, &draws, CriterionKind::D, None)?;
    let i = bayesian_criterion(&run.spec, &design, &draws, CriterionKind::I, Some(&w))?;
    let out = json!({
        "design": design_path.display().to_string(),
        "d_value": json_number(d.value),
        "i_value": json_number(i.value),
        "bayesian": d.bayesian,
        "draws": d.draws_used,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    if !d.value.is_finite() || !i.value.is_finite() {
        return Ok(3);
    }
    Ok(0)
}

fn suffixed_path(base: &Path, name: &str) -> PathBuf {
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = base
        .extension()
        .map(|e| format!(".{}", e.to_string_lossy()))
        .unwrap_or_default();
    base.with_file_name(format!("{stem}_{name}{ext}"))
}

fn design_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Builds FDS curves for one or more stored designs: one CSV per design, an
/// overlaid SVG plot, and (for two or more designs) a comparison table on
/// stdout.
pub fn cmd_fds(config_path: &Path, design_paths: &[PathBuf]) -> Result<()> {
    if design_paths.is_empty() {
        return Err(Error::Config("fds needs at least one design file".into()));
    }
    let run = load_run_config(config_path)?;
    let csv_base = run.outputs.fds_csv.clone().ok_or_else(|| {
        Error::Config("the fds command needs outputs.fds_csv in the config".into())
    })?;
    let svg_path = run.outputs.fds_svg.clone().ok_or_else(|| {
        Error::Config("the fds command needs outputs.fds_svg in the config".into())
    })?;

    let mut named: Vec<(String, Design)> = Vec::with_capacity(design_paths.len());
    for path in design_paths {
        let name = design_name(path);
        if named.iter().any(|(n, _)| *n == name) {
            return Err(Error::Config(format!("duplicate design name '{name}'")));
        }
        let design = read_design_csv(path, &run.spec, run.n_sets, run.n_alts)?;
        named.push((name, design));
    }

    let draws = run.prior.materialize(run.skip)?;
    let mut curves: Vec<(String, FdsCurve)> = Vec::with_capacity(named.len());
    for (name, design) in &named {
        let curve = fds_curve(&run.spec, design, &draws, run.fds.samples, run.fds.seed)?;
        let out = if named.len() == 1 {
            csv_base.clone()
        } else {
            suffixed_path(&csv_base, name)
        };
        write_fds_csv(&curve, &out)?;
        println!("fds curve for {name} (median {}) -> {}", curve.median(), out.display());
        curves.push((name.clone(), curve));
    }
    let curve_refs: Vec<(String, &FdsCurve)> = curves
        .iter()
        .map(|(n, c)| (n.clone(), c))
        .collect();
    write_fds_svg(&curve_refs, &svg_path)?;
    println!("fds plot -> {}", svg_path.display());

    if named.len() > 1 {
        let w = moments_matrix(&run.spec);
        let rows = compare_designs(
            &run.spec,
            &named,
            &draws,
            &w,
            run.fds.samples,
            run.fds.seed,
        )?;
        print!("{}", comparison_csv_string(&rows));
    }
    Ok(())
}
