//! Design CSV, FDS CSV, report JSON and SVG plot serialization.
//!
//! Designs round-trip byte-identically: values are written with 12
//! significant digits, which re-parse to within the simplex ingestion
//! tolerance and re-serialize to the same bytes.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaluation::{DesignComparison, FdsCurve};
use crate::model::{Design, DesignPoint, ModelSpec};
use crate::optimizer::StartSummary;

/// 12-significant-digit decimal form used in all CSV output.
pub fn format_value(v: f64) -> String {
    // +0.0 keeps negative zero out of the output.
    format!("{:.11e}", v + 0.0)
}

fn design_header(q: usize, r: usize) -> String {
    let mut cols = vec!["choice_set".to_string(), "alternative".to_string()];
    cols.extend((1..=q).map(|i| format!("x{i}")));
    cols.extend((1..=r).map(|i| format!("z{i}")));
    cols.join(",")
}

/// Serializes a design: header `choice_set,alternative,x1..xq,z1..zr`, one
/// row per alternative.
pub fn design_csv_string(design: &Design) -> String {
    let q = design.point(0, 0).x().len();
    let r = design.point(0, 0).z().len();
    let mut out = design_header(q, r);
    out.push('\n');
    for (s, set) in design.sets().enumerate() {
        for (j, p) in set.iter().enumerate() {
            let mut fields = vec![(s + 1).to_string(), (j + 1).to_string()];
            fields.extend(p.x().iter().map(|&v| format_value(v)));
            fields.extend(p.z().iter().map(|&v| format_value(v)));
            out.push_str(&fields.join(","));
            out.push('\n');
        }
    }
    out
}

pub fn write_design_csv(design: &Design, path: &Path) -> Result<()> {
    write_text(path, &design_csv_string(design))
}

/// Parses a design CSV against the expected model and shape. Rows must be
/// ordered by choice set and alternative; proportion sums off by less than
/// the ingestion tolerance are renormalized.
pub fn read_design_csv(
    path: &Path,
    spec: &ModelSpec,
    n_sets: usize,
    n_alts: usize,
) -> Result<Design> {
    let text = fs::read_to_string(path)?;
    let name = path.display().to_string();
    let err = |line: usize, msg: String| Error::Csv {
        path: name.clone(),
        line,
        msg,
    };
    let q = spec.q();
    let r = spec.r();
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| err(1, "empty design file".into()))?;
    let expected_header = design_header(q, r);
    if header != expected_header {
        return Err(err(
            1,
            format!("header '{header}' does not match '{expected_header}'"),
        ));
    }

    let mut sets: Vec<Vec<DesignPoint>> = Vec::with_capacity(n_sets);
    let mut current: Vec<DesignPoint> = Vec::with_capacity(n_alts);
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 + q + r {
            return Err(err(
                lineno,
                format!("expected {} fields, found {}", 2 + q + r, fields.len()),
            ));
        }
        let parse_usize = |s: &str, what: &str| {
            s.parse::<usize>()
                .map_err(|_| err(lineno, format!("bad {what} '{s}'")))
        };
        let set_no = parse_usize(fields[0], "choice_set")?;
        let alt_no = parse_usize(fields[1], "alternative")?;
        let expected_set = sets.len() + 1;
        let expected_alt = current.len() + 1;
        if set_no != expected_set || alt_no != expected_alt {
            return Err(err(
                lineno,
                format!(
                    "rows out of order: expected set {expected_set} alternative {expected_alt}, found {set_no}/{alt_no}"
                ),
            ));
        }
        let mut values = Vec::with_capacity(q + r);
        for f in &fields[2..] {
            values.push(
                f.parse::<f64>()
                    .map_err(|_| err(lineno, format!("bad number '{f}'")))?,
            );
        }
        let (x, z) = values.split_at(q);
        let point = DesignPoint::new_renormalizing(x.to_vec(), z.to_vec())
            .map_err(|e| err(lineno, e.to_string()))?;
        current.push(point);
        if current.len() == n_alts {
            sets.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        return Err(err(
            text.lines().count(),
            format!(
                "last choice set has {} alternatives, expected {n_alts}",
                current.len()
            ),
        ));
    }
    if sets.len() != n_sets {
        return Err(Error::DimensionMismatch(format!(
            "{name}: design has {} choice sets, config expects {n_sets}",
            sets.len()
        )));
    }
    Design::new(sets)
}

/// FDS curve as CSV with header `fraction,avg_pred_var`.
pub fn fds_csv_string(curve: &FdsCurve) -> String {
    let mut out = String::from("fraction,avg_pred_var\n");
    for (f, v) in curve.fractions.iter().zip(&curve.variances) {
        out.push_str(&format_value(*f));
        out.push(',');
        out.push_str(&format_value(*v));
        out.push('\n');
    }
    out
}

pub fn write_fds_csv(curve: &FdsCurve, path: &Path) -> Result<()> {
    write_text(path, &fds_csv_string(curve))
}

/// Comparison table as CSV with header
/// `design,d_value,i_value,fds_min,fds_median,fds_max`.
pub fn comparison_csv_string(rows: &[DesignComparison]) -> String {
    let mut out = String::from("design,d_value,i_value,fds_min,fds_median,fds_max\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.name,
            format_value(row.d_value),
            format_value(row.i_value),
            format_value(row.fds_min),
            format_value(row.fds_median),
            format_value(row.fds_max),
        ));
    }
    out
}

/// Run report with the stable field set expected by downstream scripts.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub criterion: String,
    pub kind: String,
    pub bayesian: bool,
    pub value: f64,
    pub draws: usize,
    pub seed: u64,
    pub starts: usize,
    pub passes: usize,
    pub wall_seconds: f64,
    pub per_start: Vec<StartSummary>,
}

pub fn write_report_json(report: &RunReport, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    write_text(path, &text)
}

const SVG_COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// Overlaid FDS line plot: one polyline per design plus a legend, horizontal
/// axis the region fraction, vertical axis the averaged prediction variance.
pub fn fds_svg_string(curves: &[(String, &FdsCurve)]) -> String {
    const WIDTH: f64 = 860.0;
    const HEIGHT: f64 = 520.0;
    const LEFT: f64 = 80.0;
    const RIGHT: f64 = 30.0;
    const TOP: f64 = 30.0;
    const BOTTOM: f64 = 60.0;
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;

    let mut vmin = f64::INFINITY;
    let mut vmax = f64::NEG_INFINITY;
    for (_, c) in curves {
        vmin = vmin.min(c.min());
        vmax = vmax.max(c.max());
    }
    if !(vmax > vmin) {
        vmax = vmin + 1.0;
    }
    let pad = 0.05 * (vmax - vmin);
    let (lo, hi) = (vmin - pad, vmax + pad);
    let x_px = |f: f64| LEFT + f * plot_w;
    let y_px = |v: f64| TOP + (hi - v) / (hi - lo) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    // Axes
    svg.push_str(&format!(
        "<line x1=\"{LEFT}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        TOP + plot_h,
        LEFT + plot_w,
        TOP + plot_h
    ));
    svg.push_str(&format!(
        "<line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{}\" stroke=\"black\"/>\n",
        TOP + plot_h
    ));
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let x = x_px(f);
        svg.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"black\"/>\n",
            TOP + plot_h,
            TOP + plot_h + 6.0
        ));
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">{:.1}</text>\n",
            TOP + plot_h + 22.0,
            f
        ));
        let v = lo + f * (hi - lo);
        let y = y_px(v);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{LEFT}\" y2=\"{y}\" stroke=\"black\"/>\n",
            LEFT - 6.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"end\">{:.4}</text>\n",
            LEFT - 10.0,
            y + 4.0,
            v
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"15\" text-anchor=\"middle\">fraction of design space</text>\n",
        LEFT + plot_w / 2.0,
        HEIGHT - 14.0
    ));
    svg.push_str(&format!(
        "<text x=\"20\" y=\"{}\" font-size=\"15\" text-anchor=\"middle\" transform=\"rotate(-90 20 {})\">averaged prediction variance</text>\n",
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    ));

    // One polyline per curve, thinned to keep files small.
    for (ci, (_, curve)) in curves.iter().enumerate() {
        let color = SVG_COLORS[ci % SVG_COLORS.len()];
        let n = curve.samples;
        let stride = (n / 1200).max(1);
        let mut pts = String::new();
        for i in (0..n).step_by(stride).chain(std::iter::once(n - 1)) {
            pts.push_str(&format!(
                "{:.2},{:.2} ",
                x_px(curve.fractions[i]),
                y_px(curve.variances[i])
            ));
        }
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\" points=\"{}\"/>\n",
            pts.trim_end()
        ));
    }

    // Legend, top-left inside the plot area.
    for (ci, (name, _)) in curves.iter().enumerate() {
        let color = SVG_COLORS[ci % SVG_COLORS.len()];
        let y = TOP + 16.0 + 20.0 * ci as f64;
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"{color}\" stroke-width=\"3\" class=\"legend\"/>\n",
            LEFT + 12.0,
            LEFT + 42.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"14\" class=\"legend\">{name}</text>\n",
            LEFT + 48.0,
            y + 4.0
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn write_fds_svg(curves: &[(String, &FdsCurve)], path: &Path) -> Result<()> {
    write_text(path, &fds_svg_string(curves))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, text)?;
    Ok(())
}
