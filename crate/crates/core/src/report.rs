//! Text tables, long-format CSV and JSON documents, and radar-chart SVGs.
//!
//! Every number is written with six decimals so the CSV, JSON and SVG
//! outputs are byte-stable and agree with each other. Power-unit metrics
//! (MAE, RMSE of power) are reported in MW.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Value};
use thiserror::Error;

use crate::experiments::{CaseResult, ImprovementStat, MatrixCell, SweepOutcome, SweepResult};
use crate::metrics::{MetricReport, METRIC_NAMES};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("radar chart needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("radar chart needs at least 3 axes, got {0}")]
    TooFewAxes(usize),
    #[error("row {label:?} has {got} values for {axes} axes")]
    RaggedRow { label: String, axes: usize, got: usize },
    #[error("chart has no entries")]
    EmptyChart,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Watts to megawatts.
pub const MW: f64 = 1e-6;

/// Fixed six-decimal formatting; negative zero prints as zero.
pub fn fmt6(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

fn fmt6_opt(v: Option<f64>) -> String {
    v.map(fmt6).unwrap_or_default()
}

fn round6(v: Option<f64>) -> Value {
    match v {
        Some(x) => json!(fmt6(x).parse::<f64>().expect("formatted float parses")),
        None => Value::Null,
    }
}

/// The power-space report of a result in MW.
pub fn power_report_mw(r: &CaseResult) -> MetricReport {
    r.power.rescaled(MW)
}

/// The native report with power targets in MW.
pub fn native_report_display(r: &CaseResult) -> MetricReport {
    if r.case.targets_speed() {
        r.native.clone()
    } else {
        r.native.rescaled(MW)
    }
}

fn native_unit(r: &CaseResult) -> &'static str {
    if r.case.targets_speed() {
        "m/s"
    } else {
        "MW"
    }
}

/// Long format: one row per (case, kind, space, metric). Undefined metrics
/// are empty cells.
pub fn results_csv(results: &[CaseResult]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["case", "mode", "kind", "space", "metric", "value"])
        .expect("in-memory write");
    for r in results {
        for (space, rep) in [("native", native_report_display(r)), ("power", power_report_mw(r))] {
            for (name, v) in METRIC_NAMES.iter().zip(rep.values()) {
                w.write_record([
                    r.case.label(),
                    r.case.mode.to_string(),
                    r.kind.label().to_string(),
                    space.to_string(),
                    name.to_string(),
                    fmt6_opt(v),
                ])
                .expect("in-memory write");
            }
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

fn report_json(rep: &MetricReport, unit: &str) -> Value {
    let mut m = serde_json::Map::new();
    for (name, v) in METRIC_NAMES.iter().zip(rep.values()) {
        m.insert(name.to_string(), round6(v));
    }
    m.insert("n".into(), json!(rep.n));
    m.insert("mape_excluded".into(), json!(rep.mape_excluded));
    m.insert("unit".into(), json!(unit));
    Value::Object(m)
}

/// Nested document: per-cell metrics in both spaces, failures, and the
/// improvement statistic when available. Keys are sorted.
pub fn results_json(cells: &[MatrixCell], improvement: Option<&ImprovementStat>) -> String {
    let mut cases = Vec::new();
    let mut failures = Vec::new();
    for cell in cells {
        match &cell.outcome {
            Ok(r) => cases.push(json!({
                "case": r.case.label(),
                "mode": r.case.mode,
                "kind": r.kind.label(),
                "inputs": r.case.inputs,
                "target": r.case.target,
                "seed": r.seed,
                "best_epoch": r.model.best_epoch,
                "epochs": r.model.history.len(),
                "native": report_json(&native_report_display(r), native_unit(r)),
                "power": report_json(&power_report_mw(r), "MW"),
            })),
            Err(e) => failures.push(json!({
                "case": cell.case.label(),
                "kind": cell.kind.label(),
                "error": e.to_string(),
            })),
        }
    }
    let improvement = improvement.map(|s| {
        let one = |i: &crate::experiments::Improvement| {
            json!({
                "kind": i.kind,
                "speed_output_rmse_mw": round6(Some(i.speed_output_rmse * MW)),
                "power_output_rmse_mw": round6(Some(i.power_output_rmse * MW)),
                "speed_cases": i.speed_cases,
                "power_cases": i.power_cases,
                "percent": round6(Some(i.percent)),
            })
        };
        json!({
            "per_kind": s.per_kind.iter().map(one).collect::<Vec<_>>(),
            "pooled": one(&s.pooled),
        })
    });
    let doc = json!({
        "cases": cases,
        "failures": failures,
        "improvement": improvement,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("json value serializes");
    s.push('\n');
    s
}

/// Human-readable matrix summary in power space.
pub fn results_table(results: &[CaseResult]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<5} {:<4} {:<6} {:>10} {:>10} {:>10} {:>10} {:>9}",
        "case", "mode", "kind", "MAE(MW)", "RMSE(MW)", "MAPE(%)", "SMAPE(%)", "R2"
    );
    for r in results {
        let p = power_report_mw(r);
        let opt = |v: Option<f64>, prec: usize| v.map_or("n/a".to_string(), |x| format!("{x:.prec$}"));
        let _ = writeln!(
            out,
            "{:<5} {:<4} {:<6} {:>10.4} {:>10.4} {:>10} {:>10.3} {:>9}",
            r.case.label(),
            r.case.mode,
            r.kind.label(),
            p.mae,
            p.rmse,
            opt(p.mape, 3),
            p.smape,
            opt(p.r2, 4)
        );
    }
    out
}

pub fn sweep_csv(sweep: &SweepResult) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["past_steps".to_string(), "horizon_steps".into(), "status".into()];
    header.extend(METRIC_NAMES.iter().map(|m| m.to_string()));
    header.push("persistence_MAE".into());
    w.write_record(&header).expect("in-memory write");
    for c in &sweep.cells {
        let mut row = vec![c.past_steps.to_string(), c.horizon_steps.to_string()];
        match &c.outcome {
            SweepOutcome::Done { report, persistence } => {
                row.push("done".into());
                row.extend(report.values().into_iter().map(fmt6_opt));
                row.push(fmt6(persistence.mae));
            }
            SweepOutcome::Skipped { .. } => {
                row.push("skipped".into());
                row.extend(std::iter::repeat_n(String::new(), METRIC_NAMES.len() + 1));
            }
        }
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// Table I style grid: rows are past steps, columns horizons, cells MAE.
pub fn sweep_table(sweep: &SweepResult) -> String {
    let mut pasts: Vec<usize> = sweep.cells.iter().map(|c| c.past_steps).collect();
    let mut hors: Vec<usize> = sweep.cells.iter().map(|c| c.horizon_steps).collect();
    pasts.dedup();
    hors.sort_unstable();
    hors.dedup();
    let mut out = String::new();
    let _ = write!(out, "{:>6}", "P\\H");
    for h in &hors {
        let _ = write!(out, " {h:>10}");
    }
    out.push('\n');
    for p in &pasts {
        let _ = write!(out, "{p:>6}");
        for h in &hors {
            let cell = sweep
                .cells
                .iter()
                .find(|c| c.past_steps == *p && c.horizon_steps == *h);
            let text = match cell.map(|c| &c.outcome) {
                Some(SweepOutcome::Done { report, .. }) => format!("{:.4}", report.mae),
                Some(SweepOutcome::Skipped { .. }) => "skipped".into(),
                None => "-".into(),
            };
            let _ = write!(out, " {text:>10}");
        }
        out.push('\n');
    }
    out
}

/// One labelled metric vector to plot.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarRow {
    pub label: String,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadarEntry {
    /// Labels of every merged row, joined by `/`.
    pub label: String,
    /// Normalized to [0, 1]; larger is better.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadarChart {
    pub title: String,
    pub axes: Vec<String>,
    /// Axes on which every row had the same value; plotted at 0.5.
    pub constant_axes: Vec<bool>,
    pub entries: Vec<RadarEntry>,
}

fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => x == y || (x - y).abs() <= 1e-9 * x.abs().max(y.abs()),
        (None, None) => true,
        _ => false,
    }
}

/// Error metrics are inverted after min-max scaling; R² is not.
pub fn higher_is_better(axis: &str) -> bool {
    axis == "R2"
}

/// Per-axis min-max normalization with error axes inverted, so a larger
/// value is always better. Rows whose vectors agree to 1e-9 relative are
/// merged first. Undefined values plot at 0.
pub fn normalize_for_radar(title: &str, axes: &[&str], rows: &[RadarRow]) -> Result<RadarChart, ReportError> {
    if axes.len() < 3 {
        return Err(ReportError::TooFewAxes(axes.len()));
    }
    if rows.len() < 2 {
        return Err(ReportError::TooFewRows(rows.len()));
    }
    for r in rows {
        if r.values.len() != axes.len() {
            return Err(ReportError::RaggedRow {
                label: r.label.clone(),
                axes: axes.len(),
                got: r.values.len(),
            });
        }
    }
    let mut merged: Vec<(Vec<String>, Vec<Option<f64>>)> = Vec::new();
    for r in rows {
        match merged
            .iter_mut()
            .find(|(_, v)| v.iter().zip(&r.values).all(|(a, b)| close(*a, *b)))
        {
            Some((labels, _)) => labels.push(r.label.clone()),
            None => merged.push((vec![r.label.clone()], r.values.clone())),
        }
    }
    let mut constant_axes = Vec::with_capacity(axes.len());
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(axes.len());
    for (a, axis) in axes.iter().enumerate() {
        let defined: Vec<f64> = rows.iter().filter_map(|r| r.values[a]).collect();
        let lo = defined.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = defined.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let constant = defined.is_empty() || !(hi > lo);
        constant_axes.push(constant);
        columns.push(
            merged
                .iter()
                .map(|(_, v)| match v[a] {
                    None => 0.0,
                    Some(_) if constant => 0.5,
                    Some(x) => {
                        let t = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
                        if higher_is_better(axis) {
                            t
                        } else {
                            1.0 - t
                        }
                    }
                })
                .collect(),
        );
    }
    let entries = merged
        .iter()
        .enumerate()
        .map(|(i, (labels, _))| RadarEntry {
            label: labels.join("/"),
            values: columns.iter().map(|c| c[i]).collect(),
        })
        .collect();
    Ok(RadarChart {
        title: title.to_string(),
        axes: axes.iter().map(|s| s.to_string()).collect(),
        constant_axes,
        entries,
    })
}

/// Power-space radar over the cases of one model kind.
pub fn radar_for_kind(results: &[CaseResult], kind: &str) -> Result<RadarChart, ReportError> {
    let rows: Vec<RadarRow> = results
        .iter()
        .filter(|r| r.kind.label() == kind)
        .map(|r| RadarRow {
            label: r.case.label(),
            values: power_report_mw(r).values().to_vec(),
        })
        .collect();
    normalize_for_radar(&format!("{kind}: power-space metrics by case"), &METRIC_NAMES, &rows)
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Standalone SVG 1.1 document with fixed-precision coordinates.
pub fn render_svg(chart: &RadarChart) -> Result<String, ReportError> {
    if chart.entries.is_empty() {
        return Err(ReportError::EmptyChart);
    }
    let n = chart.axes.len();
    if n < 3 {
        return Err(ReportError::TooFewAxes(n));
    }
    let (cx, cy, radius) = (300.0, 320.0, 200.0);
    let point = |axis: usize, r: f64| -> (f64, f64) {
        let angle = -std::f64::consts::FRAC_PI_2 + std::f64::consts::TAU * axis as f64 / n as f64;
        (cx + radius * r * angle.cos(), cy + radius * r * angle.sin())
    };
    let polygon = |vals: &mut dyn Iterator<Item = f64>| -> String {
        vals.enumerate()
            .map(|(a, r)| {
                let (x, y) = point(a, r);
                format!("{},{}", fmt6(x), fmt6(y))
            })
            .collect::<Vec<_>>()
            .join(" ")
    };
    let height = 640 + 22 * chart.entries.len();
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="600" height="{height}" viewBox="0 0 600 {height}">"#
    );
    let _ = writeln!(
        s,
        r#"<text class="title" x="300" y="30" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        escape(&chart.title)
    );
    for ring in [0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(
            s,
            r##"<polygon class="ring" points="{}" fill="none" stroke="#cccccc" stroke-width="1"/>"##,
            polygon(&mut std::iter::repeat_n(ring, n))
        );
    }
    for a in 0..n {
        let (x, y) = point(a, 1.0);
        let _ = writeln!(
            s,
            r##"<line class="spoke" x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999999" stroke-width="1"/>"##,
            fmt6(cx),
            fmt6(cy),
            fmt6(x),
            fmt6(y)
        );
        let (lx, ly) = point(a, 1.12);
        let mut label = escape(&chart.axes[a]);
        if chart.constant_axes[a] {
            label.push_str(" (constant)");
        }
        let _ = writeln!(
            s,
            r#"<text class="axis-label" x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">{label}</text>"#,
            fmt6(lx),
            fmt6(ly)
        );
    }
    for (i, e) in chart.entries.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<polygon class="entry" points="{}" fill="{color}" fill-opacity="0.15" stroke="{color}" stroke-width="2"/>"#,
            polygon(&mut e.values.iter().copied())
        );
    }
    for (i, e) in chart.entries.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = 600 + 22 * i;
        let _ = writeln!(
            s,
            r#"<rect class="legend-swatch" x="40" y="{}" width="14" height="14" fill="{color}"/>"#,
            y
        );
        let _ = writeln!(
            s,
            r#"<text class="legend" x="62" y="{}" font-family="sans-serif" font-size="13">{}</text>"#,
            y + 12,
            escape(&e.label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Renders and writes `chart`. Nothing is written if rendering fails.
pub fn emit_svg(chart: &RadarChart, path: &Path) -> Result<(), ReportError> {
    let svg = render_svg(chart)?;
    std::fs::write(path, svg)?;
    Ok(())
}
