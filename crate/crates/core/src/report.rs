//! Rendering of metric reports as JSON and as plain-text tables.
//!
//! Tables print percentages with exactly two decimals, impact rows first and
//! quality rows second.

use std::fmt::Write as _;

use serde::Serialize;

use crate::judgement::EstimateReport;
use crate::metrics::MetricsReport;
use crate::numeric::format_percent;

/// Stable metric names, in table order.
pub const IMPACT_ROWS: [&str; 3] = ["JaccardDistance", "SplitRate", "MergeRate"];
pub const QUALITY_ROWS: [&str; 7] = [
    "GoodSplitRate",
    "BadSplitRate",
    "GoodMergeRate",
    "BadMergeRate",
    "DeltaPrecision",
    "DeltaRecall",
    "IQ",
];

/// Display label of a metric name.
pub fn label(name: &str) -> &str {
    match name {
        "DeltaPrecision" => "ΔPrecision",
        "DeltaRecall" => "ΔRecall",
        other => other,
    }
}

/// Every reported metric as `(name, fraction)`, in table order. Quality rows
/// are present only when the report carries quality metrics.
pub fn metric_values(report: &MetricsReport) -> Vec<(&'static str, f64)> {
    let i = &report.impact;
    let mut rows = vec![
        (IMPACT_ROWS[0], i.jaccard_distance),
        (IMPACT_ROWS[1], i.split_rate),
        (IMPACT_ROWS[2], i.merge_rate),
    ];
    if let Some(q) = &report.quality {
        rows.extend([
            (QUALITY_ROWS[0], q.good_split_rate),
            (QUALITY_ROWS[1], q.bad_split_rate),
            (QUALITY_ROWS[2], q.good_merge_rate),
            (QUALITY_ROWS[3], q.bad_merge_rate),
            (QUALITY_ROWS[4], q.delta_precision),
            (QUALITY_ROWS[5], q.delta_recall),
            (QUALITY_ROWS[6], q.iq),
        ]);
    }
    rows
}

fn section(out: &mut String, title: &str, rows: &[(&str, f64)]) {
    writeln!(out, "{title}").expect("string write");
    for (name, v) in rows {
        writeln!(out, "  {:<16}{:>9}%", label(name), format_percent(*v)).expect("string write");
    }
}

pub fn render_table(report: &MetricsReport) -> String {
    let rows = metric_values(report);
    let mut out = String::new();
    section(&mut out, "Impact metrics", &rows[..3]);
    if rows.len() > 3 {
        out.push('\n');
        section(&mut out, "Quality metrics", &rows[3..]);
    }
    out
}

pub fn render_estimate_table(est: &EstimateReport) -> String {
    let mut out = format!(
        "Quality estimate from {} judged pair(s), {} discarded; coverage {}% of weight\n\n",
        est.judged_pairs,
        est.discarded_pairs,
        format_percent(est.coverage_weight)
    );
    out.push_str(&render_table(&est.metrics));
    out
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}
