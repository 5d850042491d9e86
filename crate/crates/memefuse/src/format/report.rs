//! Text renderings of evaluation results.
//!
//! Floats use Rust's shortest round-trip formatting, so parsing a report
//! recovers the exact `f64` values.

use std::fmt::Write;

use memefuse_core::neural::Prediction;
use memefuse_core::EvalReport;

/// `key=value` lines.
pub fn render_report(report: &EvalReport, split: &str) -> String {
    let c = &report.confusion;
    let mut out = String::new();
    let _ = writeln!(out, "split={split}");
    let _ = writeln!(out, "n={}", report.n);
    let _ = writeln!(out, "threshold={}", report.threshold);
    let _ = writeln!(out, "accuracy={}", report.accuracy);
    let _ = writeln!(out, "auc_roc={}", report.auc_roc);
    let _ = writeln!(out, "tn={}", c.tn);
    let _ = writeln!(out, "fp={}", c.fp);
    let _ = writeln!(out, "fn={}", c.fn_);
    let _ = writeln!(out, "tp={}", c.tp);
    let _ = writeln!(out, "roc_points={}", report.roc_points.len());
    out
}

/// Parses `key=value` lines back into pairs, in order.
pub fn parse_report(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

/// `fpr,tpr` CSV with a header row.
pub fn render_roc(points: &[(f64, f64)]) -> String {
    let mut out = String::from("fpr,tpr\n");
    for (x, y) in points {
        let _ = writeln!(out, "{x},{y}");
    }
    out
}

/// One `id,p_hat,label_hat` row, with `p_hat` fixed to 9 decimals.
pub fn prediction_row(id: &str, p: &Prediction) -> String {
    format!("{id},{:.9},{}", p.p_hat, p.label_hat)
}
