//! JSON, plain-text and CSV renderings of evaluation and timing results.

use std::fmt::Write as _;

use globalizer_core::eval::{EvalReport, FrequencyBin, TimingReport};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalJson {
    pub mode: &'static str,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl From<&EvalReport> for EvalJson {
    fn from(r: &EvalReport) -> Self {
        Self {
            mode: r.mode.as_str(),
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            true_positives: r.true_positives,
            predicted: r.predicted,
            gold: r.gold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingJson {
    pub local_seconds: f64,
    pub total_seconds: f64,
    pub overhead_seconds: f64,
    pub overhead_percent: Option<f64>,
    pub measurement_error: bool,
}

impl From<&TimingReport> for TimingJson {
    fn from(t: &TimingReport) -> Self {
        Self {
            local_seconds: t.local_seconds,
            total_seconds: t.total_seconds,
            overhead_seconds: t.overhead_seconds,
            overhead_percent: t.overhead_percent,
            measurement_error: t.measurement_error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinJson {
    pub bin_low: usize,
    pub bin_high: usize,
    pub count: usize,
    pub recall: f64,
}

impl From<&FrequencyBin> for BinJson {
    fn from(b: &FrequencyBin) -> Self {
        Self {
            bin_low: b.low,
            bin_high: b.high,
            count: b.count,
            recall: b.recall,
        }
    }
}

/// Aligned-column table of one or more reports.
pub fn eval_table<'a>(rows: impl IntoIterator<Item = (&'a str, &'a EvalReport)>) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<16} {:<8} {:>9} {:>9} {:>9} {:>6} {:>9} {:>6}",
        "run", "mode", "precision", "recall", "f1", "tp", "predicted", "gold"
    );
    for (name, r) in rows {
        let _ = writeln!(
            out,
            "{:<16} {:<8} {:>9.4} {:>9.4} {:>9.4} {:>6} {:>9} {:>6}",
            name,
            r.mode.as_str(),
            r.precision,
            r.recall,
            r.f1,
            r.true_positives,
            r.predicted,
            r.gold
        );
    }
    out
}

pub fn timing_text(t: &TimingReport) -> String {
    let pct = t
        .overhead_percent
        .map_or_else(|| "n/a".to_string(), |p| format!("{p:.2}%"));
    let mut s = format!(
        "local {:.3} s  total {:.3} s  overhead {:.3} s ({pct})",
        t.local_seconds, t.total_seconds, t.overhead_seconds
    );
    if t.measurement_error {
        s.push_str("  [measurement error: total < local]");
    }
    s
}

/// `bin_low,bin_high,count,recall` with a header row.
pub fn bins_csv(bins: &[FrequencyBin]) -> String {
    let mut out = String::from("bin_low,bin_high,count,recall\n");
    for b in bins {
        let _ = writeln!(out, "{},{},{},{}", b.low, b.high, b.count, b.recall);
    }
    out
}
