//! Precision/recall/F1 over surface forms and spans, frequency-binned recall
//! and local-vs-global timing overhead.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Surface,
    Span,
}

impl EvalMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalMode::Surface => "surface",
            EvalMode::Span => "span",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl EvalReport {
    pub fn from_counts(
        mode: EvalMode,
        true_positives: usize,
        predicted: usize,
        gold: usize,
    ) -> Self {
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let precision = ratio(true_positives, predicted);
        let recall = ratio(true_positives, gold);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            mode,
            precision,
            recall,
            f1,
            true_positives,
            predicted,
            gold,
        }
    }
}

fn set_report<T: Ord>(mode: EvalMode, pred: BTreeSet<T>, gold: BTreeSet<T>) -> EvalReport {
    let tp = pred.intersection(&gold).count();
    EvalReport::from_counts(mode, tp, pred.len(), gold.len())
}

/// Scores unique surface strings. With `case_sensitive` unset, surfaces are
/// case-folded before deduplication.
pub fn surface_f1<'a, P, G>(pred: P, gold: G, case_sensitive: bool) -> EvalReport
where
    P: IntoIterator<Item = &'a str>,
    G: IntoIterator<Item = &'a str>,
{
    let norm = |s: &str| {
        if case_sensitive {
            String::from(s)
        } else {
            text::fold(s)
        }
    };
    set_report(
        EvalMode::Surface,
        pred.into_iter().map(norm).collect(),
        gold.into_iter().map(norm).collect(),
    )
}

/// Identifies one mention in the stream.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SpanRef {
    pub tweet_id: String,
    pub sentence_id: u64,
    pub start: usize,
    pub end: usize,
}

/// Exact span matching.
pub fn span_f1<'a, P, G>(pred: P, gold: G) -> EvalReport
where
    P: IntoIterator<Item = &'a SpanRef>,
    G: IntoIterator<Item = &'a SpanRef>,
{
    set_report(
        EvalMode::Span,
        pred.into_iter().collect(),
        gold.into_iter().collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyBin {
    pub low: usize,
    pub high: usize,
    pub count: usize,
    pub detected: usize,
    pub recall: f64,
}

/// Groups entities by mention frequency into bins `[5w+1, 5w+5]` and reports
/// the detected share per non-empty bin. Each item is `(frequency, detected)`.
pub fn binned_recall<I>(entities: I) -> Vec<FrequencyBin>
where
    I: IntoIterator<Item = (usize, bool)>,
{
    let mut bins: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (freq, detected) in entities {
        let w = (freq.max(1) - 1) / 5;
        let slot = bins.entry(w).or_default();
        slot.0 += 1;
        slot.1 += usize::from(detected);
    }
    bins.into_iter()
        .map(|(w, (count, detected))| FrequencyBin {
            low: 5 * w + 1,
            high: 5 * w + 5,
            count,
            detected,
            recall: detected as f64 / count as f64,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingReport {
    pub local_seconds: f64,
    pub total_seconds: f64,
    pub overhead_seconds: f64,
    /// Overhead relative to the local time; `None` when local time is zero.
    pub overhead_percent: Option<f64>,
    /// Set when total < local, which means the measurement is broken.
    pub measurement_error: bool,
}

pub fn timing_report(local_seconds: f64, total_seconds: f64) -> TimingReport {
    let overhead_seconds = total_seconds - local_seconds;
    TimingReport {
        local_seconds,
        total_seconds,
        overhead_seconds,
        overhead_percent: (local_seconds > 0.0).then(|| 100.0 * overhead_seconds / local_seconds),
        measurement_error: overhead_seconds < 0.0 || local_seconds < 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn surface_hand_count() {
        let r = surface_f1(["a", "b", "d"], ["a", "b", "c"], true);
        assert!(
            close(r.precision, 2.0 / 3.0) && close(r.recall, 2.0 / 3.0) && close(r.f1, 2.0 / 3.0)
        );
        assert_eq!((r.true_positives, r.predicted, r.gold), (2, 3, 3));
    }

    #[test]
    fn surface_identity_and_empty() {
        let r = surface_f1(["x", "y"], ["x", "y"], true);
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
        let r = surface_f1([], ["x"], true);
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn surface_case_switch() {
        let r = surface_f1(["Italy"], ["italy"], true);
        assert_eq!(r.f1, 0.0);
        let r = surface_f1(["Italy"], ["italy"], false);
        assert_eq!(r.f1, 1.0);
    }

    fn s(t: &str, a: usize, b: usize) -> SpanRef {
        SpanRef {
            tweet_id: t.into(),
            sentence_id: 0,
            start: a,
            end: b,
        }
    }

    #[test]
    fn span_hand_counts() {
        let gold = [s("t1", 0, 2), s("t1", 3, 4), s("t2", 1, 2)];
        let pred = [s("t1", 0, 2), s("t2", 1, 3)];
        let r = span_f1(&pred, &gold);
        assert!(close(r.precision, 0.5) && close(r.recall, 1.0 / 3.0));
        let r = span_f1(&gold, &gold);
        assert_eq!(r.f1, 1.0);
    }

    #[test]
    fn bins() {
        let all3 = binned_recall(vec![(3, true); 4]);
        assert_eq!(all3.len(), 1);
        assert_eq!((all3[0].low, all3[0].high, all3[0].recall), (1, 5, 1.0));
        let seven: Vec<_> = (0..10).map(|i| (7, i < 4)).collect();
        let b = binned_recall(seven);
        assert_eq!((b[0].low, b[0].high, b[0].count), (6, 10, 10));
        assert!(close(b[0].recall, 0.4));
    }

    #[test]
    fn timing() {
        let t = timing_report(124.8, 126.07);
        assert!((t.overhead_seconds - 1.27).abs() < 1e-9);
        let t = timing_report(10.0, 12.5);
        assert!(close(t.overhead_seconds, 2.5));
        assert!(close(t.overhead_percent.unwrap(), 25.0));
        let t = timing_report(3.0, 3.0);
        assert_eq!(t.overhead_seconds, 0.0);
        assert!(!t.measurement_error);
        assert!(timing_report(5.0, 4.0).measurement_error);
    }
}
