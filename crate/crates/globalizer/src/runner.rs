//! Timed end-to-end runs over a stream file.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use globalizer_core::classifier::CandidateScorer;
use globalizer_core::corpus::SentenceRecord;
use globalizer_core::embedding::{LabelState, PhraseEmbedder};
use globalizer_core::eval::{self, EvalReport, FrequencyBin, SpanRef, TimingReport};
use globalizer_core::pipeline::{Globalizer, GlobalizerConfig, PipelineError, SentenceOutput};
use globalizer_core::text::fold;
use serde::Serialize;

use crate::formats::MentionLine;
use crate::report::{BinJson, EvalJson, TimingJson};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("startup: {0}")]
    Startup(PipelineError),
    #[error("batch {batch}: {source}")]
    Batch { batch: usize, source: PipelineError },
}

/// Wall-clock time spent in each stage, summed over batches.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub local: Duration,
    pub scan: Duration,
    pub pool: Duration,
    pub classify: Duration,
    pub emit: Duration,
}

impl StageTimings {
    pub fn global(&self) -> Duration {
        self.scan + self.pool + self.classify + self.emit
    }

    pub fn report(&self) -> TimingReport {
        let local = self.local.as_secs_f64();
        eval::timing_report(local, local + self.global().as_secs_f64())
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub globalizer: Globalizer,
    pub output: Vec<SentenceOutput>,
    pub local_output: Vec<SentenceOutput>,
    pub timings: StageTimings,
}

impl RunResult {
    pub fn entity_count(&self) -> usize {
        self.globalizer
            .candidates()
            .iter()
            .filter(|c| c.label_state == LabelState::Entity)
            .count()
    }
}

/// Runs every batch in order, timing the local and global stages.
pub fn run_stream<S: CandidateScorer + ?Sized>(
    config: GlobalizerConfig,
    records: Vec<SentenceRecord>,
    embedder: Option<PhraseEmbedder>,
    scorer: &S,
) -> Result<RunResult, RunError> {
    let mut g = Globalizer::new(config, records, embedder).map_err(RunError::Startup)?;
    let mut t = StageTimings::default();
    for b in 0..g.batches().len() {
        let start = Instant::now();
        g.local_stage(b);
        let after_local = Instant::now();
        let outcome = g.scan_stage(b);
        let after_scan = Instant::now();
        g.pool_stage(&outcome)
            .map_err(|source| RunError::Batch { batch: b, source })?;
        let after_pool = Instant::now();
        g.classify_stage(b, scorer)
            .map_err(|source| RunError::Batch { batch: b, source })?;
        let done = Instant::now();
        t.local += after_local - start;
        t.scan += after_scan - after_local;
        t.pool += after_pool - after_scan;
        t.classify += done - after_pool;
    }
    let start = Instant::now();
    let output = g.output();
    t.emit = start.elapsed();
    let local_output = g.local_output();
    Ok(RunResult {
        globalizer: g,
        output,
        local_output,
        timings: t,
    })
}

/// Runs only the local, scan and pool stages (no classification).
pub fn collect_candidates(
    config: GlobalizerConfig,
    records: Vec<SentenceRecord>,
    embedder: Option<PhraseEmbedder>,
) -> Result<Globalizer, RunError> {
    let mut g = Globalizer::new(config, records, embedder).map_err(RunError::Startup)?;
    for b in 0..g.batches().len() {
        g.local_stage(b);
        let outcome = g.scan_stage(b);
        g.pool_stage(&outcome)
            .map_err(|source| RunError::Batch { batch: b, source })?;
    }
    Ok(g)
}

fn output_surfaces(output: &[SentenceOutput]) -> impl Iterator<Item = &str> {
    output
        .iter()
        .flat_map(|s| s.mentions.iter().map(|m| m.surface.as_str()))
}

fn output_spans(output: &[SentenceOutput]) -> Vec<SpanRef> {
    output
        .iter()
        .flat_map(|s| {
            s.mentions.iter().map(move |m| SpanRef {
                tweet_id: s.tweet_id.clone(),
                sentence_id: s.sentence_id,
                start: m.start,
                end: m.end,
            })
        })
        .collect()
}

/// Surface and span reports of `output` against gold lines.
pub fn evaluate(
    output: &[SentenceOutput],
    gold: &[MentionLine],
    case_sensitive: bool,
) -> (EvalReport, EvalReport) {
    evaluate_lines(
        output_surfaces(output),
        &output_spans(output),
        gold,
        case_sensitive,
    )
}

fn evaluate_lines<'a>(
    pred_surfaces: impl Iterator<Item = &'a str>,
    pred_spans: &[SpanRef],
    gold: &'a [MentionLine],
    case_sensitive: bool,
) -> (EvalReport, EvalReport) {
    let gold_surfaces = gold
        .iter()
        .flat_map(|l| l.mentions.iter().map(|m| m.surface.as_str()));
    let surface = eval::surface_f1(pred_surfaces, gold_surfaces, case_sensitive);
    let gold_spans: Vec<SpanRef> = gold.iter().flat_map(MentionLine::span_refs).collect();
    (surface, eval::span_f1(pred_spans, &gold_spans))
}

/// Reports for a prediction file against a gold file.
pub fn evaluate_files(
    pred: &[MentionLine],
    gold: &[MentionLine],
    case_sensitive: bool,
) -> (EvalReport, EvalReport) {
    let spans: Vec<SpanRef> = pred.iter().flat_map(MentionLine::span_refs).collect();
    evaluate_lines(
        pred.iter()
            .flat_map(|l| l.mentions.iter().map(|m| m.surface.as_str())),
        &spans,
        gold,
        case_sensitive,
    )
}

/// Gold entities (case-folded gold surfaces) by mention frequency, with
/// whether the run labeled that candidate an entity.
pub fn frequency_bins(g: &Globalizer, gold: &[MentionLine]) -> Vec<FrequencyBin> {
    let mut freq: BTreeMap<String, usize> = BTreeMap::new();
    for m in gold.iter().flat_map(|l| &l.mentions) {
        *freq.entry(fold_surface(&m.surface)).or_default() += 1;
    }
    eval::binned_recall(
        freq.iter()
            .map(|(k, &n)| (n, g.label_of(k) == LabelState::Entity)),
    )
}

/// Case-folded, single-space-joined form of a surface string.
pub fn fold_surface(surface: &str) -> String {
    surface
        .split_whitespace()
        .map(fold)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub seed: u64,
    pub sentences: usize,
    pub batches: usize,
    pub candidates: usize,
    pub entities: usize,
    pub emitted_mentions: usize,
    pub timing: TimingJson,
    pub stage_seconds: BTreeMap<&'static str, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval: Option<Vec<EvalJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local_eval: Option<Vec<EvalJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub binned_recall: Option<Vec<BinJson>>,
}

impl RunReport {
    pub fn new(result: &RunResult) -> Self {
        let t = &result.timings;
        let stage_seconds = BTreeMap::from([
            ("local", t.local.as_secs_f64()),
            ("scan", t.scan.as_secs_f64()),
            ("pool", t.pool.as_secs_f64()),
            ("classify", t.classify.as_secs_f64()),
            ("emit", t.emit.as_secs_f64()),
        ]);
        Self {
            seed: 0,
            sentences: result.globalizer.tweetbase().len(),
            batches: result.globalizer.batches().len(),
            candidates: result.globalizer.trie().candidate_count(),
            entities: result.entity_count(),
            emitted_mentions: result.output.iter().map(|s| s.mentions.len()).sum(),
            timing: TimingJson::from(&t.report()),
            stage_seconds,
            eval: None,
            local_eval: None,
            binned_recall: None,
        }
    }
}

/// Reads gold mention lines from a path.
pub fn read_gold(path: &Path) -> Result<Vec<MentionLine>, crate::formats::FormatError> {
    crate::formats::parse_mentions_jsonl(crate::formats::open(path)?)
}
