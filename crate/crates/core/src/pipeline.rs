//! Batch-by-batch orchestration of local tagging, trie seeding, scanning,
//! pooling and classification over an in-memory stream.
//!
//! Each stage is a separate method so callers can time or interleave them;
//! [`Globalizer::run`] drives all batches in order.

use alloc::string::String;
use alloc::vec::Vec;
use core::str::FromStr;

use crate::classifier::{classify_batch, CandidateScorer, ClassifierConfig, ClassifierError};
use crate::corpus::{batches, Batch, MentionSpan, RecordError, SentenceRecord, TweetBase};
use crate::ctrie::CandidateTrie;
use crate::embedding::{
    syntactic_category, CandidateBase, EmbeddingError, LabelState, MentionLocator, PhraseEmbedder,
    SyntacticCategory,
};
use crate::local_emd::{seed_candidates, tag_sentence, LocalTaggerKind, SeedReport, Stoplist};
use crate::scan::{scan_batch, MentionChange, ScanConfig, ScanOutcome};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

/// Source of per-mention local embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmbeddingMode {
    /// One-hot capitalization category.
    #[default]
    Syntactic,
    /// Phrase embedder over the tagger's token embeddings.
    Phrase,
}

impl FromStr for EmbeddingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "syntactic" => Ok(Self::Syntactic),
            "phrase" => Ok(Self::Phrase),
            other => Err(alloc::format!("unknown embedding mode `{other}`")),
        }
    }
}

impl EmbeddingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingMode::Syntactic => "syntactic",
            EmbeddingMode::Phrase => "phrase",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalizerConfig {
    pub tagger: LocalTaggerKind,
    pub embedding_mode: EmbeddingMode,
    pub batch_size: usize,
    pub scan: ScanConfig,
    pub classifier: ClassifierConfig,
    pub stoplist: Stoplist,
}

impl Default for GlobalizerConfig {
    fn default() -> Self {
        Self {
            tagger: LocalTaggerKind::default(),
            embedding_mode: EmbeddingMode::default(),
            batch_size: 1000,
            scan: ScanConfig::default(),
            classifier: ClassifierConfig::default(),
            stoplist: Stoplist::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LocalStageReport {
    pub local_spans: usize,
    pub seeds: SeedReport,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PoolReport {
    pub pooled: usize,
    pub retracted: usize,
}

/// One sentence of output: its identity and the emitted spans.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceOutput {
    pub tweet_id: String,
    pub sentence_id: u64,
    pub mentions: Vec<MentionSpan>,
}

#[derive(Debug, Clone)]
pub struct Globalizer {
    config: GlobalizerConfig,
    embedder: Option<PhraseEmbedder>,
    tweetbase: TweetBase,
    batches: Vec<Batch>,
    trie: CandidateTrie,
    candidates: CandidateBase,
}

impl Globalizer {
    /// Checks the configuration against the input and builds the stores.
    pub fn new(
        config: GlobalizerConfig,
        records: Vec<SentenceRecord>,
        embedder: Option<PhraseEmbedder>,
    ) -> Result<Self, PipelineError> {
        if config.batch_size == 0 {
            return Err(PipelineError::Config("batch_size must be positive".into()));
        }
        if config.scan.k == 0 {
            return Err(PipelineError::Config("k must be at least 1".into()));
        }
        config.classifier.validate()?;
        let needs_embeddings =
            config.tagger.requires_embeddings() || config.embedding_mode == EmbeddingMode::Phrase;
        if needs_embeddings {
            if let Some(r) = records
                .iter()
                .find(|r| r.token_embeddings().is_none() && !r.tokens().is_empty())
            {
                return Err(PipelineError::Config(alloc::format!(
                    "sentence ({}, {}) has no token embeddings",
                    r.tweet_id,
                    r.sentence_id
                )));
            }
        }
        let dim = match (config.embedding_mode, &embedder) {
            (EmbeddingMode::Syntactic, None) => SyntacticCategory::COUNT,
            (EmbeddingMode::Syntactic, Some(_)) => {
                return Err(PipelineError::Config(
                    "syntactic mode takes no phrase embedder".into(),
                ))
            }
            (EmbeddingMode::Phrase, None) => {
                return Err(PipelineError::Config(
                    "phrase mode needs a phrase embedder".into(),
                ))
            }
            (EmbeddingMode::Phrase, Some(e)) => {
                if let Some(r) = records
                    .iter()
                    .find(|r| r.embedding_dim().is_some_and(|d| d != e.d_in()))
                {
                    return Err(PipelineError::Embedding(EmbeddingError::Dimension {
                        expected: e.d_in(),
                        found: r.embedding_dim().unwrap_or(0),
                    }));
                }
                e.d_out()
            }
        };
        let batches = batches(records.len(), config.batch_size);
        Ok(Self {
            config,
            embedder,
            tweetbase: TweetBase::from_records(records)?,
            batches,
            trie: CandidateTrie::new(),
            candidates: CandidateBase::new(dim),
        })
    }

    pub fn config(&self) -> &GlobalizerConfig {
        &self.config
    }

    pub fn batches(&self) -> &[Batch] {
        &self.batches
    }

    pub fn tweetbase(&self) -> &TweetBase {
        &self.tweetbase
    }

    pub fn trie(&self) -> &CandidateTrie {
        &self.trie
    }

    pub fn candidates(&self) -> &CandidateBase {
        &self.candidates
    }

    /// Tags every sentence of batch `b` and seeds the trie with the spans.
    pub fn local_stage(&mut self, b: usize) -> LocalStageReport {
        let range = self.batches[b].range.clone();
        let mut spans: Vec<MentionSpan> = Vec::new();
        for i in range {
            let Some(rec) = self.tweetbase.get_mut(i) else {
                continue;
            };
            let local = tag_sentence(self.config.tagger, rec, &self.config.stoplist);
            spans.extend(local.iter().cloned());
            rec.local_mentions = local;
        }
        let seeds = seed_candidates(&spans, &mut self.trie, self.config.scan.k, b);
        for seed in &seeds.new_candidates {
            self.candidates.ensure(&seed.key, seed.first_seen_batch);
        }
        LocalStageReport {
            local_spans: spans.len(),
            seeds,
        }
    }

    /// Scans batch `b` (and the rescan window) against the trie.
    pub fn scan_stage(&mut self, b: usize) -> ScanOutcome {
        scan_batch(
            &mut self.tweetbase,
            &self.batches,
            b,
            &self.trie,
            &self.config.scan,
        )
    }

    fn local_embedding(&self, change: &MentionChange) -> Result<Vec<f64>, PipelineError> {
        let rec = &self.tweetbase.records()[change.sentence];
        let (s, e) = (change.span.start, change.span.end);
        match (&self.embedder, self.config.embedding_mode) {
            (Some(embedder), EmbeddingMode::Phrase) => {
                let embs = rec.token_embeddings().ok_or(EmbeddingError::EmptyPhrase)?;
                Ok(embedder.embed(&embs[s..e])?)
            }
            _ => Ok(syntactic_category(rec.tokens(), s, e).one_hot()),
        }
    }

    fn locator(&self, change: &MentionChange) -> MentionLocator {
        let rec = &self.tweetbase.records()[change.sentence];
        MentionLocator {
            tweet_id: rec.tweet_id.clone(),
            sentence_id: rec.sentence_id,
            start: change.span.start,
            end: change.span.end,
            surface: change.span.surface.clone(),
        }
    }

    /// Moves the scan's mention changes into the candidate pools.
    pub fn pool_stage(&mut self, outcome: &ScanOutcome) -> Result<PoolReport, PipelineError> {
        let mut report = PoolReport::default();
        for change in &outcome.removed {
            let local = self.local_embedding(change)?;
            let loc = self.locator(change);
            self.candidates
                .retract(&change.span.candidate_key, &local, &loc)?;
            report.retracted += 1;
        }
        for change in &outcome.added {
            let local = self.local_embedding(change)?;
            let loc = self.locator(change);
            self.candidates
                .update_global(&change.span.candidate_key, &local, loc)?;
            report.pooled += 1;
        }
        Ok(report)
    }

    /// Classifies unsettled candidates. On the last batch ambiguous
    /// candidates are resolved.
    pub fn classify_stage<S: CandidateScorer + ?Sized>(
        &mut self,
        b: usize,
        scorer: &S,
    ) -> Result<Vec<(String, LabelState)>, PipelineError> {
        let is_final = b + 1 == self.batches.len();
        Ok(classify_batch(
            &mut self.candidates,
            scorer,
            &self.config.classifier,
            is_final,
        )?)
    }

    /// Runs every stage over every batch in order.
    pub fn run<S: CandidateScorer + ?Sized>(&mut self, scorer: &S) -> Result<(), PipelineError> {
        for b in 0..self.batches.len() {
            self.local_stage(b);
            let outcome = self.scan_stage(b);
            self.pool_stage(&outcome)?;
            self.classify_stage(b, scorer)?;
        }
        Ok(())
    }

    pub fn label_of(&self, key: &str) -> LabelState {
        self.candidates
            .get(key)
            .map(|r| r.label_state)
            .unwrap_or_default()
    }

    /// Detected mentions of Entity-labeled candidates, per sentence.
    pub fn output(&self) -> Vec<SentenceOutput> {
        self.collect(|rec| {
            rec.detected_mentions()
                .iter()
                .filter(|m| self.label_of(&m.candidate_key) == LabelState::Entity)
                .cloned()
                .collect()
        })
    }

    /// The local tagger's spans, per sentence.
    pub fn local_output(&self) -> Vec<SentenceOutput> {
        self.collect(|rec| rec.local_mentions.clone())
    }

    fn collect(&self, f: impl Fn(&SentenceRecord) -> Vec<MentionSpan>) -> Vec<SentenceOutput> {
        self.tweetbase
            .iter()
            .map(|rec| SentenceOutput {
                tweet_id: rec.tweet_id.clone(),
                sentence_id: rec.sentence_id,
                mentions: f(rec),
            })
            .collect()
    }
}
