//! Stream data model: sentence records, mention spans, batches and the
//! per-sentence store (TweetBase).

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BioTag {
    B,
    I,
    O,
}

impl BioTag {
    /// Accepts `B`, `I`, `O` and the typed variants `B-PER`, `I-LOC`, ...
    pub fn parse(s: &str) -> Option<BioTag> {
        match s.as_bytes().first()? {
            b'B' | b'b' if s.len() == 1 || s.as_bytes()[1] == b'-' => Some(BioTag::B),
            b'I' | b'i' if s.len() == 1 || s.as_bytes()[1] == b'-' => Some(BioTag::I),
            b'O' | b'o' if s.len() == 1 => Some(BioTag::O),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BioTag::B => "B",
            BioTag::I => "I",
            BioTag::O => "O",
        }
    }
}

impl fmt::Display for BioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Half-open token span with its surface string and folded candidate key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MentionSpan {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub candidate_key: String,
}

impl MentionSpan {
    /// Builds the span over `tokens[start..end]`, or `None` if out of range
    /// or empty.
    pub fn from_tokens<S: AsRef<str>>(tokens: &[S], start: usize, end: usize) -> Option<Self> {
        if start >= end || end > tokens.len() {
            return None;
        }
        let slice = &tokens[start..end];
        Some(Self {
            start,
            end,
            surface: text::join(slice),
            candidate_key: text::fold_join(slice),
        })
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn overlaps(&self, other: &MentionSpan) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// `self` covers `other` and is strictly longer.
    pub fn strictly_contains(&self, other: &MentionSpan) -> bool {
        self.start <= other.start && other.end <= self.end && self.len() > other.len()
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RecordError {
    #[error("token {0} is empty")]
    EmptyToken(usize),
    #[error("{labels} BIO labels for {tokens} tokens")]
    BioLength { tokens: usize, labels: usize },
    #[error("{vectors} token embeddings for {tokens} tokens")]
    EmbeddingCount { tokens: usize, vectors: usize },
    #[error("token embedding {index} has dimension {found}, expected {expected}")]
    EmbeddingDim {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("token embeddings must have dimension >= 1")]
    ZeroDim,
    #[error("duplicate sentence ({tweet_id}, {sentence_id})")]
    Duplicate { tweet_id: String, sentence_id: u64 },
}

/// Result of inserting a span into a sentence's detected mentions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MentionOutcome {
    Inserted,
    /// The identical span was already present.
    Duplicate,
    /// The new span strictly contained these shorter spans, which were removed.
    Replaced(Vec<MentionSpan>),
    /// Overlap without containment, or out of bounds; existing spans kept.
    Rejected,
}

impl MentionOutcome {
    pub fn is_new(&self) -> bool {
        matches!(self, MentionOutcome::Inserted | MentionOutcome::Replaced(_))
    }
}

/// One tokenized sentence of the stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceRecord {
    pub tweet_id: String,
    pub sentence_id: u64,
    tokens: Vec<String>,
    bio_labels: Option<Vec<BioTag>>,
    token_embeddings: Option<Vec<Vec<f64>>>,
    /// Spans proposed by the local tagger.
    pub local_mentions: Vec<MentionSpan>,
    detected_mentions: Vec<MentionSpan>,
}

impl SentenceRecord {
    pub fn new(
        tweet_id: impl Into<String>,
        sentence_id: u64,
        tokens: Vec<String>,
        bio_labels: Option<Vec<BioTag>>,
        token_embeddings: Option<Vec<Vec<f64>>>,
    ) -> Result<Self, RecordError> {
        if let Some(i) = tokens.iter().position(|t| t.is_empty()) {
            return Err(RecordError::EmptyToken(i));
        }
        if let Some(labels) = &bio_labels {
            if labels.len() != tokens.len() {
                return Err(RecordError::BioLength {
                    tokens: tokens.len(),
                    labels: labels.len(),
                });
            }
        }
        if let Some(embs) = &token_embeddings {
            if embs.len() != tokens.len() {
                return Err(RecordError::EmbeddingCount {
                    tokens: tokens.len(),
                    vectors: embs.len(),
                });
            }
            if let Some(first) = embs.first() {
                let expected = first.len();
                if expected == 0 {
                    return Err(RecordError::ZeroDim);
                }
                if let Some((index, v)) = embs.iter().enumerate().find(|(_, v)| v.len() != expected)
                {
                    return Err(RecordError::EmbeddingDim {
                        index,
                        expected,
                        found: v.len(),
                    });
                }
            }
        }
        Ok(Self {
            tweet_id: tweet_id.into(),
            sentence_id,
            tokens,
            bio_labels,
            token_embeddings,
            local_mentions: Vec::new(),
            detected_mentions: Vec::new(),
        })
    }

    /// Convenience constructor for plain token lists.
    pub fn from_tokens<S: AsRef<str>>(
        tweet_id: impl Into<String>,
        sentence_id: u64,
        tokens: &[S],
    ) -> Result<Self, RecordError> {
        Self::new(
            tweet_id,
            sentence_id,
            tokens.iter().map(|t| t.as_ref().into()).collect(),
            None,
            None,
        )
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn bio_labels(&self) -> Option<&[BioTag]> {
        self.bio_labels.as_deref()
    }

    pub fn token_embeddings(&self) -> Option<&[Vec<f64>]> {
        self.token_embeddings.as_deref()
    }

    /// Dimension of the token embeddings, if present and non-empty.
    pub fn embedding_dim(&self) -> Option<usize> {
        self.token_embeddings.as_ref()?.first().map(Vec::len)
    }

    pub fn detected_mentions(&self) -> &[MentionSpan] {
        &self.detected_mentions
    }

    pub fn span(&self, start: usize, end: usize) -> Option<MentionSpan> {
        MentionSpan::from_tokens(&self.tokens, start, end)
    }

    /// Inserts a detected mention, keeping the list sorted and
    /// non-overlapping. A span that strictly contains every span it overlaps
    /// replaces them; any other overlap is rejected.
    pub fn record_mention(&mut self, span: MentionSpan) -> MentionOutcome {
        if span.is_empty() || span.end > self.tokens.len() {
            return MentionOutcome::Rejected;
        }
        let overlapping: Vec<usize> = self
            .detected_mentions
            .iter()
            .enumerate()
            .filter(|(_, m)| m.overlaps(&span))
            .map(|(i, _)| i)
            .collect();
        if overlapping.is_empty() {
            let at = self
                .detected_mentions
                .partition_point(|m| m.start < span.start);
            self.detected_mentions.insert(at, span);
            return MentionOutcome::Inserted;
        }
        if overlapping.len() == 1 {
            let existing = &self.detected_mentions[overlapping[0]];
            if existing.start == span.start && existing.end == span.end {
                return MentionOutcome::Duplicate;
            }
        }
        if !overlapping
            .iter()
            .all(|&i| span.strictly_contains(&self.detected_mentions[i]))
        {
            return MentionOutcome::Rejected;
        }
        // Overlapping spans of a sorted non-overlapping list are contiguous.
        let first = overlapping[0];
        let removed: Vec<MentionSpan> = self
            .detected_mentions
            .splice(first..first + overlapping.len(), [span])
            .collect();
        MentionOutcome::Replaced(removed)
    }
}

/// A contiguous slice of the stream processed as one iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub index: usize,
    pub range: Range<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }

    pub fn sentences<'a, T>(&self, records: &'a [T]) -> &'a [T] {
        &records[self.range.clone()]
    }
}

/// Splits `len` records into consecutive batches of `batch_size`; only the
/// last one may be shorter.
///
/// # Panics
/// If `batch_size` is zero.
pub fn batches(len: usize, batch_size: usize) -> Vec<Batch> {
    assert!(batch_size >= 1, "batch_size must be positive");
    (0..len)
        .step_by(batch_size)
        .enumerate()
        .map(|(index, start)| Batch {
            index,
            range: start..(start + batch_size).min(len),
        })
        .collect()
}

/// Per-sentence store indexed by (tweet id, sentence id).
#[derive(Debug, Clone, Default)]
pub struct TweetBase {
    records: Vec<SentenceRecord>,
    index: BTreeMap<(String, u64), usize>,
}

impl TweetBase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: Vec<SentenceRecord>) -> Result<Self, RecordError> {
        let mut base = Self::new();
        for r in records {
            base.push(r)?;
        }
        Ok(base)
    }

    pub fn push(&mut self, record: SentenceRecord) -> Result<usize, RecordError> {
        let key = (record.tweet_id.clone(), record.sentence_id);
        if self.index.contains_key(&key) {
            return Err(RecordError::Duplicate {
                tweet_id: key.0,
                sentence_id: key.1,
            });
        }
        let at = self.records.len();
        self.index.insert(key, at);
        self.records.push(record);
        Ok(at)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[SentenceRecord] {
        &self.records
    }

    pub fn get(&self, i: usize) -> Option<&SentenceRecord> {
        self.records.get(i)
    }

    pub fn get_mut(&mut self, i: usize) -> Option<&mut SentenceRecord> {
        self.records.get_mut(i)
    }

    pub fn position(&self, tweet_id: &str, sentence_id: u64) -> Option<usize> {
        self.index
            .get(&(String::from(tweet_id), sentence_id))
            .copied()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, SentenceRecord> {
        self.records.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rec(n: usize) -> SentenceRecord {
        let toks: Vec<String> = (0..n).map(|i| alloc::format!("t{i}")).collect();
        SentenceRecord::new("t", 0, toks, None, None).unwrap()
    }

    #[test]
    fn bio_length_mismatch() {
        let err = SentenceRecord::new(
            "t1",
            0,
            vec!["a".into(), "b".into(), "c".into()],
            Some(vec![BioTag::B, BioTag::O]),
            None,
        )
        .unwrap_err();
        assert_eq!(
            err,
            RecordError::BioLength {
                tokens: 3,
                labels: 2
            }
        );
    }

    #[test]
    fn embedding_dim_mismatch() {
        let err = SentenceRecord::new(
            "t1",
            0,
            vec!["a".into(), "b".into()],
            None,
            Some(vec![vec![1.0, 2.0], vec![1.0]]),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            RecordError::EmbeddingDim {
                index: 1,
                expected: 2,
                found: 1
            }
        ));
    }

    #[test]
    fn bio_parse() {
        assert_eq!(BioTag::parse("B-PER"), Some(BioTag::B));
        assert_eq!(BioTag::parse("I"), Some(BioTag::I));
        assert_eq!(BioTag::parse("O"), Some(BioTag::O));
        assert_eq!(BioTag::parse("X"), None);
        assert_eq!(BioTag::parse("Bob"), None);
    }

    #[test]
    fn batch_sizes() {
        let sizes = |n, k| batches(n, k).iter().map(Batch::len).collect::<Vec<_>>();
        assert_eq!(sizes(5, 2), vec![2, 2, 1]);
        assert!(batches(0, 2).is_empty());
        assert_eq!(sizes(3, 10), vec![3]);
    }

    #[test]
    fn record_into_empty() {
        let mut r = rec(6);
        let s = r.span(2, 4).unwrap();
        assert_eq!(r.record_mention(s), MentionOutcome::Inserted);
        assert_eq!(r.detected_mentions().len(), 1);
    }

    #[test]
    fn record_duplicate_is_idempotent() {
        let mut r = rec(6);
        r.record_mention(r.span(2, 4).unwrap());
        assert_eq!(
            r.record_mention(r.span(2, 4).unwrap()),
            MentionOutcome::Duplicate
        );
        assert_eq!(r.detected_mentions().len(), 1);
    }

    #[test]
    fn containment_replaces() {
        let mut r = rec(6);
        r.record_mention(r.span(2, 3).unwrap());
        let out = r.record_mention(r.span(2, 4).unwrap());
        assert_eq!(out, MentionOutcome::Replaced(vec![r.span(2, 3).unwrap()]));
        let spans: Vec<_> = r
            .detected_mentions()
            .iter()
            .map(|m| (m.start, m.end))
            .collect();
        assert_eq!(spans, vec![(2, 4)]);
    }

    #[test]
    fn containment_replaces_several() {
        let mut r = rec(6);
        r.record_mention(r.span(1, 2).unwrap());
        r.record_mention(r.span(2, 3).unwrap());
        r.record_mention(r.span(4, 5).unwrap());
        let out = r.record_mention(r.span(1, 3).unwrap());
        assert!(matches!(out, MentionOutcome::Replaced(ref v) if v.len() == 2));
        let spans: Vec<_> = r
            .detected_mentions()
            .iter()
            .map(|m| (m.start, m.end))
            .collect();
        assert_eq!(spans, vec![(1, 3), (4, 5)]);
    }

    #[test]
    fn partial_overlap_rejected() {
        let mut r = rec(6);
        r.record_mention(r.span(1, 3).unwrap());
        assert_eq!(
            r.record_mention(r.span(2, 4).unwrap()),
            MentionOutcome::Rejected
        );
        // shorter span inside an existing one
        assert_eq!(
            r.record_mention(r.span(1, 2).unwrap()),
            MentionOutcome::Rejected
        );
        assert_eq!(r.detected_mentions().len(), 1);
    }

    #[test]
    fn out_of_bounds_rejected() {
        let mut r = rec(2);
        let s = MentionSpan {
            start: 1,
            end: 3,
            surface: "x".into(),
            candidate_key: "x".into(),
        };
        assert_eq!(r.record_mention(s), MentionOutcome::Rejected);
    }

    #[test]
    fn span_strings() {
        let s = MentionSpan::from_tokens(&["Gov", "Andy", "BESHEAR"], 1, 3).unwrap();
        assert_eq!(s.surface, "Andy BESHEAR");
        assert_eq!(s.candidate_key, "andy beshear");
        assert!(MentionSpan::from_tokens(&["a"], 0, 2).is_none());
        assert!(MentionSpan::from_tokens(&["a"], 1, 1).is_none());
    }

    #[test]
    fn tweetbase_rejects_duplicate_ids() {
        let mut tb = TweetBase::new();
        tb.push(rec(1)).unwrap();
        assert!(matches!(
            tb.push(rec(2)),
            Err(RecordError::Duplicate { .. })
        ));
        assert_eq!(tb.position("t", 0), Some(0));
    }
}
