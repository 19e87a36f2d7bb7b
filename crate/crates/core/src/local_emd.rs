//! Local EMD stage: per-sentence candidate proposals and trie seeding.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::str::FromStr;

use crate::corpus::{BioTag, MentionSpan, SentenceRecord};
use crate::ctrie::CandidateTrie;
use crate::embedding::is_non_discriminative;
use crate::text;

/// Where local spans (and token embeddings) come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LocalTaggerKind {
    /// Capitalization-run tagger bundled with this crate.
    #[default]
    BuiltinHeuristic,
    /// BIO labels supplied with each sentence.
    ExternalBio,
    /// BIO labels plus per-token embeddings from a deep tagger.
    ExternalBioWithEmbeddings,
}

impl LocalTaggerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LocalTaggerKind::BuiltinHeuristic => "builtin-heuristic",
            LocalTaggerKind::ExternalBio => "external-bio",
            LocalTaggerKind::ExternalBioWithEmbeddings => "external-bio-embeddings",
        }
    }

    pub fn requires_embeddings(self) -> bool {
        self == LocalTaggerKind::ExternalBioWithEmbeddings
    }
}

impl FromStr for LocalTaggerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "builtin-heuristic" | "builtin" | "heuristic" => Ok(Self::BuiltinHeuristic),
            "external-bio" | "bio" => Ok(Self::ExternalBio),
            "external-bio-embeddings" | "bio-embeddings" => Ok(Self::ExternalBioWithEmbeddings),
            other => Err(alloc::format!("unknown tagger kind `{other}`")),
        }
    }
}

/// Decodes BIO labels into spans. An `I` that follows `O` (or starts the
/// sequence) opens a new span instead of being dropped.
pub fn decode_bio(labels: &[BioTag]) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    for (i, tag) in labels.iter().enumerate() {
        match tag {
            BioTag::B => {
                if let Some(s) = open.take() {
                    spans.push((s, i));
                }
                open = Some(i);
            }
            BioTag::I => {
                if open.is_none() {
                    open = Some(i);
                }
            }
            BioTag::O => {
                if let Some(s) = open.take() {
                    spans.push((s, i));
                }
            }
        }
    }
    if let Some(s) = open {
        spans.push((s, labels.len()));
    }
    spans
}

/// Case-insensitive token stoplist for the heuristic tagger.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stoplist(BTreeSet<String>);

const DEFAULT_STOPWORDS: &[&str] = &[
    // pronouns and determiners that are often capitalized
    "i",
    "i'm",
    "i've",
    "i'll",
    "i'd",
    "me",
    "my",
    "we",
    "our",
    "us",
    "you",
    "your",
    "he",
    "him",
    "his",
    "she",
    "her",
    "it",
    "its",
    "they",
    "them",
    "their",
    "this",
    "that",
    "these",
    "those",
    "the",
    "a",
    "an",
    // weekdays
    "monday",
    "tuesday",
    "wednesday",
    "thursday",
    "friday",
    "saturday",
    "sunday",
    // months
    "january",
    "february",
    "march",
    "april",
    "may",
    "june",
    "july",
    "august",
    "september",
    "october",
    "november",
    "december",
    // titles
    "gov",
    "gov.",
    "mr",
    "mr.",
    "mrs",
    "mrs.",
    "ms",
    "ms.",
    "dr",
    "dr.",
    "sen",
    "sen.",
    "rep",
    "rep.",
    "pres",
    "pres.",
    "prof",
    "prof.",
    "st",
    "st.",
    // common sentence-initial function words
    "rt",
    "and",
    "but",
    "or",
    "so",
    "if",
    "in",
    "on",
    "at",
    "of",
    "for",
    "to",
    "with",
    "just",
    "what",
    "when",
    "where",
    "why",
    "how",
    "who",
    "breaking",
];

impl Default for Stoplist {
    fn default() -> Self {
        Self::from_tokens(DEFAULT_STOPWORDS.iter().copied())
    }
}

impl Stoplist {
    pub fn empty() -> Self {
        Stoplist(BTreeSet::new())
    }

    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Stoplist(
            tokens
                .into_iter()
                .map(|t| text::fold(t.as_ref().trim()))
                .filter(|t| !t.is_empty())
                .collect(),
        )
    }

    /// One token per line; blank lines ignored.
    pub fn parse(contents: &str) -> Self {
        Self::from_tokens(contents.lines())
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(&text::fold(token))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Capitalization-run tagger used when no external tagger output is given.
///
/// Emits maximal runs of tokens starting with an uppercase character. Stoplist
/// tokens, handles, hashtags and URLs break runs. A run made of the
/// sentence-initial token alone is dropped, and sentences whose casing carries
/// no signal produce nothing.
pub fn heuristic_tag(tokens: &[String], stoplist: &Stoplist) -> Vec<(usize, usize)> {
    if is_non_discriminative(tokens) {
        return Vec::new();
    }
    let eligible =
        |t: &str| text::is_initial_cap(t) && !text::is_stream_markup(t) && !stoplist.contains(t);
    let mut spans = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if !eligible(&tokens[i]) {
            i += 1;
            continue;
        }
        let start = i;
        while i < tokens.len() && eligible(&tokens[i]) {
            i += 1;
        }
        if !(start == 0 && i == 1) {
            spans.push((start, i));
        }
    }
    spans
}

/// Local spans for one sentence according to the tagger kind. External kinds
/// read the sentence's BIO labels (none if absent).
pub fn tag_sentence(
    kind: LocalTaggerKind,
    record: &SentenceRecord,
    stoplist: &Stoplist,
) -> Vec<MentionSpan> {
    let raw = match kind {
        LocalTaggerKind::BuiltinHeuristic => heuristic_tag(record.tokens(), stoplist),
        LocalTaggerKind::ExternalBio | LocalTaggerKind::ExternalBioWithEmbeddings => {
            record.bio_labels().map(decode_bio).unwrap_or_default()
        }
    };
    raw.into_iter()
        .filter_map(|(s, e)| record.span(s, e))
        .collect()
}

/// A candidate registered from local output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedCandidate {
    pub key: String,
    pub first_seen_batch: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeedReport {
    /// Candidates not previously in the trie.
    pub new_candidates: Vec<SeedCandidate>,
    /// Spans longer than `max_len` tokens, not inserted.
    pub skipped_too_long: usize,
}

/// Inserts the folded token sequence of every span of at most `max_len`
/// tokens into the trie.
pub fn seed_candidates<'a, I>(
    spans: I,
    trie: &mut CandidateTrie,
    max_len: usize,
    batch_index: usize,
) -> SeedReport
where
    I: IntoIterator<Item = &'a MentionSpan>,
{
    let mut report = SeedReport::default();
    for span in spans {
        if span.len() > max_len {
            report.skipped_too_long += 1;
            continue;
        }
        let tokens: Vec<&str> = span.candidate_key.split(' ').collect();
        let before = trie.candidate_count();
        if trie.insert(&tokens).is_ok() && trie.candidate_count() > before {
            report.new_candidates.push(SeedCandidate {
                key: span.candidate_key.clone(),
                first_seen_batch: batch_index,
            });
        }
    }
    report
}
