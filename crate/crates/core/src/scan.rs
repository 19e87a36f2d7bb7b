//! Candidate mention extraction: trie-guided leftmost-longest scanning.

use alloc::vec::Vec;

use crate::corpus::{Batch, MentionOutcome, MentionSpan, TweetBase};
use crate::ctrie::CandidateTrie;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanConfig {
    /// Maximum candidate length in tokens.
    pub k: usize,
    /// Number of earlier batches rescanned along with the current one.
    pub rescan_window: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            k: 6,
            rescan_window: 0,
        }
    }
}

/// Leftmost-longest, non-overlapping, case-insensitive matches of trie
/// candidates in `tokens`, as half-open `(start, end)` pairs.
///
/// A window starts at `i` and grows while the trie has a matching child,
/// remembering the last node that terminates a candidate. When the path
/// breaks (or the sentence ends) the remembered match is emitted and the
/// next window starts right after it; with no match the window start moves
/// one token to the right.
pub fn scan_tokens<S: AsRef<str>>(tokens: &[S], trie: &CandidateTrie) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if trie.is_empty() {
        return out;
    }
    let n = tokens.len();
    let mut i = 0;
    while i < n {
        let mut node = trie.root();
        let mut last_end = None;
        let mut j = i;
        while j < n {
            match trie.step(node, tokens[j].as_ref()) {
                Ok(Some(next)) => {
                    node = next;
                    j += 1;
                    if trie.is_candidate(node) {
                        last_end = Some(j);
                    }
                }
                _ => break,
            }
        }
        match last_end {
            Some(end) => {
                out.push((i, end));
                i = end;
            }
            None => i += 1,
        }
    }
    out
}

/// [`scan_tokens`] returning full mention spans.
pub fn scan_sentence<S: AsRef<str>>(tokens: &[S], trie: &CandidateTrie) -> Vec<MentionSpan> {
    scan_tokens(tokens, trie)
        .into_iter()
        .filter_map(|(s, e)| MentionSpan::from_tokens(tokens, s, e))
        .collect()
}

/// A change to a sentence's detected mentions.
#[derive(Debug, Clone, PartialEq)]
pub struct MentionChange {
    pub sentence: usize,
    pub span: MentionSpan,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScanOutcome {
    pub added: Vec<MentionChange>,
    /// Shorter spans displaced by a containing span.
    pub removed: Vec<MentionChange>,
    pub rejected: usize,
}

impl ScanOutcome {
    pub fn new_mentions(&self) -> usize {
        self.added.len()
    }
}

/// Scans the sentences of `batches[current]`, plus up to
/// `config.rescan_window` preceding batches, and records every match in the
/// TweetBase.
pub fn scan_batch(
    tweetbase: &mut TweetBase,
    batches: &[Batch],
    current: usize,
    trie: &CandidateTrie,
    config: &ScanConfig,
) -> ScanOutcome {
    let mut outcome = ScanOutcome::default();
    let first = current.saturating_sub(config.rescan_window);
    for batch in &batches[first..=current] {
        for sentence in batch.range.clone() {
            let spans = match tweetbase.get(sentence) {
                Some(r) => scan_sentence(r.tokens(), trie),
                None => continue,
            };
            let Some(record) = tweetbase.get_mut(sentence) else {
                continue;
            };
            for span in spans {
                match record.record_mention(span.clone()) {
                    MentionOutcome::Inserted => {
                        outcome.added.push(MentionChange { sentence, span })
                    }
                    MentionOutcome::Replaced(old) => {
                        outcome
                            .removed
                            .extend(old.into_iter().map(|span| MentionChange { sentence, span }));
                        outcome.added.push(MentionChange { sentence, span });
                    }
                    MentionOutcome::Duplicate => {}
                    MentionOutcome::Rejected => outcome.rejected += 1,
                }
            }
        }
    }
    outcome
}
