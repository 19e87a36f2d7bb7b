//! Stream-level entity mention detection.
//!
//! A local tagger proposes entity candidates sentence by sentence. Those
//! candidates are indexed in a case-folded token trie, every sentence of the
//! stream is rescanned against the trie, each mention contributes a local
//! embedding to its candidate's pool, and a small classifier decides which
//! candidates are entities from the pooled (global) embedding. Mentions of
//! accepted candidates become the output.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, timing and the
//! command-line interface live in the companion `globalizer` crate.

#![no_std]

extern crate alloc;

pub mod classifier;
pub mod corpus;
pub mod ctrie;
pub mod embedding;
pub mod eval;
pub mod linalg;
pub mod local_emd;
pub mod optim;
pub mod pipeline;
pub mod scan;
pub mod text;

pub use classifier::{
    AmbiguousPolicy, CandidateScorer, ClassifierConfig, ClassifierError, ClassifierExample,
    ClassifierTrainConfig, EntityClassifier, Label,
};
pub use corpus::{batches, Batch, BioTag, MentionOutcome, MentionSpan, SentenceRecord, TweetBase};
pub use ctrie::{CandidateTrie, NodeId, TrieError};
pub use embedding::{
    CandidateBase, CandidateRecord, EmbeddingError, LabelState, MentionLocator, PhraseEmbedder,
    PhrasePair, PhraseTrainConfig, SyntacticCategory,
};
pub use eval::{EvalReport, FrequencyBin, TimingReport};
pub use local_emd::{LocalTaggerKind, SeedReport, Stoplist};
pub use pipeline::{EmbeddingMode, Globalizer, GlobalizerConfig, PipelineError};
pub use scan::ScanConfig;
