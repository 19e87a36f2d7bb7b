//! JSON pipeline configuration. Command-line flags override file values.

use std::path::{Path, PathBuf};

use globalizer_core::classifier::{AmbiguousPolicy, ClassifierConfig};
use globalizer_core::local_emd::LocalTaggerKind;
use globalizer_core::pipeline::{EmbeddingMode, GlobalizerConfig};
use globalizer_core::scan::ScanConfig;
use globalizer_core::Stoplist;
use serde::{Deserialize, Serialize};

use crate::formats::{self, FormatError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub k: usize,
    pub rescan_window: usize,
}

impl Default for ScanSection {
    fn default() -> Self {
        let d = ScanConfig::default();
        Self {
            k: d.k,
            rescan_window: d.rescan_window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSection {
    pub alpha: f64,
    pub beta: f64,
    /// `non-entity` or `entity`.
    pub ambiguous_final_policy: String,
    pub checkpoint: Option<PathBuf>,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        let d = ClassifierConfig::default();
        Self {
            alpha: d.alpha,
            beta: d.beta,
            ambiguous_final_policy: "non-entity".into(),
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    /// Where to write the local tagger's spans, for ablation.
    pub emit_local: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub binned_csv: Option<PathBuf>,
    pub stoplist: Option<PathBuf>,
    /// `builtin-heuristic`, `external-bio` or `external-bio-embeddings`.
    pub tagger: String,
    /// `syntactic` or `phrase`.
    pub embedding_mode: String,
    pub batch_size: usize,
    pub scan: ScanSection,
    pub classifier: ClassifierSection,
    pub embedder_checkpoint: Option<PathBuf>,
    pub surface_case_sensitive: bool,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: None,
            output: None,
            gold: None,
            emit_local: None,
            report: None,
            binned_csv: None,
            stoplist: None,
            tagger: LocalTaggerKind::default().as_str().into(),
            embedding_mode: EmbeddingMode::default().as_str().into(),
            batch_size: 1000,
            scan: ScanSection::default(),
            classifier: ClassifierSection::default(),
            embedder_checkpoint: None,
            surface_case_sensitive: true,
            seed: 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Format(#[from] FormatError),
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Ok(formats::load_json(path)?)
    }

    pub fn tagger_kind(&self) -> Result<LocalTaggerKind, ConfigError> {
        self.tagger.parse().map_err(ConfigError::Invalid)
    }

    pub fn mode(&self) -> Result<EmbeddingMode, ConfigError> {
        self.embedding_mode.parse().map_err(ConfigError::Invalid)
    }

    /// Checks cross-field consistency and builds the core configuration.
    pub fn to_core(&self) -> Result<GlobalizerConfig, ConfigError> {
        let mode = self.mode()?;
        match (mode, &self.embedder_checkpoint) {
            (EmbeddingMode::Phrase, None) => {
                return Err(ConfigError::Invalid(
                    "phrase embedding mode requires embedder_checkpoint".into(),
                ))
            }
            (EmbeddingMode::Syntactic, Some(_)) => {
                return Err(ConfigError::Invalid(
                    "syntactic embedding mode does not take an embedder_checkpoint".into(),
                ))
            }
            _ => {}
        }
        if self.batch_size == 0 {
            return Err(ConfigError::Invalid("batch_size must be positive".into()));
        }
        if self.scan.k == 0 {
            return Err(ConfigError::Invalid("scan.k must be at least 1".into()));
        }
        let classifier = ClassifierConfig {
            alpha: self.classifier.alpha,
            beta: self.classifier.beta,
            ambiguous_final_policy: self
                .classifier
                .ambiguous_final_policy
                .parse::<AmbiguousPolicy>()
                .map_err(ConfigError::Invalid)?,
        };
        classifier
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let stoplist = match &self.stoplist {
            Some(p) => formats::read_stoplist(p)?,
            None => Stoplist::default(),
        };
        Ok(GlobalizerConfig {
            tagger: self.tagger_kind()?,
            embedding_mode: mode,
            batch_size: self.batch_size,
            scan: ScanConfig {
                k: self.scan.k,
                rescan_window: self.scan.rescan_window,
            },
            classifier,
            stoplist,
        })
    }
}
