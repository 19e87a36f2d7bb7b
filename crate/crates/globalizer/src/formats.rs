//! On-disk formats: stream/gold/output JSONL, stoplists, STS-style pair
//! files, training examples and model checkpoints.

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use globalizer_core::classifier::{candidate_features, ClassifierExample, Dense, EntityClassifier};
use globalizer_core::corpus::{BioTag, RecordError, SentenceRecord};
use globalizer_core::embedding::{PhraseEmbedder, PhrasePair};
use globalizer_core::eval::SpanRef;
use globalizer_core::pipeline::SentenceOutput;
use globalizer_core::Stoplist;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: malformed JSON: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("line {line}: {source}")]
    Schema { line: usize, source: RecordError },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl FormatError {
    fn io(path: &Path, source: io::Error) -> Self {
        FormatError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub fn open(path: &Path) -> Result<BufReader<fs::File>, FormatError> {
    fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| FormatError::io(path, e))
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<(), FormatError> {
    fs::write(path, contents).map_err(|e| FormatError::io(path, e))
}

/// Non-blank lines with their 1-based line numbers.
fn json_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String), FormatError>> {
    reader
        .lines()
        .enumerate()
        .filter_map(|(i, line)| match line {
            Ok(l) if l.trim().is_empty() => None,
            Ok(l) => Some(Ok((i + 1, l))),
            Err(e) => Some(Err(FormatError::Io {
                path: PathBuf::from("<stream>"),
                source: e,
            })),
        })
}

// ---------------------------------------------------------------------------
// Stream

/// One line of the input stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamLine {
    pub tweet_id: String,
    pub sentence_id: u64,
    pub tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bio: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_embeddings: Option<Vec<Vec<f64>>>,
}

impl StreamLine {
    pub fn into_record(self, line: usize) -> Result<SentenceRecord, FormatError> {
        let bio = match self.bio {
            None => None,
            Some(tags) => Some(
                tags.iter()
                    .map(|t| {
                        BioTag::parse(t).ok_or_else(|| FormatError::Invalid {
                            line,
                            message: format!("invalid BIO tag `{t}`"),
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            ),
        };
        SentenceRecord::new(
            self.tweet_id,
            self.sentence_id,
            self.tokens,
            bio,
            self.token_embeddings,
        )
        .map_err(|source| FormatError::Schema { line, source })
    }

    pub fn from_record(r: &SentenceRecord) -> Self {
        Self {
            tweet_id: r.tweet_id.clone(),
            sentence_id: r.sentence_id,
            tokens: r.tokens().to_vec(),
            bio: r
                .bio_labels()
                .map(|l| l.iter().map(|t| t.as_str().to_string()).collect()),
            token_embeddings: r.token_embeddings().map(<[_]>::to_vec),
        }
    }
}

/// Parses newline-delimited sentence objects in file order.
pub fn parse_stream_jsonl<R: BufRead>(reader: R) -> Result<Vec<SentenceRecord>, FormatError> {
    let mut out = Vec::new();
    for item in json_lines(reader) {
        let (line, text) = item?;
        let parsed: StreamLine =
            serde_json::from_str(&text).map_err(|source| FormatError::Json { line, source })?;
        out.push(parsed.into_record(line)?);
    }
    Ok(out)
}

pub fn write_stream_jsonl<W: Write>(mut w: W, records: &[SentenceRecord]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, &StreamLine::from_record(r))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Gold and output mentions

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionEntry {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_key: Option<String>,
}

/// Per-sentence mention list; gold files omit `candidate_key`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionLine {
    pub tweet_id: String,
    pub sentence_id: u64,
    pub mentions: Vec<MentionEntry>,
}

impl MentionLine {
    pub fn from_output(o: &SentenceOutput) -> Self {
        Self {
            tweet_id: o.tweet_id.clone(),
            sentence_id: o.sentence_id,
            mentions: o
                .mentions
                .iter()
                .map(|m| MentionEntry {
                    start: m.start,
                    end: m.end,
                    surface: m.surface.clone(),
                    candidate_key: Some(m.candidate_key.clone()),
                })
                .collect(),
        }
    }

    pub fn span_refs(&self) -> impl Iterator<Item = SpanRef> + '_ {
        self.mentions.iter().map(move |m| SpanRef {
            tweet_id: self.tweet_id.clone(),
            sentence_id: self.sentence_id,
            start: m.start,
            end: m.end,
        })
    }
}

pub fn parse_mentions_jsonl<R: BufRead>(reader: R) -> Result<Vec<MentionLine>, FormatError> {
    let mut out = Vec::new();
    for item in json_lines(reader) {
        let (line, text) = item?;
        let parsed: MentionLine =
            serde_json::from_str(&text).map_err(|source| FormatError::Json { line, source })?;
        if let Some(m) = parsed.mentions.iter().find(|m| m.start >= m.end) {
            return Err(FormatError::Invalid {
                line,
                message: format!("empty span ({}, {})", m.start, m.end),
            });
        }
        out.push(parsed);
    }
    Ok(out)
}

pub fn write_mentions_jsonl<W: Write>(mut w: W, outputs: &[SentenceOutput]) -> io::Result<()> {
    for o in outputs {
        serde_json::to_writer(&mut w, &MentionLine::from_output(o))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_stoplist(path: &Path) -> Result<Stoplist, FormatError> {
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    Ok(Stoplist::parse(&text))
}

// ---------------------------------------------------------------------------
// Training data

/// Reads `score<TAB>phrase_a_ref<TAB>phrase_b_ref` lines. Scores in [0, 5]
/// are divided by 5. Each ref is a JSON file (relative to the TSV) holding
/// the phrase's token embeddings as an array of vectors.
pub fn read_phrase_pairs(path: &Path) -> Result<Vec<PhrasePair>, FormatError> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| FormatError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let invalid = |message: String| FormatError::Invalid {
            line: line_no,
            message,
        };
        if fields.len() != 3 {
            return Err(invalid(format!(
                "expected 3 tab-separated fields, found {}",
                fields.len()
            )));
        }
        let raw: f64 = fields[0]
            .trim()
            .parse()
            .map_err(|_| invalid(format!("bad score `{}`", fields[0])))?;
        if !(0.0..=5.0).contains(&raw) {
            return Err(invalid(format!("score {raw} outside [0, 5]")));
        }
        let load = |r: &str| -> Result<Vec<Vec<f64>>, FormatError> {
            let p = base.join(r.trim());
            let text = fs::read_to_string(&p).map_err(|e| FormatError::io(&p, e))?;
            serde_json::from_str(&text).map_err(|source| FormatError::Json {
                line: line_no,
                source,
            })
        };
        out.push(PhrasePair {
            a: load(fields[1])?,
            b: load(fields[2])?,
            score: raw / 5.0,
        });
    }
    Ok(out)
}

/// One labeled candidate for classifier training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleLine {
    pub key: String,
    pub embedding: Vec<f64>,
    pub length: usize,
    pub label: u8,
}

impl ExampleLine {
    pub fn to_example(&self) -> ClassifierExample {
        ClassifierExample {
            features: candidate_features(&self.embedding, &self.key),
            label: self.label == 1,
        }
    }
}

pub fn parse_examples_jsonl<R: BufRead>(reader: R) -> Result<Vec<ExampleLine>, FormatError> {
    let mut out = Vec::new();
    for item in json_lines(reader) {
        let (line, text) = item?;
        let ex: ExampleLine =
            serde_json::from_str(&text).map_err(|source| FormatError::Json { line, source })?;
        if ex.label > 1 {
            return Err(FormatError::Invalid {
                line,
                message: format!("label must be 0 or 1, got {}", ex.label),
            });
        }
        out.push(ex);
    }
    Ok(out)
}

pub fn write_examples_jsonl<W: Write>(mut w: W, examples: &[ExampleLine]) -> io::Result<()> {
    for e in examples {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Checkpoints

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderCheckpoint {
    pub kind: String,
    pub version: u32,
    pub d_in: usize,
    pub d_out: usize,
    /// Row-major `d_out x d_in`.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl EmbedderCheckpoint {
    pub const KIND: &'static str = "phrase-embedder";

    pub fn from_model(m: &PhraseEmbedder) -> Self {
        Self {
            kind: Self::KIND.into(),
            version: CHECKPOINT_VERSION,
            d_in: m.d_in(),
            d_out: m.d_out(),
            w: m.weights().to_vec(),
            b: m.bias().to_vec(),
        }
    }

    pub fn into_model(self) -> Result<PhraseEmbedder, FormatError> {
        check_header(&self.kind, Self::KIND, self.version)?;
        PhraseEmbedder::from_parts(self.d_in, self.d_out, self.w, self.b)
            .map_err(|e| FormatError::Checkpoint(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCheckpoint {
    pub rows: usize,
    pub cols: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierCheckpoint {
    pub kind: String,
    pub version: u32,
    pub layers: Vec<LayerCheckpoint>,
}

impl ClassifierCheckpoint {
    pub const KIND: &'static str = "entity-classifier";

    pub fn from_model(m: &EntityClassifier) -> Self {
        Self {
            kind: Self::KIND.into(),
            version: CHECKPOINT_VERSION,
            layers: m
                .layers()
                .iter()
                .map(|l| LayerCheckpoint {
                    rows: l.rows,
                    cols: l.cols,
                    w: l.w.clone(),
                    b: l.b.clone(),
                })
                .collect(),
        }
    }

    pub fn into_model(self) -> Result<EntityClassifier, FormatError> {
        check_header(&self.kind, Self::KIND, self.version)?;
        let layers = self
            .layers
            .into_iter()
            .map(|l| Dense {
                rows: l.rows,
                cols: l.cols,
                w: l.w,
                b: l.b,
            })
            .collect();
        EntityClassifier::from_layers(layers).map_err(|e| FormatError::Checkpoint(e.to_string()))
    }
}

fn check_header(kind: &str, expected: &str, version: u32) -> Result<(), FormatError> {
    if kind != expected {
        return Err(FormatError::Checkpoint(format!(
            "expected kind `{expected}`, found `{kind}`"
        )));
    }
    if version != CHECKPOINT_VERSION {
        return Err(FormatError::Checkpoint(format!(
            "unsupported version {version}"
        )));
    }
    Ok(())
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut bytes =
        serde_json::to_vec(value).map_err(|e| FormatError::Checkpoint(e.to_string()))?;
    bytes.push(b'\n');
    write_file(path, &bytes)
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, FormatError> {
    serde_json::from_reader(open(path)?).map_err(|source| FormatError::Json { line: 1, source })
}

pub fn load_embedder(path: &Path) -> Result<PhraseEmbedder, FormatError> {
    load_json::<EmbedderCheckpoint>(path)?.into_model()
}

pub fn load_classifier(path: &Path) -> Result<EntityClassifier, FormatError> {
    load_json::<ClassifierCheckpoint>(path)?.into_model()
}
