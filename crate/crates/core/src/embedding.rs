//! Local candidate embeddings, the phrase embedder and its siamese trainer,
//! and the CandidateBase that pools local embeddings into global ones.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{self, COSINE_EPS};
use crate::optim::{Adam, AdamConfig};
use crate::text;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbeddingError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("phrase has no tokens")]
    EmptyPhrase,
    #[error("parameter shapes do not match d_in={d_in}, d_out={d_out}")]
    Shape { d_in: usize, d_out: usize },
    #[error("need at least {needed} training pairs, got {got}")]
    TooFewPairs { needed: usize, got: usize },
    #[error("similarity score {0} outside [0, 1]")]
    Score(f64),
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("candidate `{0}` has no such mention")]
    UnknownMention(String),
}

// ---------------------------------------------------------------------------
// Syntactic distribution

/// How a candidate mention is capitalized in its sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SyntacticCategory {
    ProperCap,
    StartOfSentenceCap,
    SubstringCap,
    FullCap,
    NoCap,
    NonDiscriminative,
}

impl SyntacticCategory {
    pub const COUNT: usize = 6;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn one_hot(self) -> Vec<f64> {
        let mut v = vec![0.0; Self::COUNT];
        v[self.index()] = 1.0;
        v
    }
}

fn informative(token: &str) -> bool {
    text::has_alphabetic(token) && !text::is_stream_markup(token)
}

/// The sentence is all uppercase, all lowercase, or title-cased throughout,
/// so capitalization says nothing about entities. Handles, hashtags and URLs
/// are ignored.
pub fn is_non_discriminative<S: AsRef<str>>(tokens: &[S]) -> bool {
    let words: Vec<&str> = tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| informative(t))
        .collect();
    words.iter().all(|t| text::is_all_upper(t))
        || words.iter().all(|t| text::is_all_lower(t))
        || words.iter().all(|t| text::is_initial_cap(t))
}

/// Category of the mention `tokens[start..end]`.
pub fn syntactic_category<S: AsRef<str>>(
    tokens: &[S],
    start: usize,
    end: usize,
) -> SyntacticCategory {
    use SyntacticCategory::*;
    if is_non_discriminative(tokens) {
        return NonDiscriminative;
    }
    let words: Vec<&str> = tokens[start..end]
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| text::has_alphabetic(t))
        .collect();
    if words.is_empty() {
        return NoCap;
    }
    if words.iter().all(|t| text::is_all_upper(t)) {
        return FullCap;
    }
    let capped = words.iter().filter(|t| text::is_initial_cap(t)).count();
    if capped == words.len() {
        return if end - start == 1 && start == 0 {
            StartOfSentenceCap
        } else {
            ProperCap
        };
    }
    if end - start > 1 && capped > 0 {
        return SubstringCap;
    }
    NoCap
}

// ---------------------------------------------------------------------------
// Phrase embedder

/// Mean-pools token embeddings and applies one affine layer:
/// `W · mean(tokens) + b`, with `W` of shape `d_out x d_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhraseEmbedder {
    d_in: usize,
    d_out: usize,
    /// Row-major `d_out x d_in`.
    w: Vec<f64>,
    b: Vec<f64>,
}

impl PhraseEmbedder {
    pub fn from_parts(
        d_in: usize,
        d_out: usize,
        w: Vec<f64>,
        b: Vec<f64>,
    ) -> Result<Self, EmbeddingError> {
        if d_in == 0 || d_out == 0 || w.len() != d_in * d_out || b.len() != d_out {
            return Err(EmbeddingError::Shape { d_in, d_out });
        }
        Ok(Self { d_in, d_out, w, b })
    }

    pub fn identity(d: usize) -> Self {
        let mut w = vec![0.0; d * d];
        for i in 0..d {
            w[i * d + i] = 1.0;
        }
        Self {
            d_in: d,
            d_out: d,
            w,
            b: vec![0.0; d],
        }
    }

    /// Uniform fan-based init for `W`, zero bias.
    pub fn random<R: Rng + ?Sized>(d_in: usize, d_out: usize, rng: &mut R) -> Self {
        let limit = libm::sqrt(6.0 / (d_in + d_out) as f64);
        let w = (0..d_in * d_out)
            .map(|_| rng.gen_range(-limit..=limit))
            .collect();
        Self {
            d_in,
            d_out,
            w,
            b: vec![0.0; d_out],
        }
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn bias(&self) -> &[f64] {
        &self.b
    }

    /// Affine map of an already pooled vector.
    pub fn apply(&self, pooled: &[f64]) -> Result<Vec<f64>, EmbeddingError> {
        if pooled.len() != self.d_in {
            return Err(EmbeddingError::Dimension {
                expected: self.d_in,
                found: pooled.len(),
            });
        }
        let mut out = linalg::matvec(&self.w, self.d_out, pooled);
        out.iter_mut().zip(&self.b).for_each(|(o, b)| *o += b);
        Ok(out)
    }

    /// Embeds a phrase from its token embeddings.
    pub fn embed<V: AsRef<[f64]>>(&self, token_embs: &[V]) -> Result<Vec<f64>, EmbeddingError> {
        if token_embs.is_empty() {
            return Err(EmbeddingError::EmptyPhrase);
        }
        if let Some(bad) = token_embs.iter().find(|v| v.as_ref().len() != self.d_in) {
            return Err(EmbeddingError::Dimension {
                expected: self.d_in,
                found: bad.as_ref().len(),
            });
        }
        let pooled = linalg::mean(token_embs).ok_or(EmbeddingError::EmptyPhrase)?;
        self.apply(&pooled)
    }

    fn is_finite(&self) -> bool {
        self.w.iter().chain(&self.b).all(|x| x.is_finite())
    }
}

/// Two phrases (as token embeddings) and their similarity in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhrasePair {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub score: f64,
}

/// A pair after mean pooling. The upstream token embeddings are fixed, so
/// pooling happens once before training.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledPair {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub score: f64,
}

impl PhrasePair {
    pub fn pooled(&self) -> Result<PooledPair, EmbeddingError> {
        if !(0.0..=1.0).contains(&self.score) {
            return Err(EmbeddingError::Score(self.score));
        }
        let a = linalg::mean(&self.a).ok_or(EmbeddingError::EmptyPhrase)?;
        let b = linalg::mean(&self.b).ok_or(EmbeddingError::EmptyPhrase)?;
        if a.len() != b.len() {
            return Err(EmbeddingError::Dimension {
                expected: a.len(),
                found: b.len(),
            });
        }
        Ok(PooledPair {
            a,
            b,
            score: self.score,
        })
    }
}

/// Gradients of the siamese loss, laid out like the embedder's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SiameseGrad {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

/// `mean((cos(f(a), f(b)) - score)^2)` over the pairs.
pub fn siamese_loss(
    embedder: &PhraseEmbedder,
    pairs: &[PooledPair],
) -> Result<f64, EmbeddingError> {
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for p in pairs {
        let u = embedder.apply(&p.a)?;
        let v = embedder.apply(&p.b)?;
        let diff = linalg::cosine(&u, &v) - p.score;
        total += diff * diff;
    }
    Ok(total / pairs.len() as f64)
}

/// Loss and its gradient w.r.t. `W` and `b`. Both branches share the same
/// parameters, so their contributions are summed.
pub fn siamese_loss_and_grad(
    embedder: &PhraseEmbedder,
    pairs: &[PooledPair],
) -> Result<(f64, SiameseGrad), EmbeddingError> {
    let (d_in, d_out) = (embedder.d_in, embedder.d_out);
    let mut grad = SiameseGrad {
        w: vec![0.0; d_in * d_out],
        b: vec![0.0; d_out],
    };
    if pairs.is_empty() {
        return Ok((0.0, grad));
    }
    let n = pairs.len() as f64;
    let mut total = 0.0;
    for p in pairs {
        let u = embedder.apply(&p.a)?;
        let v = embedder.apply(&p.b)?;
        let (nu, nv) = (linalg::norm(&u), linalg::norm(&v));
        if nu < COSINE_EPS || nv < COSINE_EPS {
            // cosine pinned to 0, no gradient through it
            total += p.score * p.score;
            continue;
        }
        let cos = linalg::dot(&u, &v) / (nu * nv);
        let diff = cos - p.score;
        total += diff * diff;
        let scale = 2.0 * diff / n;
        for r in 0..d_out {
            // d cos / d u_r = v_r/(|u||v|) - cos * u_r/|u|^2, symmetric for v
            let gu = scale * (v[r] / (nu * nv) - cos * u[r] / (nu * nu));
            let gv = scale * (u[r] / (nu * nv) - cos * v[r] / (nv * nv));
            grad.b[r] += gu + gv;
            let row = &mut grad.w[r * d_in..(r + 1) * d_in];
            for ((gw, a), b) in row.iter_mut().zip(&p.a).zip(&p.b) {
                *gw += gu * a + gv * b;
            }
        }
    }
    Ok((total / n, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhraseTrainConfig {
    pub d_out: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many epochs without a lower validation loss.
    pub patience: usize,
    /// Held-out share when no explicit validation set is given.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for PhraseTrainConfig {
    fn default() -> Self {
        Self {
            d_out: 300,
            learning_rate: 0.001,
            batch_size: 32,
            max_epochs: 1000,
            patience: 25,
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_validation_loss: f64,
    pub stopped_early: bool,
}

/// Splits `items` with a seeded shuffle into (train, validation).
pub(crate) fn split_validation<T: Clone>(
    items: &[T],
    fraction: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<T>, Vec<T>) {
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.shuffle(rng);
    let n_val = ((items.len() as f64 * fraction) as usize).clamp(1, items.len() - 1);
    let val = idx[..n_val].iter().map(|&i| items[i].clone()).collect();
    let train = idx[n_val..].iter().map(|&i| items[i].clone()).collect();
    (train, val)
}

/// Siamese regression training of the phrase embedder with Adam and early
/// stopping. The token embeddings are read-only inputs; only `W` and `b`
/// are learned. Returns the parameters of the best validation epoch.
pub fn train_phrase_embedder(
    train: &[PhrasePair],
    validation: Option<&[PhrasePair]>,
    config: &PhraseTrainConfig,
    init: Option<PhraseEmbedder>,
) -> Result<(PhraseEmbedder, TrainingLog), EmbeddingError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let pool = |ps: &[PhrasePair]| {
        ps.iter()
            .map(PhrasePair::pooled)
            .collect::<Result<Vec<_>, _>>()
    };
    let (train_set, val_set) = match validation {
        Some(v) if !v.is_empty() => {
            if train.is_empty() {
                return Err(EmbeddingError::TooFewPairs { needed: 1, got: 0 });
            }
            (pool(train)?, pool(v)?)
        }
        _ => {
            if train.len() < 2 {
                return Err(EmbeddingError::TooFewPairs {
                    needed: 2,
                    got: train.len(),
                });
            }
            let pooled = pool(train)?;
            split_validation(&pooled, config.validation_fraction, &mut rng)
        }
    };
    let d_in = train_set[0].a.len();
    if let Some(bad) = train_set.iter().chain(&val_set).find(|p| p.a.len() != d_in) {
        return Err(EmbeddingError::Dimension {
            expected: d_in,
            found: bad.a.len(),
        });
    }

    let mut model = match init {
        Some(m) if m.d_in == d_in => m,
        Some(m) => {
            return Err(EmbeddingError::Dimension {
                expected: m.d_in,
                found: d_in,
            })
        }
        None => PhraseEmbedder::random(d_in, config.d_out, &mut rng),
    };
    let adam_cfg = AdamConfig::with_lr(config.learning_rate);
    let mut adam_w = Adam::new(adam_cfg, model.w.len());
    let mut adam_b = Adam::new(adam_cfg, model.b.len());

    let mut log = TrainingLog {
        best_validation_loss: siamese_loss(&model, &val_set)?,
        ..TrainingLog::default()
    };
    let mut best = model.clone();
    let mut stale = 0;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let batch_size = config.batch_size.max(1);
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch_size) {
            let batch: Vec<PooledPair> = chunk.iter().map(|&i| train_set[i].clone()).collect();
            let (loss, grad) = siamese_loss_and_grad(&model, &batch)?;
            if !loss.is_finite() {
                return Err(EmbeddingError::NonFiniteLoss { epoch });
            }
            epoch_loss += loss * batch.len() as f64;
            adam_w.step(&mut model.w, &grad.w);
            adam_b.step(&mut model.b, &grad.b);
        }
        let val_loss = siamese_loss(&model, &val_set)?;
        if !val_loss.is_finite() || !model.is_finite() {
            return Err(EmbeddingError::NonFiniteLoss { epoch });
        }
        log.epochs.push(EpochStats {
            epoch,
            train_loss: epoch_loss / train_set.len() as f64,
            validation_loss: val_loss,
        });
        if val_loss < log.best_validation_loss {
            log.best_validation_loss = val_loss;
            log.best_epoch = epoch;
            best = model.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                log.stopped_early = true;
                break;
            }
        }
    }
    Ok((best, log))
}

// ---------------------------------------------------------------------------
// CandidateBase

/// Classification state of a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelState {
    #[default]
    Unlabeled,
    Entity,
    NonEntity,
    Ambiguous,
}

impl LabelState {
    /// Entity and NonEntity are final for the rest of the run.
    pub fn is_settled(self) -> bool {
        matches!(self, LabelState::Entity | LabelState::NonEntity)
    }
}

/// Where a pooled mention came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct MentionLocator {
    pub tweet_id: String,
    pub sentence_id: u64,
    pub start: usize,
    pub end: usize,
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRecord {
    pub key: String,
    pub embedding_sum: Vec<f64>,
    pub mentions: Vec<MentionLocator>,
    pub label_state: LabelState,
    pub first_seen_batch: usize,
    /// Most recent classifier probability.
    pub last_probability: Option<f64>,
}

impl CandidateRecord {
    fn new(key: String, dim: usize, first_seen_batch: usize) -> Self {
        Self {
            key,
            embedding_sum: vec![0.0; dim],
            mentions: Vec::new(),
            label_state: LabelState::Unlabeled,
            first_seen_batch,
            last_probability: None,
        }
    }

    pub fn mention_count(&self) -> usize {
        self.mentions.len()
    }

    /// Mean of the pooled local embeddings.
    pub fn global_embedding(&self) -> Option<Vec<f64>> {
        let n = self.mentions.len();
        (n > 0).then(|| self.embedding_sum.iter().map(|s| s / n as f64).collect())
    }
}

/// Per-candidate aggregates keyed by folded candidate string.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateBase {
    dim: usize,
    records: BTreeMap<String, CandidateRecord>,
}

impl CandidateBase {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            records: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&CandidateRecord> {
        self.records.get(key)
    }

    pub fn get_mut(&mut self, key: &str) -> Option<&mut CandidateRecord> {
        self.records.get_mut(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = &CandidateRecord> {
        self.records.values()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut CandidateRecord> {
        self.records.values_mut()
    }

    /// Registers a candidate with an empty pool if it is not known yet.
    pub fn ensure(&mut self, key: &str, first_seen_batch: usize) -> &mut CandidateRecord {
        let dim = self.dim;
        self.records
            .entry(String::from(key))
            .or_insert_with(|| CandidateRecord::new(String::from(key), dim, first_seen_batch))
    }

    /// Adds one mention's local embedding to the candidate's pool.
    pub fn update_global(
        &mut self,
        key: &str,
        local: &[f64],
        mention: MentionLocator,
    ) -> Result<&CandidateRecord, EmbeddingError> {
        if local.len() != self.dim {
            return Err(EmbeddingError::Dimension {
                expected: self.dim,
                found: local.len(),
            });
        }
        let rec = self.ensure(key, 0);
        rec.embedding_sum
            .iter_mut()
            .zip(local)
            .for_each(|(s, x)| *s += x);
        rec.mentions.push(mention);
        Ok(rec)
    }

    /// Removes a mention previously added with the same locator span.
    pub fn retract(
        &mut self,
        key: &str,
        local: &[f64],
        mention: &MentionLocator,
    ) -> Result<(), EmbeddingError> {
        if local.len() != self.dim {
            return Err(EmbeddingError::Dimension {
                expected: self.dim,
                found: local.len(),
            });
        }
        let rec = self
            .records
            .get_mut(key)
            .ok_or_else(|| EmbeddingError::UnknownMention(key.into()))?;
        let pos = rec
            .mentions
            .iter()
            .position(|m| {
                m.tweet_id == mention.tweet_id
                    && m.sentence_id == mention.sentence_id
                    && m.start == mention.start
                    && m.end == mention.end
            })
            .ok_or_else(|| EmbeddingError::UnknownMention(key.into()))?;
        rec.mentions.remove(pos);
        if rec.mentions.is_empty() {
            rec.embedding_sum.iter_mut().for_each(|s| *s = 0.0);
        } else {
            rec.embedding_sum
                .iter_mut()
                .zip(local)
                .for_each(|(s, x)| *s -= x);
        }
        Ok(())
    }
}
