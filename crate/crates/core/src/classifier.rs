//! Entity classifier over global candidate embeddings.
//!
//! A ReLU feed-forward network with a single sigmoid output. Its input is the
//! candidate's pooled embedding with one extra length feature appended.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embedding::{split_validation, CandidateBase, EpochStats, LabelState, TrainingLog};
use crate::linalg::{self, sigmoid, softplus};
use crate::optim::{Adam, AdamConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClassifierError {
    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("layer {layer} has inconsistent shape")]
    Shape { layer: usize },
    #[error("need at least {needed} training examples, got {got}")]
    TooFewExamples { needed: usize, got: usize },
    #[error("training set contains a single class")]
    SingleClass,
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("thresholds must satisfy 0 < beta < alpha < 1 (alpha={alpha}, beta={beta})")]
    Thresholds { alpha: f64, beta: f64 },
}

/// Three-way decision from the entity probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Entity,
    NonEntity,
    Ambiguous,
}

/// How candidates still ambiguous at the end of the stream are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AmbiguousPolicy {
    #[default]
    NonEntity,
    Entity,
}

impl FromStr for AmbiguousPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "non-entity" | "nonentity" => Ok(Self::NonEntity),
            "entity" => Ok(Self::Entity),
            other => Err(alloc::format!("unknown ambiguous policy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierConfig {
    /// `p >= alpha` is an entity.
    pub alpha: f64,
    /// `p <= beta` is a non-entity.
    pub beta: f64,
    pub ambiguous_final_policy: AmbiguousPolicy,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            alpha: 0.55,
            beta: 0.40,
            ambiguous_final_policy: AmbiguousPolicy::NonEntity,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let ok = 0.0 < self.beta && self.beta < self.alpha && self.alpha < 1.0;
        if ok {
            Ok(())
        } else {
            Err(ClassifierError::Thresholds {
                alpha: self.alpha,
                beta: self.beta,
            })
        }
    }

    pub fn label(&self, p: f64) -> Label {
        if p >= self.alpha {
            Label::Entity
        } else if p <= self.beta {
            Label::NonEntity
        } else {
            Label::Ambiguous
        }
    }
}

/// [`ClassifierConfig::label`] with the default thresholds.
pub fn label(p: f64) -> Label {
    ClassifierConfig::default().label(p)
}

/// Length of the candidate string in characters over 32, capped at 1.
pub fn length_feature(key: &str) -> f64 {
    (key.chars().count() as f64 / 32.0).min(1.0)
}

/// Classifier input: global embedding followed by the length feature.
pub fn candidate_features(global_embedding: &[f64], key: &str) -> Vec<f64> {
    let mut f = Vec::with_capacity(global_embedding.len() + 1);
    f.extend_from_slice(global_embedding);
    f.push(length_feature(key));
    f
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierExample {
    pub features: Vec<f64>,
    pub label: bool,
}

/// Fully connected layer, `w` row-major `rows x cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    fn random<R: Rng + ?Sized>(cols: usize, rows: usize, rng: &mut R) -> Self {
        let limit = libm::sqrt(6.0 / (rows + cols) as f64);
        let w = (0..rows * cols)
            .map(|_| rng.gen_range(-limit..=limit))
            .collect();
        Self {
            rows,
            cols,
            w,
            b: vec![0.0; rows],
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut z = linalg::matvec(&self.w, self.rows, x);
        z.iter_mut().zip(&self.b).for_each(|(z, b)| *z += b);
        z
    }
}

/// Anything that can produce an entity probability for a candidate.
pub trait CandidateScorer {
    fn score(&self, key: &str, features: &[f64]) -> Result<f64, ClassifierError>;
}

impl<F> CandidateScorer for F
where
    F: Fn(&str, &[f64]) -> f64,
{
    fn score(&self, key: &str, features: &[f64]) -> Result<f64, ClassifierError> {
        Ok(self(key, features))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityClassifier {
    layers: Vec<Dense>,
}

/// Per-layer gradients, same shapes as the layers.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl EntityClassifier {
    /// Random init: hidden ReLU layers of `hidden` widths and a scalar output.
    pub fn random<R: Rng + ?Sized>(input_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut cols = input_dim;
        for &h in hidden {
            layers.push(Dense::random(cols, h, rng));
            cols = h;
        }
        layers.push(Dense::random(cols, 1, rng));
        Self { layers }
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self, ClassifierError> {
        if layers.is_empty() {
            return Err(ClassifierError::Shape { layer: 0 });
        }
        for (i, l) in layers.iter().enumerate() {
            let chained = i == 0 || layers[i - 1].rows == l.cols;
            if l.rows == 0
                || l.cols == 0
                || l.w.len() != l.rows * l.cols
                || l.b.len() != l.rows
                || !chained
            {
                return Err(ClassifierError::Shape { layer: i });
            }
        }
        if layers[layers.len() - 1].rows != 1 {
            return Err(ClassifierError::Shape {
                layer: layers.len() - 1,
            });
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    /// Pre-sigmoid output.
    pub fn logit(&self, features: &[f64]) -> Result<f64, ClassifierError> {
        self.check(features)?;
        let mut x = features.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(&x);
            if i < last {
                x.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        Ok(x[0])
    }

    /// Entity probability.
    pub fn forward(&self, features: &[f64]) -> Result<f64, ClassifierError> {
        self.logit(features).map(sigmoid)
    }

    fn check(&self, features: &[f64]) -> Result<(), ClassifierError> {
        if features.len() != self.input_dim() {
            return Err(ClassifierError::Dimension {
                expected: self.input_dim(),
                found: features.len(),
            });
        }
        Ok(())
    }

    /// Mean binary cross-entropy over `examples`.
    pub fn loss(&self, examples: &[ClassifierExample]) -> Result<f64, ClassifierError> {
        if examples.is_empty() {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for ex in examples {
            let z = self.logit(&ex.features)?;
            total += softplus(z) - if ex.label { z } else { 0.0 };
        }
        Ok(total / examples.len() as f64)
    }

    /// Mean binary cross-entropy and its gradient by backpropagation.
    pub fn loss_and_grad(
        &self,
        examples: &[ClassifierExample],
    ) -> Result<(f64, Vec<LayerGrad>), ClassifierError> {
        let mut grads: Vec<LayerGrad> = self
            .layers
            .iter()
            .map(|l| LayerGrad {
                w: vec![0.0; l.w.len()],
                b: vec![0.0; l.b.len()],
            })
            .collect();
        if examples.is_empty() {
            return Ok((0.0, grads));
        }
        let n = examples.len() as f64;
        let last = self.layers.len() - 1;
        let mut total = 0.0;
        for ex in examples {
            self.check(&ex.features)?;
            // activations[i] is the input to layer i
            let mut activations: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len() + 1);
            activations.push(ex.features.clone());
            let mut pre: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
            for (i, layer) in self.layers.iter().enumerate() {
                let z = layer.forward(&activations[i]);
                let a = if i < last {
                    z.iter().map(|v| v.max(0.0)).collect()
                } else {
                    z.clone()
                };
                pre.push(z);
                activations.push(a);
            }
            let z = pre[last][0];
            let y = if ex.label { 1.0 } else { 0.0 };
            total += softplus(z) - y * z;

            let mut delta = vec![(sigmoid(z) - y) / n];
            for i in (0..self.layers.len()).rev() {
                let layer = &self.layers[i];
                let input = &activations[i];
                let g = &mut grads[i];
                for (r, d) in delta.iter().enumerate() {
                    g.b[r] += d;
                    let row = &mut g.w[r * layer.cols..(r + 1) * layer.cols];
                    for (gw, x) in row.iter_mut().zip(input) {
                        *gw += d * x;
                    }
                }
                if i == 0 {
                    break;
                }
                let mut next = vec![0.0; layer.cols];
                for (d, row) in delta.iter().zip(layer.w.chunks_exact(layer.cols)) {
                    for (nd, w) in next.iter_mut().zip(row) {
                        *nd += d * w;
                    }
                }
                for (nd, z) in next.iter_mut().zip(&pre[i - 1]) {
                    if *z <= 0.0 {
                        *nd = 0.0;
                    }
                }
                delta = next;
            }
        }
        Ok((total / n, grads))
    }

    fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(&l.b).all(|x| x.is_finite()))
    }
}

impl CandidateScorer for EntityClassifier {
    fn score(&self, _key: &str, features: &[f64]) -> Result<f64, ClassifierError> {
        self.forward(features)
    }
}

/// Scores every candidate that has pooled mentions and is not settled yet.
/// Confident labels are sticky; ambiguous ones are re-scored next time and
/// resolved by the configured policy when `is_final` is set. Returns the
/// candidates whose state changed, in key order.
pub fn classify_batch<S: CandidateScorer + ?Sized>(
    base: &mut CandidateBase,
    scorer: &S,
    config: &ClassifierConfig,
    is_final: bool,
) -> Result<Vec<(String, LabelState)>, ClassifierError> {
    let mut changed = Vec::new();
    for rec in base.iter_mut() {
        if rec.label_state.is_settled() {
            continue;
        }
        let Some(global) = rec.global_embedding() else {
            continue;
        };
        let features = candidate_features(&global, &rec.key);
        let p = scorer.score(&rec.key, &features)?;
        rec.last_probability = Some(p);
        let state = match config.label(p) {
            Label::Entity => LabelState::Entity,
            Label::NonEntity => LabelState::NonEntity,
            Label::Ambiguous if is_final => match config.ambiguous_final_policy {
                AmbiguousPolicy::Entity => LabelState::Entity,
                AmbiguousPolicy::NonEntity => LabelState::NonEntity,
            },
            Label::Ambiguous => LabelState::Ambiguous,
        };
        if state != rec.label_state {
            rec.label_state = state;
            changed.push((rec.key.clone(), state));
        }
    }
    Ok(changed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierTrainConfig {
    pub hidden_sizes: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a lower validation loss before stopping.
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for ClassifierTrainConfig {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![64, 32],
            learning_rate: 0.0015,
            batch_size: 128,
            max_epochs: 1000,
            patience: 20,
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierTrainReport {
    pub log: TrainingLog,
    /// F1 of the returned checkpoint on the validation split (p >= 0.5).
    pub best_validation_f1: f64,
}

/// Binary F1 of `model` on `examples` at the 0.5 decision threshold.
pub fn binary_f1(
    model: &EntityClassifier,
    examples: &[ClassifierExample],
) -> Result<f64, ClassifierError> {
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for ex in examples {
        let predicted = model.forward(&ex.features)? >= 0.5;
        match (predicted, ex.label) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    let denom = 2 * tp + fp + fneg;
    Ok(if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    })
}

/// Trains with Adam on binary cross-entropy over a seeded split and keeps
/// the checkpoint with the lowest validation loss.
pub fn train_classifier(
    examples: &[ClassifierExample],
    config: &ClassifierTrainConfig,
) -> Result<(EntityClassifier, ClassifierTrainReport), ClassifierError> {
    if examples.len() < 10 {
        return Err(ClassifierError::TooFewExamples {
            needed: 10,
            got: examples.len(),
        });
    }
    let positives = examples.iter().filter(|e| e.label).count();
    if positives == 0 || positives == examples.len() {
        return Err(ClassifierError::SingleClass);
    }
    let dim = examples[0].features.len();
    if let Some(bad) = examples.iter().find(|e| e.features.len() != dim) {
        return Err(ClassifierError::Dimension {
            expected: dim,
            found: bad.features.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (train, val) = split_validation(examples, config.validation_fraction, &mut rng);
    let mut model = EntityClassifier::random(dim, &config.hidden_sizes, &mut rng);
    let adam_cfg = AdamConfig::with_lr(config.learning_rate);
    let mut optimizers: Vec<(Adam, Adam)> = model
        .layers
        .iter()
        .map(|l| {
            (
                Adam::new(adam_cfg, l.w.len()),
                Adam::new(adam_cfg, l.b.len()),
            )
        })
        .collect();

    let mut log = TrainingLog {
        best_validation_loss: model.loss(&val)?,
        ..TrainingLog::default()
    };
    let mut best = model.clone();
    let mut stale = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let batch_size = config.batch_size.max(1);
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch_size) {
            let batch: Vec<ClassifierExample> = chunk.iter().map(|&i| train[i].clone()).collect();
            let (loss, grads) = model.loss_and_grad(&batch)?;
            if !loss.is_finite() {
                return Err(ClassifierError::NonFiniteLoss { epoch });
            }
            epoch_loss += loss * batch.len() as f64;
            for ((layer, g), (ow, ob)) in model.layers.iter_mut().zip(&grads).zip(&mut optimizers) {
                ow.step(&mut layer.w, &g.w);
                ob.step(&mut layer.b, &g.b);
            }
        }
        let val_loss = model.loss(&val)?;
        if !val_loss.is_finite() || !model.is_finite() {
            return Err(ClassifierError::NonFiniteLoss { epoch });
        }
        log.epochs.push(EpochStats {
            epoch,
            train_loss: epoch_loss / train.len() as f64,
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
    let best_validation_f1 = binary_f1(&best, &val)?;
    Ok((
        best,
        ClassifierTrainReport {
            log,
            best_validation_f1,
        },
    ))
}
