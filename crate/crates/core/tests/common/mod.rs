//! Reference implementations written independently of the library code,
//! used as oracles by the property and acceptance tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use globalizer_core::BioTag;

pub fn fold_key<S: AsRef<str>>(tokens: &[S]) -> String {
    tokens
        .iter()
        .map(|t| t.as_ref().to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Enumerates every substring, keeps the ones whose folded form is a key,
/// then picks leftmost-longest non-overlapping spans.
pub fn brute_force_scan<S: AsRef<str>>(
    tokens: &[S],
    keys: &BTreeSet<String>,
) -> Vec<(usize, usize)> {
    let n = tokens.len();
    let mut hits = Vec::new();
    for s in 0..n {
        for e in s + 1..=n {
            if keys.contains(&fold_key(&tokens[s..e])) {
                hits.push((s, e));
            }
        }
    }
    // leftmost first, longest first among equal starts
    hits.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
    let mut out: Vec<(usize, usize)> = Vec::new();
    let mut free_from = 0;
    for (s, e) in hits {
        if s >= free_from {
            out.push((s, e));
            free_from = e;
        }
    }
    out
}

/// A span starts at every B, and at an I that follows O or the sentence
/// start; it runs over the I tags that follow.
pub fn decode_bio_oracle(tags: &[BioTag]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for t in 0..tags.len() {
        let starts = match tags[t] {
            BioTag::B => true,
            BioTag::I => t == 0 || tags[t - 1] == BioTag::O,
            BioTag::O => false,
        };
        if starts {
            let mut e = t + 1;
            while e < tags.len() && tags[e] == BioTag::I {
                e += 1;
            }
            out.push((t, e));
        }
    }
    out
}

/// Elementwise mean of the token vectors, then `W x + b` with `W` row-major.
pub fn mean_then_affine(w: &[f64], b: &[f64], tokens: &[Vec<f64>]) -> Vec<f64> {
    let d_in = tokens[0].len();
    let mut pooled = vec![0.0; d_in];
    for t in tokens {
        for j in 0..d_in {
            pooled[j] += t[j];
        }
    }
    for p in &mut pooled {
        *p /= tokens.len() as f64;
    }
    (0..b.len())
        .map(|r| b[r] + (0..d_in).map(|c| w[r * d_in + c] * pooled[c]).sum::<f64>())
        .collect()
}

/// `(rows, cols, w, b)` per layer, ReLU between layers, sigmoid on the
/// scalar output.
pub fn mlp_oracle(layers: &[(usize, usize, Vec<f64>, Vec<f64>)], x: &[f64]) -> f64 {
    let mut a = x.to_vec();
    for (i, (rows, cols, w, b)) in layers.iter().enumerate() {
        let mut z = vec![0.0; *rows];
        for r in 0..*rows {
            z[r] = b[r];
            for c in 0..*cols {
                z[r] += w[r * cols + c] * a[c];
            }
        }
        if i + 1 < layers.len() {
            for v in &mut z {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        a = z;
    }
    1.0 / (1.0 + (-a[0]).exp())
}

/// Central difference of `f` with respect to `params[i]`.
pub fn central_difference(
    params: &mut [f64],
    i: usize,
    h: f64,
    mut f: impl FnMut(&[f64]) -> f64,
) -> f64 {
    let x = params[i];
    params[i] = x + h;
    let up = f(params);
    params[i] = x - h;
    let down = f(params);
    params[i] = x;
    (up - down) / (2.0 * h)
}

/// Relative error with a small absolute floor for gradients near zero.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-7)
}

fn random_vec(rng: &mut impl rand::Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Largest relative error between the analytic siamese gradient and central
/// differences, over every parameter of a random 4 -> 3 embedder on three
/// random pairs.
pub fn siamese_gradient_error(seed: u64) -> f64 {
    use globalizer_core::embedding::{siamese_loss, siamese_loss_and_grad, PooledPair};
    use globalizer_core::PhraseEmbedder;
    use rand::{Rng, SeedableRng};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (d_in, d_out) = (4, 3);
    let pairs: Vec<PooledPair> = (0..3)
        .map(|_| PooledPair {
            a: random_vec(&mut rng, d_in),
            b: random_vec(&mut rng, d_in),
            score: rng.gen_range(0.0..1.0),
        })
        .collect();
    let w = random_vec(&mut rng, d_in * d_out);
    let b = random_vec(&mut rng, d_out);
    let e = PhraseEmbedder::from_parts(d_in, d_out, w, b).unwrap();
    let (_, grad) = siamese_loss_and_grad(&e, &pairs).unwrap();
    let analytic: Vec<f64> = grad.w.iter().chain(&grad.b).copied().collect();
    let mut params: Vec<f64> = e.weights().iter().chain(e.bias()).copied().collect();
    let split = d_in * d_out;
    let loss = |p: &[f64]| {
        let m = PhraseEmbedder::from_parts(d_in, d_out, p[..split].to_vec(), p[split..].to_vec())
            .unwrap();
        siamese_loss(&m, &pairs).unwrap()
    };
    (0..params.len())
        .map(|i| relative_error(analytic[i], central_difference(&mut params, i, 1e-5, loss)))
        .fold(0.0, f64::max)
}

/// Same check for binary cross-entropy through a 3 -> 4 -> 3 -> 1 ReLU
/// network on a handful of random examples.
pub fn classifier_gradient_error(seed: u64) -> f64 {
    use globalizer_core::classifier::Dense;
    use globalizer_core::{ClassifierExample, EntityClassifier};
    use rand::{Rng, SeedableRng};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let model = EntityClassifier::random(3, &[4, 3], &mut rng);
    // non-zero biases so that the bias gradients are exercised everywhere
    let layers: Vec<Dense> = model
        .layers()
        .iter()
        .map(|l| Dense {
            b: random_vec(&mut rng, l.rows),
            ..l.clone()
        })
        .collect();
    let model = EntityClassifier::from_layers(layers.clone()).unwrap();
    let examples: Vec<ClassifierExample> = (0..6)
        .map(|_| ClassifierExample {
            features: random_vec(&mut rng, 3),
            label: rng.gen_bool(0.5),
        })
        .collect();
    let (_, grads) = model.loss_and_grad(&examples).unwrap();
    let analytic: Vec<f64> = grads
        .iter()
        .flat_map(|g| g.w.iter().chain(&g.b))
        .copied()
        .collect();
    let mut params: Vec<f64> = layers
        .iter()
        .flat_map(|l| l.w.iter().chain(&l.b))
        .copied()
        .collect();
    let loss = |p: &[f64]| {
        let mut at = 0;
        let rebuilt: Vec<Dense> = layers
            .iter()
            .map(|l| {
                let w = p[at..at + l.w.len()].to_vec();
                at += l.w.len();
                let b = p[at..at + l.b.len()].to_vec();
                at += l.b.len();
                Dense { w, b, ..l.clone() }
            })
            .collect();
        EntityClassifier::from_layers(rebuilt)
            .unwrap()
            .loss(&examples)
            .unwrap()
    };
    (0..params.len())
        .map(|i| relative_error(analytic[i], central_difference(&mut params, i, 1e-5, loss)))
        .fold(0.0, f64::max)
}
