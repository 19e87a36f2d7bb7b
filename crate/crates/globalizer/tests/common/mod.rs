//! Seeded synthetic streams with known entities, plus the shared oracles.
#![allow(dead_code)]

#[path = "../../../core/tests/common/mod.rs"]
pub mod oracles;

use std::collections::BTreeSet;
use std::path::Path;

use globalizer::formats::{self, MentionEntry, MentionLine};
use globalizer_core::{BioTag, SentenceRecord};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SYLLABLES: [&str; 20] = [
    "ka", "vo", "re", "li", "su", "na", "tor", "mi", "zel", "bra", "qui", "don", "fa", "jo", "pel",
    "xan", "gri", "hu", "wen", "yas",
];

const FILLER: [&str; 40] = [
    "the", "people", "said", "today", "was", "very", "good", "news", "about", "from", "in", "on",
    "we", "need", "more", "tests", "and", "cases", "rise", "again", "this", "week", "after",
    "update", "says", "new", "rules", "for", "schools", "will", "open", "soon", "with", "masks",
    "stay", "home", "please", "thanks", "to", "all",
];

const NOISE: [&str; 10] = [
    "big", "day", "wow", "lol", "huge", "crowd", "late", "night", "omg", "yes",
];

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub entities: usize,
    pub mentions_per_entity: usize,
    /// Share of each entity's mentions the simulated tagger marks (at least one).
    pub tagged_fraction: f64,
    /// Chance that a sentence also carries a tagged noise phrase.
    pub noise_rate: f64,
    pub embedding_dim: Option<usize>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            entities: 50,
            mentions_per_entity: 10,
            tagged_fraction: 0.3,
            noise_rate: 0.1,
            embedding_dim: None,
            seed: 17,
        }
    }
}

pub struct SynthStream {
    pub records: Vec<SentenceRecord>,
    pub gold: Vec<MentionLine>,
    /// Folded entity names.
    pub entity_keys: BTreeSet<String>,
}

impl SynthStream {
    /// Probability 1 for true entities and 0 for everything else.
    pub fn oracle(&self) -> impl Fn(&str, &[f64]) -> f64 + '_ {
        move |key: &str, _: &[f64]| {
            if self.entity_keys.contains(key) {
                1.0
            } else {
                0.0
            }
        }
    }

    pub fn local_mention_count(&self) -> usize {
        self.records
            .iter()
            .filter_map(|r| r.bio_labels())
            .map(|l| l.iter().filter(|t| **t == BioTag::B).count())
            .sum()
    }

    /// Writes `stream.jsonl` and `gold.jsonl` into `dir`.
    pub fn write(&self, dir: &Path) {
        let mut stream = Vec::new();
        formats::write_stream_jsonl(&mut stream, &self.records).unwrap();
        std::fs::write(dir.join("stream.jsonl"), stream).unwrap();
        let gold: String = self
            .gold
            .iter()
            .map(|l| serde_json::to_string(l).unwrap() + "\n")
            .collect();
        std::fs::write(dir.join("gold.jsonl"), gold).unwrap();
    }
}

fn entity_name(i: usize) -> [String; 2] {
    let s = |j: usize| SYLLABLES[j % 20];
    let cap = |w: String| {
        let mut c = w.chars();
        c.next()
            .map(|f| f.to_uppercase().chain(c).collect())
            .unwrap_or_default()
    };
    [
        cap(format!("{}{}{}", s(i), s(i / 20), s(i / 400))),
        cap(format!("{}{}n", s(i * 7 + 3), s(i / 20 + 11))),
    ]
}

fn token_vector(token: &str, dim: usize) -> Vec<f64> {
    let seed = token
        .to_lowercase()
        .bytes()
        .fold(1469598103934665603u64, |h, b| {
            (h ^ u64::from(b)).wrapping_mul(1099511628211)
        });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn generate(cfg: &SynthConfig) -> SynthStream {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let names: Vec<[String; 2]> = (0..cfg.entities).map(entity_name).collect();
    let entity_keys = names
        .iter()
        .map(|n| format!("{} {}", n[0], n[1]).to_lowercase())
        .collect();

    // (entity, tagged) per mention, in stream order
    let mut mentions = Vec::new();
    let tagged = ((cfg.mentions_per_entity as f64 * cfg.tagged_fraction).round() as usize)
        .clamp(1, cfg.mentions_per_entity);
    for e in 0..cfg.entities {
        let picked: BTreeSet<usize> = index::sample(&mut rng, cfg.mentions_per_entity, tagged)
            .into_iter()
            .collect();
        mentions.extend((0..cfg.mentions_per_entity).map(|m| (e, picked.contains(&m))));
    }
    mentions.shuffle(&mut rng);

    let mut records = Vec::with_capacity(mentions.len());
    let mut gold = Vec::with_capacity(mentions.len());
    for (idx, (e, is_tagged)) in mentions.into_iter().enumerate() {
        let mut tokens: Vec<String> = Vec::new();
        let mut bio = Vec::new();
        for _ in 0..rng.gen_range(1..5) {
            tokens.push(FILLER.choose(&mut rng).unwrap().to_string());
            bio.push(BioTag::O);
        }
        let start = tokens.len();
        let style = rng.gen_range(0..10);
        for (j, part) in names[e].iter().enumerate() {
            tokens.push(match style {
                0..=5 => part.clone(),
                6 | 7 => part.to_uppercase(),
                _ => part.to_lowercase(),
            });
            bio.push(match (is_tagged, j) {
                (false, _) => BioTag::O,
                (true, 0) => BioTag::B,
                (true, _) => BioTag::I,
            });
        }
        let end = tokens.len();
        for _ in 0..rng.gen_range(1..5) {
            tokens.push(FILLER.choose(&mut rng).unwrap().to_string());
            bio.push(BioTag::O);
        }
        if rng.gen_bool(cfg.noise_rate) {
            let pair = NOISE.choose_multiple(&mut rng, 2).collect::<Vec<_>>();
            tokens.extend([pair[0].to_string(), pair[1].to_string()]);
            bio.extend([BioTag::B, BioTag::I]);
        }
        let embeddings = cfg
            .embedding_dim
            .map(|d| tokens.iter().map(|t| token_vector(t, d)).collect());
        let (tweet_id, sentence_id) = (format!("tw{}", idx / 2), (idx % 2) as u64);
        gold.push(MentionLine {
            tweet_id: tweet_id.clone(),
            sentence_id,
            mentions: vec![MentionEntry {
                start,
                end,
                surface: tokens[start..end].join(" "),
                candidate_key: None,
            }],
        });
        records.push(
            SentenceRecord::new(tweet_id, sentence_id, tokens, Some(bio), embeddings).unwrap(),
        );
    }
    SynthStream {
        records,
        gold,
        entity_keys,
    }
}
