mod common;

use common::{generate, SynthConfig};
use globalizer::formats::{self, ClassifierCheckpoint, EmbedderCheckpoint, ExampleLine};
use globalizer_core::{EntityClassifier, PhraseEmbedder};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn stream_jsonl_round_trips() {
    for seed in 0..8 {
        let dim = (seed % 2 == 0).then_some(3);
        let stream = generate(&SynthConfig {
            entities: 5,
            mentions_per_entity: 4,
            embedding_dim: dim,
            noise_rate: 0.5,
            seed,
            ..SynthConfig::default()
        });
        let mut buf = Vec::new();
        formats::write_stream_jsonl(&mut buf, &stream.records).unwrap();
        let parsed = formats::parse_stream_jsonl(buf.as_slice()).unwrap();
        assert_eq!(parsed, stream.records);
        let mut again = Vec::new();
        formats::write_stream_jsonl(&mut again, &parsed).unwrap();
        assert_eq!(again, buf);
    }
}

#[test]
fn canonicalizes_label_spellings() {
    let raw =
        r#"{"tweet_id":"t","sentence_id":0,"tokens":["Andy","Beshear"],"bio":["B-PER","I-PER"]}"#;
    let parsed = formats::parse_stream_jsonl(raw.as_bytes()).unwrap();
    let mut out = Vec::new();
    formats::write_stream_jsonl(&mut out, &parsed).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.contains(r#"["B","I"]"#), "{text}");
    assert_eq!(
        formats::parse_stream_jsonl(text.as_bytes()).unwrap(),
        parsed
    );
}

#[test]
fn gold_round_trips() {
    let stream = generate(&SynthConfig {
        entities: 6,
        mentions_per_entity: 3,
        ..SynthConfig::default()
    });
    let dir = tempfile::tempdir().unwrap();
    stream.write(dir.path());
    let gold =
        formats::parse_mentions_jsonl(formats::open(&dir.path().join("gold.jsonl")).unwrap())
            .unwrap();
    assert_eq!(gold, stream.gold);
}

#[test]
fn checkpoints_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let embedder = PhraseEmbedder::random(5, 4, &mut rng);
    let classifier = EntityClassifier::random(5, &[6, 3], &mut rng);
    let (ep, cp) = (dir.path().join("e.json"), dir.path().join("c.json"));
    formats::save_json(&ep, &EmbedderCheckpoint::from_model(&embedder)).unwrap();
    formats::save_json(&cp, &ClassifierCheckpoint::from_model(&classifier)).unwrap();
    assert_eq!(formats::load_embedder(&ep).unwrap(), embedder);
    assert_eq!(formats::load_classifier(&cp).unwrap(), classifier);
    assert!(formats::load_classifier(&ep).is_err());
}

#[test]
fn examples_round_trip() {
    let lines = vec![
        ExampleLine {
            key: "andy beshear".into(),
            embedding: vec![0.25, 0.75],
            length: 12,
            label: 1,
        },
        ExampleLine {
            key: "lol".into(),
            embedding: vec![1.0, 0.0],
            length: 3,
            label: 0,
        },
    ];
    let mut buf = Vec::new();
    formats::write_examples_jsonl(&mut buf, &lines).unwrap();
    assert_eq!(
        formats::parse_examples_jsonl(buf.as_slice()).unwrap(),
        lines
    );
    let ex = lines[0].to_example();
    assert_eq!(ex.features, vec![0.25, 0.75, 12.0 / 32.0]);
    assert!(ex.label);
}
