#![allow(dead_code)]

use std::collections::BTreeMap;

use eigenscore::trace::{ModelMeta, SamplingParams};
use eigenscore::{Generation, GenerationTrace, TokenMatrix};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const WORDS: &[&str] = &["paris", "Lyon", "über", "北京", "x", "the", "42", "café", "naïve", ""];

pub fn meta(d: usize, num_layers: usize) -> ModelMeta {
    ModelMeta {
        name: "test-model".into(),
        num_layers,
        hidden_dim: d,
        sampling: SamplingParams {
            temperature: Some(0.5),
            top_p: Some(0.99),
            top_k: Some(5),
            seed: Some(1),
        },
    }
}

fn text(rng: &mut ChaCha8Rng, words: usize) -> String {
    (0..words).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

/// A structurally valid trace with random shapes, values and optional fields.
pub fn random_trace(rng: &mut ChaCha8Rng, id: &str, d: usize, layers: &[usize], num_layers: usize) -> GenerationTrace {
    let k = rng.random_range(2..=6);
    let with_energy = rng.random_bool(0.5);
    let with_embeddings = rng.random_bool(0.5);
    let n_truths = rng.random_range(1..=3);
    let generations = (0..k)
        .map(|_| {
            let t = rng.random_range(1..=5);
            let tokens: Vec<String> = (0..t).map(|i| format!("tok{i}-{}", rng.random_range(0..100))).collect();
            let hidden: BTreeMap<usize, TokenMatrix> = layers
                .iter()
                .map(|&l| {
                    let data = (0..t * d).map(|_| rng.random_range(-50.0f32..50.0)).collect();
                    (l, TokenMatrix::new(t, d, data).unwrap())
                })
                .collect();
            Generation {
                text: text(rng, t),
                tokens,
                logprobs: (0..t).map(|_| -rng.random_range(0.0f32..8.0)).collect(),
                energies: with_energy.then(|| (0..t).map(|_| rng.random_range(-30.0f32..0.0)).collect()),
                hidden,
                answer_embedding: with_embeddings.then(|| (0..8).map(|_| rng.random_range(-1.0f32..1.0)).collect()),
            }
        })
        .collect();
    GenerationTrace {
        id: id.to_owned(),
        question: format!("question {}?", text(rng, 3)),
        ground_truths: (0..n_truths).map(|_| text(rng, 2)).collect(),
        generations,
        model_meta: meta(d, num_layers),
        reference_embeddings: with_embeddings
            .then(|| (0..n_truths).map(|_| (0..8).map(|_| rng.random_range(-1.0f32..1.0)).collect()).collect()),
        label: match rng.random_range(0..3) {
            0 => None,
            1 => Some(true),
            _ => Some(false),
        },
    }
}
