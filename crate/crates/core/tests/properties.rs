//! Cross-module invariants checked on randomly generated traces.

mod common;

use eigenscore::spectral::{eigenscore_with, EigenConfig};
use eigenscore::trace::{LayerSelect, Reduction};
use eigenscore::{
    extract_embeddings, read_traces, write_traces, ClipMode, ClipState, EmbeddingPolicy, GenerationTrace, Scorer,
    ScoringConfig,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn trace(seed: u64) -> GenerationTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    common::random_trace(&mut rng, "p", 10, &[2, 3], 6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn permuting_generations_permutes_rows(seed in any::<u64>(), rot in 0usize..6) {
        let t = trace(seed);
        let mut p = t.clone();
        let r = rot % p.generations.len();
        p.generations.rotate_left(r);
        for policy in [EmbeddingPolicy::LAST_MID, EmbeddingPolicy { mode: Reduction::MeanTokens, layer: LayerSelect::Middle }] {
            let a = extract_embeddings(&t, policy, None).unwrap();
            let b = extract_embeddings(&p, policy, None).unwrap();
            let k = t.k();
            for i in 0..k {
                prop_assert_eq!(a.z.row((i + r) % k), b.z.row(i));
            }
            let (sa, sb) = (
                eigenscore_with(&a.z, &EigenConfig::default()).unwrap().score,
                eigenscore_with(&b.z, &EigenConfig::default()).unwrap().score,
            );
            prop_assert!((sa - sb).abs() < 1e-9);
        }
    }

    #[test]
    fn identity_clip_changes_nothing(seed in any::<u64>()) {
        let t = trace(seed);
        let plain = extract_embeddings(&t, EmbeddingPolicy::LAST_MID, None).unwrap();
        let clipped = extract_embeddings(&t, EmbeddingPolicy::LAST_MID, Some(&ClipState::identity(10))).unwrap();
        prop_assert_eq!(plain.z, clipped.z);
        prop_assert!(clipped.clipped && !plain.clipped);
    }

    #[test]
    fn scoring_is_deterministic(seed in any::<u64>()) {
        let traces: Vec<_> = (0..4).map(|i| trace(seed.wrapping_add(i))).collect();
        for clip in [ClipMode::Off, ClipMode::Current, ClipMode::MemoryBank { capacity: 8 }] {
            let config = ScoringConfig { metrics: vec![eigenscore::Metric::EigenScore, eigenscore::Metric::LexicalSimilarity], clip, ..ScoringConfig::default() };
            let a = Scorer::new(config.clone()).unwrap().score_batch(&traces).unwrap();
            let b = Scorer::new(config).unwrap().score_batch(&traces).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn lexical_similarity_within_unit_interval(seed in any::<u64>()) {
        let t = trace(seed);
        let v = eigenscore::lexical_similarity(&t).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn file_round_trip(seeds in proptest::collection::vec(any::<u64>(), 1..5)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.trace");
        let traces: Vec<_> = seeds.iter().enumerate().map(|(i, &s)| {
            let mut t = trace(s);
            t.id = format!("p{i}");
            t
        }).collect();
        write_traces(&path, &traces).unwrap();
        let back: Vec<_> = read_traces(&path).unwrap().collect::<Result<_, _>>().unwrap();
        prop_assert_eq!(back, traces);
    }
}
