//! Seeded synthetic traces with known hallucination labels.
//!
//! "Confident" traces sample all `K` sentence embeddings around a single
//! centre; "hallucinating" traces spread them over `cluster_count` centres
//! separated by `cluster_separation`. Texts, token probabilities, energies and
//! similarity-model embeddings are drawn to match the cluster assignment, so
//! every metric sees the same underlying structure. A fraction of neurons can
//! additionally carry heavy-tailed (Cauchy) activations on every token, which
//! is what test-time clipping is meant to suppress.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{Generation, GenerationTrace, ModelMeta, SamplingParams, TokenMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    /// Generations per trace.
    pub k: usize,
    /// Hidden dimension.
    pub d: usize,
    /// Clusters used by hallucinating traces.
    pub cluster_count: usize,
    /// Per-coordinate spread of last-token embeddings around their centre.
    pub cluster_spread: f64,
    /// Per-coordinate spread of cluster centres around the question centre.
    pub cluster_separation: f64,
    /// Fraction of neurons with heavy-tailed activations (at least one if > 0).
    pub extreme_feature_rate: f64,
    /// Scale of the Cauchy noise on those neurons.
    pub extreme_scale: f64,
    /// Traces generated per class; the output interleaves both classes.
    pub traces_per_class: usize,
    pub num_layers: usize,
    pub max_answer_words: usize,
    /// Dimension of the similarity-model embeddings.
    pub similarity_dim: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            k: 10,
            d: 64,
            cluster_count: 3,
            cluster_spread: 0.1,
            cluster_separation: 1.0,
            extreme_feature_rate: 0.0,
            extreme_scale: 1.0,
            traces_per_class: 100,
            num_layers: 32,
            max_answer_words: 3,
            similarity_dim: 16,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("synth spec: {m}")));
        if self.k < 2 {
            return bad("k must be at least 2");
        }
        if self.d == 0 || self.similarity_dim == 0 {
            return bad("dimensions must be positive");
        }
        if self.cluster_count == 0 {
            return bad("cluster_count must be positive");
        }
        if self.num_layers < 2 {
            return bad("num_layers must be at least 2");
        }
        if self.traces_per_class == 0 || self.max_answer_words == 0 {
            return bad("traces_per_class and max_answer_words must be positive");
        }
        let finite_non_neg = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_non_neg(self.cluster_spread)
            || !finite_non_neg(self.cluster_separation)
            || !finite_non_neg(self.extreme_scale)
        {
            return bad("spreads and scales must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.extreme_feature_rate) {
            return bad("extreme_feature_rate must lie in [0, 1]");
        }
        Ok(())
    }

    /// Layers written into each trace: middle, penultimate and final.
    pub fn captured_layers(&self) -> Vec<usize> {
        let l = self.num_layers;
        let mut layers = vec![l / 2, l - 2, l - 1];
        layers.sort_unstable();
        layers.dedup();
        layers
    }

    /// Neuron indices carrying heavy-tailed activations for this seed.
    pub fn extreme_neurons(&self) -> Vec<usize> {
        if self.extreme_feature_rate <= 0.0 {
            return Vec::new();
        }
        let count = ((self.extreme_feature_rate * self.d as f64).ceil() as usize).clamp(1, self.d);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed_fea7_u64);
        let mut all: Vec<usize> = (0..self.d).collect();
        all.shuffle(&mut rng);
        let mut chosen = all[..count].to_vec();
        chosen.sort_unstable();
        chosen
    }
}

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ra", "ten", "vo", "shi", "dar", "bel", "nu", "gor", "fi", "pan", "sel",
    "tru", "wen", "zo", "qua", "mor", "lin",
];

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(2..=3);
    (0..n).map(|_| SYLLABLES[rng.random_range(0..SYLLABLES.len())]).collect()
}

fn phrase(rng: &mut ChaCha8Rng, max_words: usize) -> String {
    let n = rng.random_range(1..=max_words);
    (0..n).map(|_| pseudo_word(rng)).collect::<Vec<_>>().join(" ")
}

fn normal_vec(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn unit_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let v = normal_vec(rng, d, 1.0);
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    v.into_iter().map(|x| x / n).collect()
}

/// Generates `2 * traces_per_class` traces in a seed-determined class order.
pub fn synth_traces(spec: &SynthSpec) -> Result<Vec<GenerationTrace>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut classes: Vec<bool> = std::iter::repeat_n(false, spec.traces_per_class)
        .chain(std::iter::repeat_n(true, spec.traces_per_class))
        .collect();
    classes.shuffle(&mut rng);

    let extreme = spec.extreme_neurons();
    let meta = ModelMeta {
        name: "synthetic".into(),
        num_layers: spec.num_layers,
        hidden_dim: spec.d,
        sampling: SamplingParams {
            temperature: Some(0.5),
            top_p: Some(0.99),
            top_k: Some(5),
            seed: Some(spec.seed),
        },
    };

    classes
        .into_iter()
        .enumerate()
        .map(|(i, hallucinating)| {
            let trace = synth_one(spec, &meta, &extreme, i, hallucinating, &mut rng);
            trace.validate()?;
            Ok(trace)
        })
        .collect()
}

fn synth_one(
    spec: &SynthSpec,
    meta: &ModelMeta,
    extreme: &[usize],
    index: usize,
    hallucinating: bool,
    rng: &mut ChaCha8Rng,
) -> GenerationTrace {
    let d = spec.d;
    let clusters = if hallucinating { spec.cluster_count } else { 1 };

    let base = normal_vec(rng, d, 1.0);
    let centres: Vec<Vec<f64>> = (0..clusters)
        .map(|c| {
            if c == 0 && !hallucinating {
                base.clone()
            } else {
                let offset = normal_vec(rng, d, spec.cluster_separation);
                base.iter().zip(offset).map(|(b, o)| b + o).collect()
            }
        })
        .collect();

    // distinct answer phrase per cluster, plus a distinct reference for hallucinating traces
    let mut used = BTreeSet::new();
    let mut fresh_phrase = |rng: &mut ChaCha8Rng| loop {
        let p = phrase(rng, spec.max_answer_words);
        if used.insert(p.clone()) {
            return p;
        }
    };
    let phrases: Vec<String> = (0..clusters).map(|_| fresh_phrase(rng)).collect();
    let ground_truth = if hallucinating {
        fresh_phrase(rng)
    } else {
        phrases[0].clone()
    };
    let phrase_vecs: Vec<Vec<f64>> = (0..clusters).map(|_| unit_vec(rng, spec.similarity_dim)).collect();
    let reference_vec = if hallucinating {
        unit_vec(rng, spec.similarity_dim)
    } else {
        phrase_vecs[0].clone()
    };

    let assignment: Vec<usize> = (0..spec.k)
        .map(|k| match k {
            _ if clusters == 1 => 0,
            0 => 0,
            1 => 1,
            _ => rng.random_range(0..clusters),
        })
        .collect();

    let cauchy = Cauchy::new(0.0, spec.extreme_scale.max(f64::MIN_POSITIVE)).expect("valid scale");
    let layers = spec.captured_layers();
    let (lp_lo, lp_hi) = if hallucinating { (0.3, 1.0) } else { (0.75, 1.0) };
    let energy = if hallucinating {
        Normal::new(-8.0, 1.5).unwrap()
    } else {
        Normal::new(-10.0, 1.0).unwrap()
    };

    let generations = assignment
        .iter()
        .map(|&c| {
            let text = if rng.random_bool(0.2) {
                format!("the {}", phrases[c])
            } else {
                phrases[c].clone()
            };
            let tokens: Vec<String> = text.split_whitespace().map(str::to_owned).collect();
            let t = tokens.len();

            let mut hidden = BTreeMap::new();
            for &layer in &layers {
                let mut data = Vec::with_capacity(t * d);
                for tok in 0..t {
                    let spread = if tok + 1 == t { spec.cluster_spread } else { 1.0 };
                    for centre in &centres[c] {
                        let v = centre + spread * rng.sample::<f64, _>(StandardNormal);
                        data.push(v as f32);
                    }
                    if spec.extreme_scale > 0.0 {
                        let row = &mut data[tok * d..];
                        for &j in extreme {
                            row[j] += cauchy.sample(rng) as f32;
                        }
                    }
                }
                hidden.insert(layer, TokenMatrix::new(t, d, data).expect("shape"));
            }

            let logprobs = (0..t)
                .map(|_| (rng.random_range(lp_lo..lp_hi) as f32).ln().min(0.0))
                .collect();
            let energies = (0..t).map(|_| energy.sample(rng) as f32).collect();
            let answer_embedding = phrase_vecs[c]
                .iter()
                .map(|v| (v + 0.05 * rng.sample::<f64, _>(StandardNormal)) as f32)
                .collect();

            Generation {
                text,
                tokens,
                logprobs,
                energies: Some(energies),
                hidden,
                answer_embedding: Some(answer_embedding),
            }
        })
        .collect();

    GenerationTrace {
        id: format!("synth-{}-{index:05}", spec.seed),
        question: format!("synthetic question {index}"),
        ground_truths: vec![ground_truth],
        generations,
        model_meta: meta.clone(),
        reference_embeddings: Some(vec![reference_vec.iter().map(|&v| v as f32).collect()]),
        label: Some(hallucinating),
    }
}
