//! Recorded generation traces and sentence-embedding extraction.
//!
//! A [`GenerationTrace`] holds one question together with `K` sampled
//! responses. Each response carries its tokens, natural-log token
//! probabilities, optional per-token energies and the hidden states of the
//! captured layers. [`extract_embeddings`] reduces those hidden states to the
//! `K x d` sentence-embedding matrix consumed by the spectral score.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::clipping::{clip_in_place, ClipState};
use crate::error::{Error, Result};

/// Row-major `rows x cols` matrix of 32-bit activations.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl TokenMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::Dimension {
                    expected: cols,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f32]> + '_ {
        // chunks_exact(0) panics
        let cols = self.cols.max(1);
        self.data.chunks_exact(cols).take(self.rows)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub name: String,
    /// Total number of transformer layers `L`.
    pub num_layers: usize,
    pub hidden_dim: usize,
    #[serde(default)]
    pub sampling: SamplingParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub text: String,
    pub tokens: Vec<String>,
    /// Natural-log probability of each token, all `<= 0`.
    pub logprobs: Vec<f32>,
    /// Per-token energy (`-logsumexp` of the logits), when the extractor recorded it.
    pub energies: Option<Vec<f32>>,
    /// Layer index -> `T x d` hidden states.
    pub hidden: BTreeMap<usize, TokenMatrix>,
    /// Sentence-similarity model embedding of `text`, used by the
    /// embedding-similarity correctness measure.
    pub answer_embedding: Option<Vec<f32>>,
}

impl Generation {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationTrace {
    pub id: String,
    pub question: String,
    pub ground_truths: Vec<String>,
    pub generations: Vec<Generation>,
    pub model_meta: ModelMeta,
    /// Similarity-model embeddings of each ground truth, in order.
    pub reference_embeddings: Option<Vec<Vec<f32>>>,
    /// Known hallucination label (`true` = hallucinating), present on synthetic data.
    pub label: Option<bool>,
}

impl GenerationTrace {
    pub fn k(&self) -> usize {
        self.generations.len()
    }

    /// Layer indices captured in every generation (taken from the first one).
    pub fn captured_layers(&self) -> Vec<usize> {
        self.generations
            .first()
            .map(|g| g.hidden.keys().copied().collect())
            .unwrap_or_default()
    }

    /// Checks every structural invariant of the trace.
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::invalid_trace(&self.id, reason));
        if self.ground_truths.is_empty() {
            return bad("no ground-truth answers".into());
        }
        if self.generations.len() < 2 {
            return bad(format!(
                "{} generations, at least 2 are required",
                self.generations.len()
            ));
        }
        let d = self.model_meta.hidden_dim;
        let layers = self.captured_layers();
        for (k, g) in self.generations.iter().enumerate() {
            let t = g.tokens.len();
            if t == 0 {
                return bad(format!("generation {k} has no tokens"));
            }
            if g.logprobs.len() != t {
                return bad(format!(
                    "generation {k}: {} logprobs for {t} tokens",
                    g.logprobs.len()
                ));
            }
            if let Some(lp) = g.logprobs.iter().find(|lp| !lp.is_finite() || **lp > 0.0) {
                return bad(format!("generation {k}: invalid log-probability {lp}"));
            }
            if let Some(e) = &g.energies {
                if e.len() != t {
                    return bad(format!("generation {k}: {} energies for {t} tokens", e.len()));
                }
            }
            if !g.hidden.keys().copied().eq(layers.iter().copied()) {
                return bad(format!("generation {k} captures a different layer set"));
            }
            for (layer, m) in &g.hidden {
                if *layer >= self.model_meta.num_layers {
                    return bad(format!(
                        "layer {layer} out of range for a {}-layer model",
                        self.model_meta.num_layers
                    ));
                }
                if m.rows() != t || m.cols() != d {
                    return bad(format!(
                        "generation {k} layer {layer}: hidden states are {}x{}, expected {t}x{d}",
                        m.rows(),
                        m.cols()
                    ));
                }
            }
        }
        if let Some(refs) = &self.reference_embeddings {
            if refs.len() != self.ground_truths.len() {
                return bad(format!(
                    "{} reference embeddings for {} ground truths",
                    refs.len(),
                    self.ground_truths.len()
                ));
            }
        }
        Ok(())
    }
}

/// How token vectors are reduced to one sentence vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    LastToken,
    MeanTokens,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerSelect {
    Index(usize),
    /// `floor(L / 2)`.
    Middle,
    /// `L - 1`.
    Last,
}

impl LayerSelect {
    pub fn resolve(self, num_layers: usize) -> Result<usize> {
        let layer = match self {
            LayerSelect::Index(i) => i,
            LayerSelect::Middle => num_layers / 2,
            LayerSelect::Last => num_layers.saturating_sub(1),
        };
        if layer >= num_layers {
            return Err(Error::Policy(format!(
                "layer {layer} outside [0, {num_layers})"
            )));
        }
        Ok(layer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingPolicy {
    pub mode: Reduction,
    pub layer: LayerSelect,
}

impl EmbeddingPolicy {
    /// Last token of the middle layer.
    pub const LAST_MID: Self = Self {
        mode: Reduction::LastToken,
        layer: LayerSelect::Middle,
    };
    /// Token average of the final layer.
    pub const MEAN_LAST: Self = Self {
        mode: Reduction::MeanTokens,
        layer: LayerSelect::Last,
    };
}

impl Default for EmbeddingPolicy {
    fn default() -> Self {
        Self::LAST_MID
    }
}

/// Sentence embeddings of a trace, one row per generation.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub z: DMatrix<f64>,
    pub policy: EmbeddingPolicy,
    pub layer: usize,
    pub clipped: bool,
}

/// Builds the `K x d` sentence-embedding matrix of `trace`.
///
/// With `clip`, every token vector of the selected layer is clamped before
/// it is reduced.
pub fn extract_embeddings(
    trace: &GenerationTrace,
    policy: EmbeddingPolicy,
    clip: Option<&ClipState>,
) -> Result<EmbeddingSet> {
    let layer = policy.layer.resolve(trace.model_meta.num_layers)?;
    let d = trace.model_meta.hidden_dim;
    if let Some(state) = clip {
        if state.dim() != d {
            return Err(Error::Dimension {
                expected: d,
                actual: state.dim(),
            });
        }
    }

    let k = trace.generations.len();
    let mut z = DMatrix::<f64>::zeros(k, d);
    let mut buf = vec![0.0f64; d];
    for (row, g) in trace.generations.iter().enumerate() {
        let hidden = g.hidden.get(&layer).ok_or_else(|| {
            Error::Policy(format!(
                "layer {layer} not captured in trace `{}` generation {row}",
                trace.id
            ))
        })?;
        if hidden.rows() == 0 {
            return Err(Error::EmptySequence(format!(
                "trace `{}` generation {row}",
                trace.id
            )));
        }
        if hidden.cols() != d {
            return Err(Error::Dimension {
                expected: d,
                actual: hidden.cols(),
            });
        }

        let load = |token: &[f32], buf: &mut [f64]| -> Result<()> {
            for (b, &h) in buf.iter_mut().zip(token) {
                *b = f64::from(h);
            }
            if let Some(state) = clip {
                clip_in_place(buf, state)?;
            }
            Ok(())
        };

        match policy.mode {
            Reduction::LastToken => {
                load(hidden.row(hidden.rows() - 1), &mut buf)?;
                for (j, &v) in buf.iter().enumerate() {
                    z[(row, j)] = v;
                }
            }
            Reduction::MeanTokens => {
                let mut acc = vec![0.0f64; d];
                for token in hidden.iter_rows() {
                    load(token, &mut buf)?;
                    for (a, &v) in acc.iter_mut().zip(&buf) {
                        *a += v;
                    }
                }
                let t = hidden.rows() as f64;
                for (j, a) in acc.into_iter().enumerate() {
                    z[(row, j)] = a / t;
                }
            }
        }
    }

    Ok(EmbeddingSet {
        z,
        policy,
        layer,
        clipped: clip.is_some(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn meta(layers: usize, d: usize) -> ModelMeta {
        ModelMeta {
            name: "test".into(),
            num_layers: layers,
            hidden_dim: d,
            sampling: SamplingParams::default(),
        }
    }

    fn generation(layer: usize, rows: &[Vec<f32>]) -> Generation {
        let t = rows.len();
        Generation {
            text: "x".into(),
            tokens: vec!["x".into(); t],
            logprobs: vec![-0.1; t],
            energies: None,
            hidden: BTreeMap::from([(layer, TokenMatrix::from_rows(rows).unwrap())]),
            answer_embedding: None,
        }
    }

    fn trace(layers: usize, d: usize, gens: Vec<Generation>) -> GenerationTrace {
        GenerationTrace {
            id: "t".into(),
            question: "q".into(),
            ground_truths: vec!["a".into()],
            generations: gens,
            model_meta: meta(layers, d),
            reference_embeddings: None,
            label: None,
        }
    }

    #[test]
    fn single_token_last_token_is_identity() {
        let tr = trace(
            4,
            3,
            vec![
                generation(2, &[vec![1.0, 2.0, 3.0]]),
                generation(2, &[vec![4.0, 5.0, 6.0]]),
            ],
        );
        let set = extract_embeddings(&tr, EmbeddingPolicy::LAST_MID, None).unwrap();
        assert_eq!(set.layer, 2);
        assert_eq!(
            set.z,
            DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        );
        assert!(!set.clipped);
    }

    #[test]
    fn mean_tokens_averages_rows() {
        let g = generation(1, &[vec![0.0, 0.0], vec![2.0, 2.0]]);
        let tr = trace(2, 2, vec![g.clone(), g]);
        let policy = EmbeddingPolicy {
            mode: Reduction::MeanTokens,
            layer: LayerSelect::Index(1),
        };
        let set = extract_embeddings(&tr, policy, None).unwrap();
        assert_eq!(set.z.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 1.0]);
    }

    #[test]
    fn mean_tokens_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rows: Vec<Vec<f32>> = (0..4)
            .map(|_| (0..8).map(|_| rng.random_range(-3.0f32..3.0)).collect())
            .collect();
        let tr = trace(4, 8, vec![generation(2, &rows), generation(2, &rows)]);
        let policy = EmbeddingPolicy {
            mode: Reduction::MeanTokens,
            layer: LayerSelect::Middle,
        };
        let set = extract_embeddings(&tr, policy, None).unwrap();
        for j in 0..8 {
            let mut sum = 0.0f64;
            for row in &rows {
                sum += row[j] as f64;
            }
            assert_eq!(set.z[(0, j)], sum / 4.0);
        }
    }

    #[test]
    fn single_token_policies_agree() {
        let tr = trace(
            4,
            2,
            vec![generation(2, &[vec![1.5, -2.0]]), generation(2, &[vec![0.0, 9.0]])],
        );
        let last = extract_embeddings(&tr, EmbeddingPolicy::LAST_MID, None).unwrap();
        let mean = extract_embeddings(
            &tr,
            EmbeddingPolicy {
                mode: Reduction::MeanTokens,
                layer: LayerSelect::Middle,
            },
            None,
        )
        .unwrap();
        assert_eq!(last.z, mean.z);
    }

    #[test]
    fn identity_clip_is_exact_noop() {
        let tr = trace(
            4,
            2,
            vec![
                generation(2, &[vec![1e30, -2.0], vec![3.0, -1e-30]]),
                generation(2, &[vec![0.5, 9.0]]),
            ],
        );
        let plain = extract_embeddings(&tr, EmbeddingPolicy::LAST_MID, None).unwrap();
        let clip = ClipState::identity(2);
        let clipped = extract_embeddings(&tr, EmbeddingPolicy::LAST_MID, Some(&clip)).unwrap();
        assert_eq!(plain.z, clipped.z);
        assert!(clipped.clipped);
    }

    #[test]
    fn permuting_generations_permutes_rows() {
        let a = generation(2, &[vec![1.0, 2.0]]);
        let b = generation(2, &[vec![3.0, 4.0]]);
        let c = generation(2, &[vec![5.0, 6.0]]);
        let t1 = trace(4, 2, vec![a.clone(), b.clone(), c.clone()]);
        let t2 = trace(4, 2, vec![c, a, b]);
        let z1 = extract_embeddings(&t1, EmbeddingPolicy::LAST_MID, None).unwrap().z;
        let z2 = extract_embeddings(&t2, EmbeddingPolicy::LAST_MID, None).unwrap().z;
        assert_eq!(z1.row(0), z2.row(1));
        assert_eq!(z1.row(1), z2.row(2));
        assert_eq!(z1.row(2), z2.row(0));
    }

    #[test]
    fn missing_layer_is_policy_error() {
        let tr = trace(
            4,
            2,
            vec![generation(1, &[vec![1.0, 2.0]]), generation(1, &[vec![1.0, 2.0]])],
        );
        let err = extract_embeddings(&tr, EmbeddingPolicy::LAST_MID, None).unwrap_err();
        assert!(matches!(err, Error::Policy(_)), "{err}");
        let err = extract_embeddings(
            &tr,
            EmbeddingPolicy {
                mode: Reduction::LastToken,
                layer: LayerSelect::Index(9),
            },
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Policy(_)), "{err}");
    }

    #[test]
    fn clip_dimension_mismatch() {
        let tr = trace(
            4,
            2,
            vec![generation(2, &[vec![1.0, 2.0]]), generation(2, &[vec![1.0, 2.0]])],
        );
        let err =
            extract_embeddings(&tr, EmbeddingPolicy::LAST_MID, Some(&ClipState::identity(3)))
                .unwrap_err();
        assert!(matches!(err, Error::Dimension { expected: 2, actual: 3 }));
    }

    #[test]
    fn validate_rejects_broken_traces() {
        let good = trace(
            4,
            2,
            vec![generation(2, &[vec![1.0, 2.0]]), generation(2, &[vec![1.0, 2.0]])],
        );
        good.validate().unwrap();

        let mut one = good.clone();
        one.generations.truncate(1);
        assert!(one.validate().is_err());

        let mut empty = good.clone();
        empty.generations[0].tokens.clear();
        empty.generations[0].logprobs.clear();
        assert!(empty.validate().is_err());

        let mut positive = good.clone();
        positive.generations[1].logprobs[0] = 0.3;
        assert!(positive.validate().is_err());

        let mut layers = good.clone();
        let m = layers.generations[1].hidden.remove(&2).unwrap();
        layers.generations[1].hidden.insert(1, m);
        assert!(layers.validate().is_err());

        let mut energies = good;
        energies.generations[0].energies = Some(vec![-1.0, -2.0]);
        assert!(energies.validate().is_err());
    }
}
