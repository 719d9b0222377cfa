//! Logit- and language-level comparison metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rouge::{rouge_l_tokens, tokenize};
use crate::trace::{Generation, GenerationTrace};

/// Per-trace values of every enabled metric.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub trace_id: String,
    pub perplexity: Option<f64>,
    pub ln_entropy: Option<f64>,
    pub lexical_similarity: Option<f64>,
    pub energy: Option<f64>,
    pub eigenscore: Option<f64>,
}

impl ScoreRecord {
    pub fn new(trace_id: impl Into<String>) -> Self {
        Self {
            trace_id: trace_id.into(),
            ..Self::default()
        }
    }
}

/// Which generation(s) perplexity is computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerplexityMode {
    /// Generation 0 of the trace.
    #[default]
    Primary,
    /// Average over all generations (same value as LN-entropy).
    AllGenerations,
}

/// Negative mean token log-probability of one generation (natural log).
pub fn perplexity(gen: &Generation) -> Result<f64> {
    if gen.logprobs.is_empty() {
        return Err(Error::EmptySequence("generation has no tokens".into()));
    }
    if gen.logprobs.iter().any(|lp| !lp.is_finite()) {
        return Err(Error::Numeric("non-finite log-probability".into()));
    }
    let sum: f64 = gen.logprobs.iter().map(|&lp| f64::from(lp)).sum();
    Ok(-sum / gen.logprobs.len() as f64)
}

pub fn trace_perplexity(trace: &GenerationTrace, mode: PerplexityMode) -> Result<f64> {
    match mode {
        PerplexityMode::Primary => {
            let primary = trace
                .generations
                .first()
                .ok_or(Error::InsufficientGenerations(0))?;
            perplexity(primary)
        }
        PerplexityMode::AllGenerations => ln_entropy(trace),
    }
}

/// Mean over generations of the length-normalized negative log-likelihood.
pub fn ln_entropy(trace: &GenerationTrace) -> Result<f64> {
    if trace.generations.is_empty() {
        return Err(Error::InsufficientGenerations(0));
    }
    let mut acc = 0.0;
    for (k, g) in trace.generations.iter().enumerate() {
        acc += perplexity(g).map_err(|e| match e {
            Error::EmptySequence(_) => {
                Error::EmptySequence(format!("trace `{}` generation {k}", trace.id))
            }
            other => other,
        })?;
    }
    Ok(acc / trace.generations.len() as f64)
}

/// Mean ROUGE-L f-measure over all unordered pairs of generation texts.
pub fn lexical_similarity(trace: &GenerationTrace) -> Result<f64> {
    lexical_similarity_texts(trace.generations.iter().map(|g| g.text.as_str()))
}

pub fn lexical_similarity_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Result<f64> {
    let tokens: Vec<Vec<String>> = texts.into_iter().map(tokenize).collect();
    let k = tokens.len();
    if k < 2 {
        return Err(Error::InsufficientGenerations(k));
    }
    let mut acc = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            acc += rouge_l_tokens(&tokens[i], &tokens[j]).f_measure;
        }
    }
    Ok(acc / (k * (k - 1) / 2) as f64)
}

/// Mean of the per-token energies recorded for `gen`.
pub fn energy_score(gen: &Generation) -> Result<f64> {
    let energies = gen.energies.as_ref().ok_or_else(|| Error::MissingField {
        trace: String::new(),
        field: "energies",
    })?;
    if energies.is_empty() {
        return Err(Error::EmptySequence("generation has no energies".into()));
    }
    let sum: f64 = energies.iter().map(|&e| f64::from(e)).sum();
    Ok(sum / energies.len() as f64)
}

pub fn trace_energy(trace: &GenerationTrace) -> Result<f64> {
    let primary = trace
        .generations
        .first()
        .ok_or(Error::InsufficientGenerations(0))?;
    energy_score(primary).map_err(|e| match e {
        Error::MissingField { field, .. } => Error::MissingField {
            trace: trace.id.clone(),
            field,
        },
        other => other,
    })
}
