//! Scoring traces with a configurable metric set, and joining scores with
//! correctness labels for evaluation.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{
    lexical_similarity, ln_entropy, trace_energy, trace_perplexity, PerplexityMode, ScoreRecord,
};
use crate::clipping::{thresholds_from_rows, ClipSource, ClipState, MemoryBank, DEFAULT_BANK_CAPACITY, DEFAULT_PERCENTILE};
use crate::error::{Error, Result};
use crate::eval::{evaluate_metric, label_correctness, Correctness, CorrectnessMeasure, EvalReport, Orientation};
use crate::spectral::{eigenscore_with, EigenConfig};
use crate::trace::{extract_embeddings, EmbeddingPolicy, GenerationTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Perplexity,
    LnEntropy,
    LexicalSimilarity,
    Energy,
    #[serde(rename = "eigenscore")]
    EigenScore,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Perplexity,
        Metric::LnEntropy,
        Metric::LexicalSimilarity,
        Metric::Energy,
        Metric::EigenScore,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Perplexity => "perplexity",
            Metric::LnEntropy => "ln_entropy",
            Metric::LexicalSimilarity => "lexical_similarity",
            Metric::Energy => "energy",
            Metric::EigenScore => "eigenscore",
        }
    }

    /// Consistent answers have high lexical similarity; every other metric
    /// grows with uncertainty.
    pub fn orientation(self) -> Orientation {
        match self {
            Metric::LexicalSimilarity => Orientation::LowerIsHallucination,
            _ => Orientation::HigherIsHallucination,
        }
    }

    pub fn get(self, record: &ScoreRecord) -> Option<f64> {
        match self {
            Metric::Perplexity => record.perplexity,
            Metric::LnEntropy => record.ln_entropy,
            Metric::LexicalSimilarity => record.lexical_similarity,
            Metric::Energy => record.energy,
            Metric::EigenScore => record.eigenscore,
        }
    }

    fn slot(self, record: &mut ScoreRecord) -> &mut Option<f64> {
        match self {
            Metric::Perplexity => &mut record.perplexity,
            Metric::LnEntropy => &mut record.ln_entropy,
            Metric::LexicalSimilarity => &mut record.lexical_similarity,
            Metric::Energy => &mut record.energy,
            Metric::EigenScore => &mut record.eigenscore,
        }
    }

    /// Parses a comma-separated list such as `perplexity,eigenscore`.
    pub fn parse_list(s: &str) -> Result<Vec<Metric>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let m: Metric = part.parse()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidArgument("empty metric list".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown metric `{s}`")))
    }
}

/// Where EigenScore's feature-clipping thresholds come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ClipMode {
    Off,
    /// Percentiles over the tokens of the trace being scored.
    Current,
    Precomputed(ClipState),
    /// Percentiles over the tokens of the most recently scored traces.
    MemoryBank { capacity: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoringConfig {
    pub metrics: Vec<Metric>,
    pub policy: EmbeddingPolicy,
    pub clip: ClipMode,
    pub percentile: f64,
    pub eigen: EigenConfig,
    pub perplexity_mode: PerplexityMode,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            metrics: Metric::ALL.to_vec(),
            policy: EmbeddingPolicy::default(),
            clip: ClipMode::Off,
            percentile: DEFAULT_PERCENTILE,
            eigen: EigenConfig::default(),
            perplexity_mode: PerplexityMode::default(),
        }
    }
}

/// Scores traces in order. With [`ClipMode::MemoryBank`] the scorer is
/// stateful: each trace is clipped with thresholds from the traces before
/// it, then its tokens enter the bank. Until the bank holds two tokens the
/// current trace's own tokens are used.
#[derive(Debug, Clone)]
pub struct Scorer {
    config: ScoringConfig,
    bank: Option<MemoryBank>,
}

impl Scorer {
    pub fn new(config: ScoringConfig) -> Result<Self> {
        if config.metrics.is_empty() {
            return Err(Error::InvalidArgument("no metrics selected".into()));
        }
        if !(config.eigen.alpha.is_finite() && config.eigen.alpha > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be positive, got {}",
                config.eigen.alpha
            )));
        }
        if !(0.0..50.0).contains(&config.percentile) {
            return Err(Error::InvalidArgument(format!(
                "percentile must lie in [0, 50), got {}",
                config.percentile
            )));
        }
        if let ClipMode::MemoryBank { capacity: 0 } = config.clip {
            return Err(Error::InvalidArgument("memory bank capacity must be positive".into()));
        }
        Ok(Self { config, bank: None })
    }

    pub fn config(&self) -> &ScoringConfig {
        &self.config
    }

    /// Tokens currently held by the memory bank.
    pub fn bank_len(&self) -> usize {
        self.bank.as_ref().map_or(0, MemoryBank::len)
    }

    pub fn score(&mut self, trace: &GenerationTrace) -> Result<ScoreRecord> {
        let clip = self.prepare_clip(trace)?;
        score_with(&self.config, trace, clip.as_ref())
    }

    /// Scores a batch in parallel. Memory-bank thresholds are still
    /// computed in input order, so the result equals repeated [`Self::score`].
    pub fn score_batch(&mut self, traces: &[GenerationTrace]) -> Result<Vec<ScoreRecord>> {
        let clips = traces
            .iter()
            .map(|t| self.prepare_clip(t))
            .collect::<Result<Vec<_>>>()?;
        let config = &self.config;
        traces
            .par_iter()
            .zip(clips.par_iter())
            .map(|(t, c)| score_with(config, t, c.as_ref()))
            .collect()
    }

    /// Scores a fallible stream in parallel chunks, handing each record to
    /// `sink` in input order. Stops at the first error.
    pub fn score_stream<I, F>(&mut self, traces: I, chunk: usize, mut sink: F) -> Result<usize>
    where
        I: IntoIterator<Item = Result<GenerationTrace>>,
        F: FnMut(ScoreRecord) -> Result<()>,
    {
        let chunk = chunk.max(1);
        let mut buf = Vec::with_capacity(chunk);
        let mut count = 0;
        let mut flush = |scorer: &mut Self, buf: &mut Vec<GenerationTrace>| -> Result<()> {
            for rec in scorer.score_batch(buf)? {
                sink(rec)?;
                count += 1;
            }
            buf.clear();
            Ok(())
        };
        for trace in traces {
            buf.push(trace?);
            if buf.len() == chunk {
                flush(self, &mut buf)?;
            }
        }
        flush(self, &mut buf)?;
        Ok(count)
    }

    /// Resolves this trace's clip thresholds and, in memory-bank mode,
    /// updates the bank afterwards.
    fn prepare_clip(&mut self, trace: &GenerationTrace) -> Result<Option<ClipState>> {
        if !self.config.metrics.contains(&Metric::EigenScore) {
            return Ok(None);
        }
        trace.validate()?;
        let layer = self.config.policy.layer.resolve(trace.model_meta.num_layers)?;
        let p = self.config.percentile;
        match &self.config.clip {
            ClipMode::Off => Ok(None),
            ClipMode::Current => current_thresholds(trace, layer, p).map(Some),
            ClipMode::Precomputed(state) => {
                if let Some(l) = state.layer {
                    if l != layer {
                        return Err(Error::Policy(format!(
                            "clip thresholds were computed for layer {l}, but the policy uses layer {layer}"
                        )));
                    }
                }
                Ok(Some(state.clone()))
            }
            &ClipMode::MemoryBank { capacity } => {
                let d = trace.model_meta.hidden_dim;
                let bank = self.bank.get_or_insert_with(|| MemoryBank::new(capacity, d));
                if bank.dim() != d {
                    return Err(Error::Dimension {
                        expected: bank.dim(),
                        actual: d,
                    });
                }
                let state = if bank.len() >= 2 {
                    bank.thresholds(p)?
                } else {
                    current_thresholds(trace, layer, p)?
                };
                for gen in &trace.generations {
                    let hidden = layer_states(trace, gen, layer)?;
                    for row in hidden.iter_rows() {
                        bank.push(row)?;
                    }
                }
                Ok(Some(state.with_layer(layer)))
            }
        }
    }
}

fn layer_states<'a>(
    trace: &GenerationTrace,
    gen: &'a crate::trace::Generation,
    layer: usize,
) -> Result<&'a crate::trace::TokenMatrix> {
    gen.hidden.get(&layer).ok_or_else(|| {
        Error::Policy(format!("layer {layer} not captured in trace `{}`", trace.id))
    })
}

fn current_thresholds(trace: &GenerationTrace, layer: usize, p: f64) -> Result<ClipState> {
    let mut rows = Vec::new();
    for gen in &trace.generations {
        rows.extend(layer_states(trace, gen, layer)?.iter_rows());
    }
    Ok(thresholds_from_rows(rows, trace.model_meta.hidden_dim, p, ClipSource::Current)?.with_layer(layer))
}

fn score_with(config: &ScoringConfig, trace: &GenerationTrace, clip: Option<&ClipState>) -> Result<ScoreRecord> {
    trace.validate()?;
    let mut record = ScoreRecord::new(trace.id.clone());
    for &metric in &config.metrics {
        let value = match metric {
            Metric::Perplexity => trace_perplexity(trace, config.perplexity_mode)?,
            Metric::LnEntropy => ln_entropy(trace)?,
            Metric::LexicalSimilarity => lexical_similarity(trace)?,
            Metric::Energy => trace_energy(trace)?,
            Metric::EigenScore => {
                let set = extract_embeddings(trace, config.policy, clip)?;
                eigenscore_with(&set.z, &config.eigen)?.score
            }
        };
        *metric.slot(&mut record) = Some(value);
    }
    Ok(record)
}

/// Correctness of each trace's primary answer (generation 0), keyed by id.
pub fn label_traces<I>(traces: I, measure: &CorrectnessMeasure) -> Result<HashMap<String, Correctness>>
where
    I: IntoIterator<Item = Result<GenerationTrace>>,
{
    let mut out = HashMap::new();
    for trace in traces {
        let trace = trace?;
        let c = label_correctness(&trace, 0, measure)?;
        if out.insert(trace.id.clone(), c).is_some() {
            return Err(Error::InvalidArgument(format!("duplicate trace id `{}`", trace.id)));
        }
    }
    Ok(out)
}

/// Evaluates every metric present in `records` against the labels.
///
/// A metric must be present in all records or none of them.
pub fn evaluate_records(
    records: &[ScoreRecord],
    labels: &HashMap<String, Correctness>,
) -> Result<Vec<EvalReport>> {
    let correctness = records
        .iter()
        .map(|r| {
            labels.get(&r.trace_id).copied().ok_or_else(|| {
                Error::InvalidArgument(format!("no trace with id `{}` for score record", r.trace_id))
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut reports = Vec::new();
    for metric in Metric::ALL {
        let present = records.iter().filter(|r| metric.get(r).is_some()).count();
        if present == 0 {
            continue;
        }
        let scores = records
            .iter()
            .map(|r| {
                metric.get(r).ok_or_else(|| Error::MissingField {
                    trace: r.trace_id.clone(),
                    field: metric.name(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        reports.push(evaluate_metric(metric.name(), &scores, &correctness, metric.orientation())?);
    }
    if reports.is_empty() {
        return Err(Error::InvalidArgument("score records contain no metric values".into()));
    }
    Ok(reports)
}

/// Offline thresholds: the last `capacity` token embeddings of `layer`
/// across `traces`, reduced to per-neuron percentile bounds.
pub fn calibrate<I>(traces: I, layer: usize, p: f64, capacity: usize) -> Result<ClipState>
where
    I: IntoIterator<Item = Result<GenerationTrace>>,
{
    if capacity == 0 {
        return Err(Error::InvalidArgument("memory bank capacity must be positive".into()));
    }
    let mut bank: Option<MemoryBank> = None;
    for trace in traces {
        let trace = trace?;
        trace.validate()?;
        let d = trace.model_meta.hidden_dim;
        let bank = bank.get_or_insert_with(|| MemoryBank::new(capacity, d));
        if bank.dim() != d {
            return Err(Error::Dimension {
                expected: bank.dim(),
                actual: d,
            });
        }
        for gen in &trace.generations {
            for row in layer_states(&trace, gen, layer)?.iter_rows() {
                bank.push(row)?;
            }
        }
    }
    let bank = bank.ok_or(Error::InsufficientSamples(0))?;
    let mut state = thresholds_from_rows(bank.iter(), bank.dim(), p, ClipSource::Precomputed)?;
    state.layer = Some(layer);
    Ok(state)
}

/// Default capacity used by [`ClipMode::MemoryBank`] when none is given.
pub const fn default_bank() -> ClipMode {
    ClipMode::MemoryBank {
        capacity: DEFAULT_BANK_CAPACITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_traces, SynthSpec};

    fn small(seed: u64) -> Vec<GenerationTrace> {
        synth_traces(&SynthSpec {
            k: 5,
            d: 16,
            traces_per_class: 6,
            extreme_feature_rate: 0.1,
            seed,
            ..SynthSpec::default()
        })
        .unwrap()
    }

    #[test]
    fn batch_matches_sequential_in_every_clip_mode() {
        let traces = small(3);
        let pre = calibrate(small(4).into_iter().map(Ok), 16, 0.2, 100).unwrap();
        for clip in [ClipMode::Off, ClipMode::Current, ClipMode::Precomputed(pre), ClipMode::MemoryBank { capacity: 50 }] {
            let config = ScoringConfig { clip, ..ScoringConfig::default() };
            let mut a = Scorer::new(config.clone()).unwrap();
            let seq: Vec<_> = traces.iter().map(|t| a.score(t).unwrap()).collect();
            let mut b = Scorer::new(config).unwrap();
            assert_eq!(b.score_batch(&traces).unwrap(), seq);
            let mut c = Scorer::new(b.config().clone()).unwrap();
            let mut streamed = Vec::new();
            c.score_stream(traces.iter().cloned().map(Ok), 5, |r| {
                streamed.push(r);
                Ok(())
            })
            .unwrap();
            assert_eq!(streamed, seq);
        }
    }

    #[test]
    fn bank_is_bounded() {
        let mut s = Scorer::new(ScoringConfig {
            clip: ClipMode::MemoryBank { capacity: 20 },
            ..ScoringConfig::default()
        })
        .unwrap();
        s.score_batch(&small(1)).unwrap();
        assert_eq!(s.bank_len(), 20);
    }

    #[test]
    fn only_selected_metrics_are_filled() {
        let mut s = Scorer::new(ScoringConfig {
            metrics: vec![Metric::Perplexity, Metric::EigenScore],
            ..ScoringConfig::default()
        })
        .unwrap();
        let r = s.score(&small(2)[0]).unwrap();
        assert!(r.perplexity.is_some() && r.eigenscore.is_some());
        assert!(r.ln_entropy.is_none() && r.lexical_similarity.is_none() && r.energy.is_none());
    }

    #[test]
    fn layer_mismatch_is_a_policy_error() {
        let state = calibrate(small(4).into_iter().map(Ok), 31, 0.2, 100).unwrap();
        let mut s = Scorer::new(ScoringConfig {
            clip: ClipMode::Precomputed(state),
            ..ScoringConfig::default()
        })
        .unwrap();
        assert!(matches!(s.score(&small(2)[0]), Err(Error::Policy(_))));
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.name()));
        }
        assert_eq!(
            Metric::parse_list("eigenscore, perplexity,eigenscore").unwrap(),
            vec![Metric::EigenScore, Metric::Perplexity]
        );
        assert!(Metric::parse_list("bogus").is_err());
    }

    #[test]
    fn evaluation_requires_complete_columns() {
        let traces = small(5);
        let labels = label_traces(traces.iter().cloned().map(Ok), &CorrectnessMeasure::rouge_l(0.5)).unwrap();
        let mut s = Scorer::new(ScoringConfig::default()).unwrap();
        let mut records = s.score_batch(&traces).unwrap();
        let reports = evaluate_records(&records, &labels).unwrap();
        assert_eq!(reports.len(), 5);
        records[0].energy = None;
        match evaluate_records(&records, &labels) {
            Err(Error::MissingField { field, .. }) => assert_eq!(field, "energy"),
            other => panic!("{other:?}"),
        }
    }
}
