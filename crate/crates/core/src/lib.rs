//! Hallucination detection from the internal states of a language model.
//!
//! Given `K` sampled answers to one question, [`eigenscore`] measures how
//! spread out their sentence embeddings are: the mean log-eigenvalue of the
//! regularized `K x K` covariance of those embeddings. Consistent answers
//! collapse to a rank-one spectrum and a very negative score; semantically
//! divergent answers raise it. [`clipping`] clamps extreme activations before
//! the embeddings are formed, [`baseline`] provides the logit- and text-level
//! comparison metrics, and [`eval`] scores detectors with AUROC, PCC and the
//! G-Mean threshold.
//!
//! ```
//! use eigenscore::{score_from_spectrum, LogBase};
//!
//! let mut spectrum = vec![4.877_195_79];
//! spectrum.extend([1e-3; 9]);
//! let s = score_from_spectrum(&spectrum, LogBase::Ten);
//! assert!((s - -2.63).abs() < 0.01);
//! ```

pub mod baseline;
pub mod clipping;
pub mod error;
pub mod eval;
pub mod io;
pub mod pipeline;
pub mod rouge;
pub mod spectral;
pub mod synth;
pub mod trace;

pub use baseline::{lexical_similarity, ln_entropy, perplexity, trace_energy, PerplexityMode, ScoreRecord};
pub use clipping::{clip_features, ClipSource, ClipState, MemoryBank};
pub use error::{Error, Result};
pub use eval::{auroc, gmean_threshold, pearson, CorrectnessMeasure, EvalReport, Orientation};
pub use io::{read_clip_state, read_traces, write_clip_state, write_traces, TraceReader, TraceWriter};
pub use pipeline::{calibrate, evaluate_records, label_traces, ClipMode, Metric, Scorer, ScoringConfig};
pub use rouge::rouge_l;
pub use spectral::{
    differential_entropy_gaussian, eigenscore, eigenscore_with, score_from_spectrum, EigenConfig, EigenResult, LogBase,
};
pub use synth::{synth_traces, SynthSpec};
pub use trace::{extract_embeddings, EmbeddingPolicy, Generation, GenerationTrace, TokenMatrix};
