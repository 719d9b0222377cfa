//! Test-time feature clipping.
//!
//! Each hidden neuron `i` is clamped into `[h_min[i], h_max[i]]`. The bounds
//! are the `p`-th and `(100 - p)`-th percentiles of that neuron over a set of
//! token embeddings, which can come from the trace being scored
//! ([`ClipSource::Current`]), from an offline calibration batch
//! ([`ClipSource::Precomputed`]) or from a FIFO [`MemoryBank`] of recently
//! seen tokens ([`ClipSource::MemoryBank`]).

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::TokenMatrix;

/// Percentile (in percent) trimmed from each tail.
pub const DEFAULT_PERCENTILE: f64 = 0.2;
/// Token embeddings kept by the memory bank.
pub const DEFAULT_BANK_CAPACITY: usize = 3000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClipSource {
    #[serde(rename = "C")]
    Current,
    #[serde(rename = "P")]
    Precomputed,
    #[serde(rename = "MB")]
    MemoryBank,
    /// Unbounded thresholds; clipping is a no-op.
    #[serde(rename = "identity")]
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipState {
    pub h_min: Vec<f64>,
    pub h_max: Vec<f64>,
    /// Trimmed tail mass in percent (`0.2` means 0.2%).
    pub percentile: f64,
    pub source: ClipSource,
    /// Layer the thresholds were estimated on, when known.
    pub layer: Option<usize>,
}

impl ClipState {
    pub fn new(h_min: Vec<f64>, h_max: Vec<f64>, percentile: f64, source: ClipSource) -> Result<Self> {
        if h_min.len() != h_max.len() {
            return Err(Error::Dimension {
                expected: h_min.len(),
                actual: h_max.len(),
            });
        }
        if let Some(i) = (0..h_min.len()).find(|&i| h_min[i].is_nan() || h_max[i].is_nan() || h_min[i] > h_max[i]) {
            return Err(Error::InvalidArgument(format!(
                "neuron {i}: h_min {} exceeds h_max {}",
                h_min[i], h_max[i]
            )));
        }
        Ok(Self {
            h_min,
            h_max,
            percentile,
            source,
            layer: None,
        })
    }

    /// `(-inf, +inf)` on every neuron.
    pub fn identity(dim: usize) -> Self {
        Self {
            h_min: vec![f64::NEG_INFINITY; dim],
            h_max: vec![f64::INFINITY; dim],
            percentile: 0.0,
            source: ClipSource::Identity,
            layer: None,
        }
    }

    pub fn with_layer(mut self, layer: usize) -> Self {
        self.layer = Some(layer);
        self
    }

    pub fn dim(&self) -> usize {
        self.h_min.len()
    }
}

pub fn clip_in_place(h: &mut [f64], state: &ClipState) -> Result<()> {
    if h.len() != state.dim() {
        return Err(Error::Dimension {
            expected: state.dim(),
            actual: h.len(),
        });
    }
    for ((v, &lo), &hi) in h.iter_mut().zip(&state.h_min).zip(&state.h_max) {
        if *v < lo {
            *v = lo;
        } else if *v > hi {
            *v = hi;
        }
    }
    Ok(())
}

/// Element-wise clamp of `h` into the state's per-neuron bounds.
pub fn clip_features(h: &[f64], state: &ClipState) -> Result<Vec<f64>> {
    let mut out = h.to_vec();
    clip_in_place(&mut out, state)?;
    Ok(out)
}

/// Linear-interpolation percentile of an ascending slice, `q` in `[0, 100]`.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let rank = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

fn validate_percentile(p: f64) -> Result<()> {
    if !(0.0..50.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "percentile must lie in [0, 50), got {p}"
        )));
    }
    Ok(())
}

/// Per-neuron `[p, 100 - p]` percentile bounds over `rows` (each of length `dim`).
pub fn thresholds_from_rows<'a, I>(rows: I, dim: usize, p: f64, source: ClipSource) -> Result<ClipState>
where
    I: IntoIterator<Item = &'a [f32]>,
{
    validate_percentile(p)?;
    // column-major copy so each neuron can be sorted independently
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); dim];
    let mut m = 0usize;
    for row in rows {
        if row.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                actual: row.len(),
            });
        }
        for (col, &v) in columns.iter_mut().zip(row) {
            col.push(f64::from(v));
        }
        m += 1;
    }
    if m < 2 {
        return Err(Error::InsufficientSamples(m));
    }

    let mut h_min = Vec::with_capacity(dim);
    let mut h_max = Vec::with_capacity(dim);
    for mut col in columns {
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite activation in threshold samples".into()));
        }
        col.sort_unstable_by(f64::total_cmp);
        h_min.push(percentile_sorted(&col, p));
        h_max.push(percentile_sorted(&col, 100.0 - p));
    }
    ClipState::new(h_min, h_max, p, source)
}

pub fn thresholds_from_samples(samples: &TokenMatrix, p: f64, source: ClipSource) -> Result<ClipState> {
    thresholds_from_rows(samples.iter_rows(), samples.cols(), p, source)
}

/// FIFO buffer of the most recent `capacity` token embeddings.
#[derive(Debug, Clone)]
pub struct MemoryBank {
    capacity: usize,
    dim: usize,
    buffer: VecDeque<Vec<f32>>,
}

impl MemoryBank {
    pub fn new(capacity: usize, dim: usize) -> Self {
        assert!(capacity > 0, "memory bank capacity must be positive");
        Self {
            capacity,
            dim,
            buffer: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn push(&mut self, h: &[f32]) -> Result<()> {
        if h.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: h.len(),
            });
        }
        let slot = if self.buffer.len() == self.capacity {
            let mut old = self.buffer.pop_front().expect("bank is full");
            old.copy_from_slice(h);
            old
        } else {
            h.to_vec()
        };
        self.buffer.push_back(slot);
        Ok(())
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &[f32]> + '_ {
        self.buffer.iter().map(Vec::as_slice)
    }

    pub fn thresholds(&self, p: f64) -> Result<ClipState> {
        thresholds_from_rows(self.iter(), self.dim, p, ClipSource::MemoryBank)
    }
}
