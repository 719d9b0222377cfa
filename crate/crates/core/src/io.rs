//! Binary trace container and clip-threshold files.
//!
//! Both file kinds share a 32-byte little-endian prelude:
//!
//! ```text
//! 0   magic            [u8; 8]   "EIGTRACE" or "EIGCLIP\0"
//! 8   format version   u32
//! 12  reserved         u32       (0)
//! 16  manifest offset  u64
//! 24  manifest length  u64
//! 32  payload ...
//!     manifest         UTF-8 JSON at the recorded offset
//! ```
//!
//! In a trace file the payload is a sequence of records and the manifest
//! holds the model metadata, the captured layers and an `(id, offset,
//! length)` index entry per record. Each record is
//!
//! ```text
//! u32 header length | JSON header | zero padding to 4 bytes | f32 tensors
//! ```
//!
//! where the header carries texts, tokens and a table of `(name, shape,
//! offset)` for the tensors that follow; tensor offsets are relative to the
//! first tensor byte. Readers stream one record at a time.
//!
//! A clip file's payload is the `h_min` and `h_max` vectors as `f64`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clipping::{ClipSource, ClipState};
use crate::error::{Error, Result};
use crate::trace::{Generation, GenerationTrace, ModelMeta, TokenMatrix};

pub const FORMAT_VERSION: u32 = 1;
const PRELUDE_LEN: u64 = 32;
const TRACE_MAGIC: &[u8; 8] = b"EIGTRACE";
const CLIP_MAGIC: &[u8; 8] = b"EIGCLIP\0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordEntry {
    pub id: String,
    pub offset: u64,
    pub length: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceManifest {
    pub format: String,
    pub version: u32,
    pub dtype: String,
    pub model_meta: Option<ModelMeta>,
    pub layers: Vec<usize>,
    pub records: Vec<RecordEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GenerationHeader {
    text: String,
    tokens: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RecordHeader {
    id: String,
    question: String,
    ground_truths: Vec<String>,
    label: Option<bool>,
    generations: Vec<GenerationHeader>,
    tensors: Vec<TensorEntry>,
}

fn align4(n: usize) -> usize {
    n.div_ceil(4) * 4
}

struct Prelude {
    version: u32,
    manifest_offset: u64,
    manifest_len: u64,
}

fn write_prelude<W: Write>(w: &mut W, magic: &[u8; 8], manifest_offset: u64, manifest_len: u64) -> std::io::Result<()> {
    w.write_all(magic)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    w.write_all(&manifest_offset.to_le_bytes())?;
    w.write_all(&manifest_len.to_le_bytes())
}

fn read_prelude<R: Read>(r: &mut R, magic: &[u8; 8], file_len: u64) -> Result<Prelude> {
    if file_len < PRELUDE_LEN {
        return Err(Error::format(file_len, "file shorter than the 32-byte prelude"));
    }
    let mut buf = [0u8; PRELUDE_LEN as usize];
    r.read_exact(&mut buf)
        .map_err(|e| Error::format(0, format!("reading prelude: {e}")))?;
    if &buf[..8] != magic {
        return Err(Error::format(0, "bad magic"));
    }
    let u32_at = |i: usize| u32::from_le_bytes(buf[i..i + 4].try_into().unwrap());
    let u64_at = |i: usize| u64::from_le_bytes(buf[i..i + 8].try_into().unwrap());
    let prelude = Prelude {
        version: u32_at(8),
        manifest_offset: u64_at(16),
        manifest_len: u64_at(24),
    };
    if prelude.version != FORMAT_VERSION {
        return Err(Error::format(
            8,
            format!("unsupported format version {}", prelude.version),
        ));
    }
    let end = prelude.manifest_offset.checked_add(prelude.manifest_len);
    if prelude.manifest_offset < PRELUDE_LEN || end.is_none_or(|e| e > file_len) {
        return Err(Error::format(
            16,
            format!(
                "manifest [{}, +{}) outside file of {file_len} bytes",
                prelude.manifest_offset, prelude.manifest_len
            ),
        ));
    }
    Ok(prelude)
}

fn read_manifest<R: Read + Seek, M: serde::de::DeserializeOwned>(r: &mut R, prelude: &Prelude) -> Result<M> {
    let pos = prelude.manifest_offset;
    r.seek(SeekFrom::Start(pos))
        .map_err(|e| Error::format(pos, e.to_string()))?;
    let mut bytes = vec![0u8; prelude.manifest_len as usize];
    r.read_exact(&mut bytes)
        .map_err(|e| Error::format(pos, format!("reading manifest: {e}")))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(pos, format!("manifest: {e}")))
}

fn push_f32s(buf: &mut Vec<u8>, values: &[f32]) {
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

fn encode_record(trace: &GenerationTrace) -> Result<Vec<u8>> {
    let mut tensors = Vec::new();
    let mut data: Vec<u8> = Vec::new();
    let mut add = |name: String, shape: Vec<usize>, values: &[f32]| {
        tensors.push(TensorEntry {
            name,
            shape,
            offset: data.len() as u64,
        });
        push_f32s(&mut data, values);
    };

    for (k, g) in trace.generations.iter().enumerate() {
        add(format!("g{k}/logprobs"), vec![g.logprobs.len()], &g.logprobs);
        if let Some(e) = &g.energies {
            add(format!("g{k}/energies"), vec![e.len()], e);
        }
        for (layer, m) in &g.hidden {
            add(format!("g{k}/hidden/{layer}"), vec![m.rows(), m.cols()], m.as_slice());
        }
        if let Some(emb) = &g.answer_embedding {
            add(format!("g{k}/answer_embedding"), vec![emb.len()], emb);
        }
    }
    if let Some(refs) = &trace.reference_embeddings {
        let dim = refs.first().map_or(0, Vec::len);
        if refs.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid_trace(&trace.id, "ragged reference embeddings"));
        }
        let flat: Vec<f32> = refs.iter().flatten().copied().collect();
        add("references".into(), vec![refs.len(), dim], &flat);
    }

    let header = RecordHeader {
        id: trace.id.clone(),
        question: trace.question.clone(),
        ground_truths: trace.ground_truths.clone(),
        label: trace.label,
        generations: trace
            .generations
            .iter()
            .map(|g| GenerationHeader {
                text: g.text.clone(),
                tokens: g.tokens.clone(),
            })
            .collect(),
        tensors,
    };
    let header = serde_json::to_vec(&header).expect("record header serializes");
    let data_start = align4(4 + header.len());
    let mut out = Vec::with_capacity(data_start + data.len());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    out.resize(data_start, 0);
    out.extend_from_slice(&data);
    Ok(out)
}

fn decode_record(bytes: &[u8], base: u64, manifest: &TraceManifest) -> Result<GenerationTrace> {
    let fail = |at: usize, msg: String| Error::format(base + at as u64, msg);
    if bytes.len() < 4 {
        return Err(fail(0, "record shorter than its length field".into()));
    }
    let header_len = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
    if 4 + header_len > bytes.len() {
        return Err(fail(0, format!("record header of {header_len} bytes overruns record")));
    }
    let header: RecordHeader = serde_json::from_slice(&bytes[4..4 + header_len])
        .map_err(|e| fail(4, format!("record header: {e}")))?;
    let data_start = align4(4 + header_len);
    if data_start > bytes.len() {
        return Err(fail(4 + header_len, "record ends inside header padding".into()));
    }
    let data = &bytes[data_start..];

    let mut tensors: BTreeMap<String, (Vec<usize>, Vec<f32>)> = BTreeMap::new();
    for t in &header.tensors {
        let numel: usize = t.shape.iter().product();
        let start = t.offset as usize;
        let at = data_start + start;
        if !start.is_multiple_of(4) {
            return Err(fail(at, format!("tensor `{}` is misaligned", t.name)));
        }
        let end = numel
            .checked_mul(4)
            .and_then(|n| start.checked_add(n))
            .filter(|&e| e <= data.len())
            .ok_or_else(|| {
                fail(at, format!("tensor `{}` with shape {:?} overruns record", t.name, t.shape))
            })?;
        let values = data[start..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if tensors.insert(t.name.clone(), (t.shape.clone(), values)).is_some() {
            return Err(fail(at, format!("duplicate tensor `{}`", t.name)));
        }
    }

    let meta = manifest
        .model_meta
        .clone()
        .ok_or_else(|| Error::format(0, "manifest has records but no model metadata"))?;
    let d = meta.hidden_dim;
    let mut take = |name: &str, shape: Option<&[usize]>| -> Result<Option<(Vec<usize>, Vec<f32>)>> {
        match tensors.remove(name) {
            None => Ok(None),
            Some((s, v)) => {
                if let Some(expected) = shape {
                    if s != expected {
                        return Err(fail(
                            0,
                            format!("tensor `{name}` has shape {s:?}, expected {expected:?}"),
                        ));
                    }
                }
                Ok(Some((s, v)))
            }
        }
    };

    let mut generations = Vec::with_capacity(header.generations.len());
    for (k, gh) in header.generations.into_iter().enumerate() {
        let t = gh.tokens.len();
        let (_, logprobs) = take(&format!("g{k}/logprobs"), Some(&[t]))?
            .ok_or_else(|| fail(0, format!("generation {k} has no logprobs tensor")))?;
        let energies = take(&format!("g{k}/energies"), Some(&[t]))?.map(|(_, v)| v);
        let mut hidden = BTreeMap::new();
        for &layer in &manifest.layers {
            let (_, v) = take(&format!("g{k}/hidden/{layer}"), Some(&[t, d]))?
                .ok_or_else(|| fail(0, format!("generation {k} is missing layer {layer}")))?;
            hidden.insert(layer, TokenMatrix::new(t, d, v)?);
        }
        let answer_embedding = match take(&format!("g{k}/answer_embedding"), None)? {
            Some((s, v)) if s.len() == 1 => Some(v),
            Some((s, _)) => return Err(fail(0, format!("answer embedding has shape {s:?}"))),
            None => None,
        };
        generations.push(Generation {
            text: gh.text,
            tokens: gh.tokens,
            logprobs,
            energies,
            hidden,
            answer_embedding,
        });
    }
    let reference_embeddings = match take("references", None)? {
        Some((s, v)) if s.len() == 2 => Some(if s[1] == 0 {
            vec![Vec::new(); s[0]]
        } else {
            v.chunks_exact(s[1]).map(<[f32]>::to_vec).collect()
        }),
        Some((s, _)) => return Err(fail(0, format!("references tensor has shape {s:?}"))),
        None => None,
    };
    if let Some(name) = tensors.keys().next() {
        return Err(fail(0, format!("unexpected tensor `{name}`")));
    }

    let trace = GenerationTrace {
        id: header.id,
        question: header.question,
        ground_truths: header.ground_truths,
        generations,
        model_meta: meta,
        reference_embeddings,
        label: header.label,
    };
    trace
        .validate()
        .map_err(|e| Error::format(base, e.to_string()))?;
    Ok(trace)
}

/// Streaming writer; call [`TraceWriter::finish`] to seal the file.
pub struct TraceWriter {
    out: BufWriter<File>,
    path: PathBuf,
    offset: u64,
    model_meta: Option<ModelMeta>,
    layers: Vec<usize>,
    records: Vec<RecordEntry>,
}

impl TraceWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        // placeholder prelude; patched by `finish`
        write_prelude(&mut out, TRACE_MAGIC, 0, 0).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            out,
            path,
            offset: PRELUDE_LEN,
            model_meta: None,
            layers: Vec::new(),
            records: Vec::new(),
        })
    }

    pub fn write(&mut self, trace: &GenerationTrace) -> Result<()> {
        trace.validate()?;
        let layers = trace.captured_layers();
        match &self.model_meta {
            None => {
                self.model_meta = Some(trace.model_meta.clone());
                self.layers = layers;
            }
            Some(meta) => {
                if *meta != trace.model_meta {
                    return Err(Error::invalid_trace(
                        &trace.id,
                        "model metadata differs from earlier traces in this file",
                    ));
                }
                if self.layers != layers {
                    return Err(Error::invalid_trace(
                        &trace.id,
                        format!("captures layers {layers:?}, file holds {:?}", self.layers),
                    ));
                }
            }
        }
        let bytes = encode_record(trace)?;
        self.out
            .write_all(&bytes)
            .map_err(|e| Error::io(&self.path, e))?;
        self.records.push(RecordEntry {
            id: trace.id.clone(),
            offset: self.offset,
            length: bytes.len() as u64,
        });
        self.offset += bytes.len() as u64;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        let manifest = TraceManifest {
            format: "eigenscore-trace".into(),
            version: FORMAT_VERSION,
            dtype: "f32le".into(),
            model_meta: self.model_meta.take(),
            layers: std::mem::take(&mut self.layers),
            records: std::mem::take(&mut self.records),
        };
        let json = serde_json::to_vec(&manifest).expect("manifest serializes");
        let path = self.path.clone();
        let io = |e| Error::io(&path, e);
        self.out.write_all(&json).map_err(io)?;
        self.out.seek(SeekFrom::Start(0)).map_err(io)?;
        write_prelude(&mut self.out, TRACE_MAGIC, self.offset, json.len() as u64).map_err(io)?;
        self.out.flush().map_err(io)?;
        Ok(())
    }
}

pub fn write_traces<'a>(
    path: impl AsRef<Path>,
    traces: impl IntoIterator<Item = &'a GenerationTrace>,
) -> Result<()> {
    let mut w = TraceWriter::create(path)?;
    for t in traces {
        w.write(t)?;
    }
    w.finish()
}

/// Lazily yields the traces of a file, one record in memory at a time.
pub struct TraceReader {
    file: BufReader<File>,
    manifest: TraceManifest,
    next: usize,
}

impl TraceReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let file_len = file.metadata().map_err(|e| Error::io(path, e))?.len();
        let mut file = BufReader::new(file);
        let prelude = read_prelude(&mut file, TRACE_MAGIC, file_len)?;
        let manifest: TraceManifest = read_manifest(&mut file, &prelude)?;
        if manifest.version != FORMAT_VERSION {
            return Err(Error::format(
                prelude.manifest_offset,
                format!("manifest declares version {}", manifest.version),
            ));
        }
        if manifest.dtype != "f32le" {
            return Err(Error::format(
                prelude.manifest_offset,
                format!("unsupported dtype `{}`", manifest.dtype),
            ));
        }
        for r in &manifest.records {
            let end = r.offset.checked_add(r.length);
            if r.offset < PRELUDE_LEN || end.is_none_or(|e| e > prelude.manifest_offset) {
                return Err(Error::format(
                    r.offset,
                    format!("record `{}` [{}, +{}) lies outside the payload", r.id, r.offset, r.length),
                ));
            }
        }
        Ok(Self {
            file,
            manifest,
            next: 0,
        })
    }

    pub fn manifest(&self) -> &TraceManifest {
        &self.manifest
    }

    pub fn len(&self) -> usize {
        self.manifest.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.records.is_empty()
    }

    /// Reads record `index` regardless of the iteration cursor.
    pub fn read_record(&mut self, index: usize) -> Result<GenerationTrace> {
        let entry = self
            .manifest
            .records
            .get(index)
            .ok_or_else(|| Error::InvalidArgument(format!("no record {index}")))?
            .clone();
        self.file
            .seek(SeekFrom::Start(entry.offset))
            .map_err(|e| Error::format(entry.offset, e.to_string()))?;
        let mut bytes = vec![0u8; entry.length as usize];
        self.file
            .read_exact(&mut bytes)
            .map_err(|e| Error::format(entry.offset, format!("reading record: {e}")))?;
        let trace = decode_record(&bytes, entry.offset, &self.manifest)?;
        if trace.id != entry.id {
            return Err(Error::format(
                entry.offset,
                format!("record id `{}` does not match index entry `{}`", trace.id, entry.id),
            ));
        }
        Ok(trace)
    }
}

impl Iterator for TraceReader {
    type Item = Result<GenerationTrace>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.manifest.records.len() {
            return None;
        }
        let result = self.read_record(self.next);
        // stop after the first corrupt record
        self.next = if result.is_ok() {
            self.next + 1
        } else {
            self.manifest.records.len()
        };
        Some(result)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rest = self.manifest.records.len() - self.next;
        (rest, Some(rest))
    }
}

pub fn read_traces(path: impl AsRef<Path>) -> Result<TraceReader> {
    TraceReader::open(path)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ClipManifest {
    format: String,
    version: u32,
    dtype: String,
    dim: usize,
    percentile: f64,
    source: ClipSource,
    layer: Option<usize>,
    tensors: Vec<TensorEntry>,
}

pub fn write_clip_state(path: impl AsRef<Path>, state: &ClipState) -> Result<()> {
    let path = path.as_ref();
    let d = state.dim();
    let bytes_per = 8 * d as u64;
    let manifest = ClipManifest {
        format: "eigenscore-clip".into(),
        version: FORMAT_VERSION,
        dtype: "f64le".into(),
        dim: d,
        percentile: state.percentile,
        source: state.source,
        layer: state.layer,
        tensors: vec![
            TensorEntry {
                name: "h_min".into(),
                shape: vec![d],
                offset: PRELUDE_LEN,
            },
            TensorEntry {
                name: "h_max".into(),
                shape: vec![d],
                offset: PRELUDE_LEN + bytes_per,
            },
        ],
    };
    let json = serde_json::to_vec(&manifest).expect("clip manifest serializes");
    let mut buf = Vec::with_capacity(PRELUDE_LEN as usize + 2 * bytes_per as usize + json.len());
    write_prelude(&mut buf, CLIP_MAGIC, PRELUDE_LEN + 2 * bytes_per, json.len() as u64)
        .expect("in-memory write");
    for v in state.h_min.iter().chain(&state.h_max) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&json);
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_clip_state(path: impl AsRef<Path>) -> Result<ClipState> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cursor = std::io::Cursor::new(&bytes);
    let prelude = read_prelude(&mut cursor, CLIP_MAGIC, bytes.len() as u64)?;
    let manifest: ClipManifest = read_manifest(&mut cursor, &prelude)?;
    if manifest.dtype != "f64le" {
        return Err(Error::format(
            prelude.manifest_offset,
            format!("unsupported dtype `{}`", manifest.dtype),
        ));
    }
    let tensor = |name: &str| -> Result<Vec<f64>> {
        let t = manifest
            .tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::format(prelude.manifest_offset, format!("missing tensor `{name}`")))?;
        if t.shape != [manifest.dim] {
            return Err(Error::format(t.offset, format!("`{name}` has shape {:?}", t.shape)));
        }
        let start = t.offset as usize;
        let end = start + 8 * manifest.dim;
        if start < PRELUDE_LEN as usize || end as u64 > prelude.manifest_offset {
            return Err(Error::format(t.offset, format!("`{name}` lies outside the payload")));
        }
        Ok(bytes[start..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    };
    let mut state = ClipState::new(tensor("h_min")?, tensor("h_max")?, manifest.percentile, manifest.source)
        .map_err(|e| Error::format(PRELUDE_LEN, e.to_string()))?;
    state.layer = manifest.layer;
    Ok(state)
}
