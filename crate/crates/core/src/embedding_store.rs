//! PEMB embedding files and the manifest that indexes them.
//!
//! One file holds the frame embeddings of one `(segment, rendition)` pair:
//!
//! ```text
//! offset  size        field
//! 0       4           magic, ASCII "PEMB"
//! 4       4           version (u32 LE) = 1
//! 8       4           dim (u32 LE), columns per frame
//! 12      4           frames (u32 LE), rows
//! 16      4           meta_len (u32 LE)
//! 20      meta_len    UTF-8 JSON metadata
//! 20+m    frames*dim*4  f32 LE payload, row-major
//! ```
//!
//! The metadata is compact JSON with keys in this exact order:
//! `{"segment_id":..,"rendition":..,"layer_set":[..],"payload_sha256":".."}`.
//! `payload_sha256` is the lowercase hex SHA-256 of the first three keys
//! serialized the same way, followed by `dim` and `frames` as u32 LE and the
//! raw payload bytes. Readers require the metadata bytes to be exactly the
//! canonical serialization and the digest to match, so any single-byte change
//! to a file is detected.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"PEMB";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 20;
pub const FILE_EXTENSION: &str = "pemb";

/// Frame embeddings for one `(segment, rendition)`, stored as `frames × dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequence {
    segment_id: String,
    rendition: String,
    layer_set: Vec<u32>,
    dim: usize,
    frames: usize,
    data: Vec<f32>,
}

impl EmbeddingSequence {
    pub fn new(
        segment_id: impl Into<String>,
        rendition: impl Into<String>,
        layer_set: Vec<u32>,
        dim: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Contract("embedding dim must be at least 1".into()));
        }
        if data.is_empty() || data.len() % dim != 0 {
            return Err(Error::Contract(format!(
                "payload of {} values does not form whole frames of width {dim}",
                data.len()
            )));
        }
        if layer_set.is_empty() {
            return Err(Error::Contract("layer_set must not be empty".into()));
        }
        if layer_set.iter().any(|&l| l == 0) {
            return Err(Error::Contract("layer indices must be positive".into()));
        }
        if dim % layer_set.len() != 0 {
            return Err(Error::Contract(format!(
                "dim {dim} is not divisible by {} layers",
                layer_set.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        Ok(Self {
            segment_id: segment_id.into(),
            rendition: rendition.into(),
            frames: data.len() / dim,
            layer_set,
            dim,
            data,
        })
    }

    /// Convenience constructor from per-frame rows.
    pub fn from_frames(
        segment_id: impl Into<String>,
        rendition: impl Into<String>,
        layer_set: Vec<u32>,
        frames: &[Vec<f32>],
    ) -> Result<Self> {
        let dim = frames.first().map_or(0, Vec::len);
        if frames.iter().any(|f| f.len() != dim) {
            return Err(Error::Contract("frames have unequal widths".into()));
        }
        let data = frames.iter().flatten().copied().collect();
        Self::new(segment_id, rendition, layer_set, dim, data)
    }

    pub fn segment_id(&self) -> &str {
        &self.segment_id
    }

    pub fn rendition(&self) -> &str {
        &self.rendition
    }

    pub fn layer_set(&self) -> &[u32] {
        &self.layer_set
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn frame(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Columns per layer.
    pub fn layer_width(&self) -> usize {
        self.dim / self.layer_set.len()
    }

    fn layer_block(&self, layer: u32) -> Option<usize> {
        self.layer_set.iter().position(|&l| l == layer)
    }
}

/// `<segment_id>__<rendition>.pemb`
pub fn file_name(segment_id: &str, rendition: &str) -> String {
    format!("{segment_id}__{rendition}.{FILE_EXTENSION}")
}

#[derive(Serialize)]
struct MetaBody<'a> {
    segment_id: &'a str,
    rendition: &'a str,
    layer_set: &'a [u32],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    segment_id: String,
    rendition: String,
    layer_set: Vec<u32>,
    payload_sha256: String,
}

fn payload_digest(body: &[u8], dim: u32, frames: u32, payload: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(body);
    h.update(dim.to_le_bytes());
    h.update(frames.to_le_bytes());
    h.update(payload);
    hex::encode(h.finalize())
}

fn payload_bytes(data: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len() * 4);
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Tracks the absolute offset so write failures can report where they happened.
struct OffsetWriter<W> {
    inner: W,
    offset: u64,
}

impl<W: Write> OffsetWriter<W> {
    fn put(&mut self, bytes: &[u8]) -> Result<()> {
        self.inner.write_all(bytes).map_err(|source| Error::Io {
            offset: self.offset,
            source,
        })?;
        self.offset += bytes.len() as u64;
        Ok(())
    }
}

fn encode(seq: &EmbeddingSequence) -> Result<(Vec<u8>, Vec<u8>)> {
    let dim = u32::try_from(seq.dim).map_err(|_| Error::Contract("dim exceeds u32".into()))?;
    let frames =
        u32::try_from(seq.frames).map_err(|_| Error::Contract("frame count exceeds u32".into()))?;
    let body = serde_json::to_vec(&MetaBody {
        segment_id: &seq.segment_id,
        rendition: &seq.rendition,
        layer_set: &seq.layer_set,
    })?;
    let payload = payload_bytes(&seq.data);
    let meta = serde_json::to_vec(&Meta {
        segment_id: seq.segment_id.clone(),
        rendition: seq.rendition.clone(),
        layer_set: seq.layer_set.clone(),
        payload_sha256: payload_digest(&body, dim, frames, &payload),
    })?;
    let meta_len =
        u32::try_from(meta.len()).map_err(|_| Error::Contract("metadata too large".into()))?;

    let mut head = Vec::with_capacity(HEADER_LEN + meta.len());
    head.extend_from_slice(&MAGIC);
    head.extend_from_slice(&VERSION.to_le_bytes());
    head.extend_from_slice(&dim.to_le_bytes());
    head.extend_from_slice(&frames.to_le_bytes());
    head.extend_from_slice(&meta_len.to_le_bytes());
    head.extend_from_slice(&meta);
    Ok((head, payload))
}

/// Serializes `seq` to `sink`, returning the number of bytes written.
pub fn write_embedding<W: Write>(seq: &EmbeddingSequence, sink: W) -> Result<u64> {
    let (head, payload) = encode(seq)?;
    let mut w = OffsetWriter {
        inner: sink,
        offset: 0,
    };
    w.put(&head)?;
    w.put(&payload)?;
    w.inner.flush().map_err(|source| Error::Io {
        offset: w.offset,
        source,
    })?;
    Ok(w.offset)
}

/// Reads until `buf` is full or the source ends; returns bytes read.
fn read_full<R: Read>(src: &mut R, buf: &mut [u8], base_offset: u64) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match src.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(source) => {
                return Err(Error::Io {
                    offset: base_offset + filled as u64,
                    source,
                })
            }
        }
    }
    Ok(filled)
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

/// Parses and fully validates one PEMB stream.
pub fn read_embedding<R: Read>(mut source: R) -> Result<EmbeddingSequence> {
    let mut header = [0u8; HEADER_LEN];
    let got = read_full(&mut source, &mut header, 0)?;
    if got < 4 || header[..4] != MAGIC {
        if got >= 4 {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected \"PEMB\"",
                String::from_utf8_lossy(&header[..4])
            )));
        }
        return Err(Error::Corrupt {
            expected: HEADER_LEN as u64,
            actual: got as u64,
        });
    }
    if got < HEADER_LEN {
        return Err(Error::Corrupt {
            expected: HEADER_LEN as u64,
            actual: got as u64,
        });
    }
    let version = u32_at(&header, 4);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let dim = u32_at(&header, 8);
    let frames = u32_at(&header, 12);
    let meta_len = u32_at(&header, 16) as usize;
    if dim == 0 || frames == 0 {
        return Err(Error::Format(format!(
            "header declares {frames} frames of width {dim}"
        )));
    }

    let mut meta_bytes = Vec::new();
    let got = (&mut source)
        .take(meta_len as u64)
        .read_to_end(&mut meta_bytes)
        .map_err(|source| Error::Io {
            offset: HEADER_LEN as u64,
            source,
        })?;
    if got < meta_len {
        return Err(Error::Corrupt {
            expected: (HEADER_LEN + meta_len) as u64,
            actual: (HEADER_LEN + got) as u64,
        });
    }
    let meta: Meta = serde_json::from_slice(&meta_bytes)
        .map_err(|e| Error::Format(format!("metadata is not valid: {e}")))?;
    if serde_json::to_vec(&meta)? != meta_bytes {
        return Err(Error::Format("metadata is not in canonical form".into()));
    }

    let expected_payload = u64::from(dim) * u64::from(frames) * 4;
    let payload_offset = (HEADER_LEN + meta_len) as u64;
    let mut payload = Vec::new();
    (&mut source)
        .take(expected_payload)
        .read_to_end(&mut payload)
        .map_err(|source| Error::Io {
            offset: payload_offset,
            source,
        })?;
    if (payload.len() as u64) < expected_payload {
        return Err(Error::Corrupt {
            expected: expected_payload,
            actual: payload.len() as u64,
        });
    }
    let mut probe = [0u8; 1];
    if read_full(&mut source, &mut probe, payload_offset + expected_payload)? != 0 {
        return Err(Error::Corrupt {
            expected: expected_payload,
            actual: expected_payload + 1,
        });
    }

    let body = serde_json::to_vec(&MetaBody {
        segment_id: &meta.segment_id,
        rendition: &meta.rendition,
        layer_set: &meta.layer_set,
    })?;
    if payload_digest(&body, dim, frames, &payload) != meta.payload_sha256 {
        return Err(Error::Format("payload digest mismatch".into()));
    }

    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
        .collect();
    EmbeddingSequence::new(
        meta.segment_id,
        meta.rendition,
        meta.layer_set,
        dim as usize,
        data,
    )
    .map_err(|e| match e {
        Error::Contract(msg) => Error::Format(msg),
        other => other,
    })
}

pub fn write_embedding_file(seq: &EmbeddingSequence, path: &Path) -> Result<u64> {
    let f = File::create(path).map_err(|e| Error::file(path, e))?;
    write_embedding(seq, BufWriter::new(f))
}

pub fn read_embedding_file(path: &Path) -> Result<EmbeddingSequence> {
    let f = File::open(path).map_err(|e| Error::file(path, e))?;
    read_embedding(BufReader::new(f))
}

/// Column-concatenates the requested layers in ascending layer order.
///
/// Each input may carry one or several layers; every requested layer must be
/// present in exactly one input.
pub fn concat_layers(per_layer: &[EmbeddingSequence], layers: &[u32]) -> Result<EmbeddingSequence> {
    let first = per_layer
        .first()
        .ok_or_else(|| Error::EmptyInput("no layer sequences given".into()))?;
    for s in &per_layer[1..] {
        if s.frames != first.frames {
            return Err(Error::Alignment(format!(
                "frame counts differ: {} vs {}",
                first.frames, s.frames
            )));
        }
        if s.segment_id != first.segment_id || s.rendition != first.rendition {
            return Err(Error::Alignment(format!(
                "mixing {}/{} with {}/{}",
                first.segment_id, first.rendition, s.segment_id, s.rendition
            )));
        }
    }
    let wanted: BTreeSet<u32> = layers.iter().copied().collect();
    if wanted.is_empty() {
        return Err(Error::EmptyInput("no layers requested".into()));
    }

    let mut blocks = Vec::with_capacity(wanted.len());
    for &layer in &wanted {
        let mut hits = per_layer
            .iter()
            .filter_map(|s| s.layer_block(layer).map(|b| (s, b)));
        let hit = hits.next().ok_or(Error::MissingLayer(layer))?;
        if hits.next().is_some() {
            return Err(Error::Alignment(format!("layer {layer} supplied twice")));
        }
        blocks.push(hit);
    }

    let dim: usize = blocks.iter().map(|(s, _)| s.layer_width()).sum();
    let mut data = Vec::with_capacity(dim * first.frames);
    for f in 0..first.frames {
        for (s, b) in &blocks {
            let w = s.layer_width();
            data.extend_from_slice(&s.frame(f)[b * w..(b + 1) * w]);
        }
    }
    EmbeddingSequence::new(
        first.segment_id.clone(),
        first.rendition.clone(),
        wanted.into_iter().collect(),
        dim,
        data,
    )
}

/// One row of the manifest JSON array.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub segment_id: String,
    pub rendition: String,
    pub embedding_path: PathBuf,
}

/// Loads a manifest; relative `embedding_path`s resolve against its directory.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let mut entries: Vec<ManifestEntry> = serde_json::from_str(&text)?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut seen = BTreeSet::new();
    for e in &mut entries {
        if !seen.insert((e.segment_id.clone(), e.rendition.clone())) {
            return Err(Error::Duplicate(format!(
                "manifest lists {}/{} twice",
                e.segment_id, e.rendition
            )));
        }
        if e.embedding_path.is_relative() {
            e.embedding_path = base.join(&e.embedding_path);
        }
    }
    Ok(entries)
}

pub fn save_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let text = serde_json::to_string_pretty(entries)?;
    std::fs::write(path, text).map_err(|e| Error::file(path, e))
}
