//! Model checkpoint files.
//!
//! ```text
//! "PMLP" | u32 LE header_len | header JSON | f64 LE blocks
//! ```
//!
//! Blocks follow the order listed in the header: `w1` (hidden × input,
//! row-major), `b1`, `w2` (output × hidden), `b2`, then `attention_w` and
//! `attention_b` when the model pools with attention.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pooling::AttentionPoolParams;

use super::adam::ParamBlocks;
use super::mlp::RegressorParams;
use super::train::Model;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"PMLP";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    pub attention: bool,
    pub config_fingerprint: String,
    pub blocks: Vec<(String, usize)>,
}

pub fn write_checkpoint<W: Write>(model: &Model, config_fingerprint: &str, mut sink: W) -> Result<u64> {
    let r = &model.regressor;
    r.check()?;
    let blocks = model.blocks();
    let header = CheckpointHeader {
        input: r.input,
        hidden: r.hidden,
        output: r.output,
        attention: model.attention.is_some(),
        config_fingerprint: config_fingerprint.to_string(),
        blocks: blocks.iter().map(|(n, b)| (n.to_string(), b.len())).collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut buf = Vec::with_capacity(8 + json.len() + 8 * blocks.iter().map(|(_, b)| b.len()).sum::<usize>());
    buf.extend_from_slice(&CHECKPOINT_MAGIC);
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    for (_, b) in &blocks {
        for v in *b {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    sink.write_all(&buf)
        .and_then(|_| sink.flush())
        .map_err(|source| Error::Io { offset: 0, source })?;
    Ok(buf.len() as u64)
}

pub fn read_checkpoint<R: Read>(mut source: R) -> Result<(Model, CheckpointHeader)> {
    let mut bytes = Vec::new();
    source
        .read_to_end(&mut bytes)
        .map_err(|source| Error::Io { offset: 0, source })?;
    if bytes.len() < 8 || bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a checkpoint file".into()));
    }
    let header_len = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let header_end = 8usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or(Error::Corrupt {
            expected: 8 + header_len as u64,
            actual: bytes.len() as u64,
        })?;
    let header: CheckpointHeader = serde_json::from_slice(&bytes[8..header_end])
        .map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;

    let mut model = Model {
        regressor: RegressorParams::zeros(header.input, header.hidden, header.output),
        attention: header.attention.then(|| AttentionPoolParams::zeros(header.input)),
    };
    let expected: Vec<(String, usize)> = model
        .blocks()
        .iter()
        .map(|(n, b)| (n.to_string(), b.len()))
        .collect();
    if expected != header.blocks {
        return Err(Error::Format("checkpoint block layout does not match its shapes".into()));
    }
    let total: usize = expected.iter().map(|(_, n)| n * 8).sum();
    if bytes.len() - header_end != total {
        return Err(Error::Corrupt {
            expected: total as u64,
            actual: (bytes.len() - header_end) as u64,
        });
    }
    let mut values = bytes[header_end..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    for (_, block) in model.blocks_mut() {
        for v in block.iter_mut() {
            *v = values.next().expect("length checked");
        }
    }
    Ok((model, header))
}

pub fn save_checkpoint(model: &Model, config_fingerprint: &str, path: &Path) -> Result<u64> {
    let f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    write_checkpoint(model, config_fingerprint, std::io::BufWriter::new(f))
}

pub fn load_checkpoint(path: &Path) -> Result<(Model, CheckpointHeader)> {
    let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    read_checkpoint(std::io::BufReader::new(f))
}
