//! Temporal pooling of frame embeddings into one fixed-width vector.
//!
//! All reductions run in `f64` over the stored `f32` frames.

use serde::{Deserialize, Serialize};

use crate::embedding_store::EmbeddingSequence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolingKind {
    #[default]
    Mean,
    Max,
    Attention,
}

impl std::fmt::Display for PoolingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PoolingKind::Mean => "mean",
            PoolingKind::Max => "max",
            PoolingKind::Attention => "attention",
        })
    }
}

impl std::str::FromStr for PoolingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(PoolingKind::Mean),
            "max" => Ok(PoolingKind::Max),
            "attention" => Ok(PoolingKind::Attention),
            _ => Err(Error::Config(format!("unknown pooling '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PooledVector {
    pub segment_id: String,
    pub rendition: String,
    pub values: Vec<f64>,
}

/// Linear frame scorer `s_i = w·h_i + b` followed by a softmax over frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionPoolParams {
    pub score_weights: Vec<f64>,
    pub score_bias: f64,
}

impl AttentionPoolParams {
    /// Zero scorer; pools exactly like [`mean_pool`].
    pub fn zeros(dim: usize) -> Self {
        Self {
            score_weights: vec![0.0; dim],
            score_bias: 0.0,
        }
    }
}

fn pooled(seq: &EmbeddingSequence, values: Vec<f64>) -> PooledVector {
    PooledVector {
        segment_id: seq.segment_id().to_string(),
        rendition: seq.rendition().to_string(),
        values,
    }
}

fn non_empty(seq: &EmbeddingSequence) -> Result<()> {
    if seq.frames() == 0 {
        return Err(Error::EmptyInput(format!(
            "{}/{} has no frames",
            seq.segment_id(),
            seq.rendition()
        )));
    }
    Ok(())
}

pub fn mean_pool(seq: &EmbeddingSequence) -> Result<PooledVector> {
    non_empty(seq)?;
    let mut acc = vec![0.0f64; seq.dim()];
    for i in 0..seq.frames() {
        for (a, &v) in acc.iter_mut().zip(seq.frame(i)) {
            *a += f64::from(v);
        }
    }
    let n = seq.frames() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(pooled(seq, acc))
}

pub fn max_pool(seq: &EmbeddingSequence) -> Result<PooledVector> {
    non_empty(seq)?;
    let mut acc: Vec<f64> = seq.frame(0).iter().map(|&v| f64::from(v)).collect();
    for i in 1..seq.frames() {
        for (a, &v) in acc.iter_mut().zip(seq.frame(i)) {
            *a = a.max(f64::from(v));
        }
    }
    Ok(pooled(seq, acc))
}

fn check_params(seq: &EmbeddingSequence, params: &AttentionPoolParams) -> Result<()> {
    non_empty(seq)?;
    if params.score_weights.len() != seq.dim() {
        return Err(Error::Contract(format!(
            "attention scorer has width {}, frames have {}",
            params.score_weights.len(),
            seq.dim()
        )));
    }
    Ok(())
}

/// Unnormalized stabilized exponentials and their sum.
fn score_exps(seq: &EmbeddingSequence, params: &AttentionPoolParams) -> (Vec<f64>, f64) {
    let scores: Vec<f64> = (0..seq.frames())
        .map(|i| {
            seq.frame(i)
                .iter()
                .zip(&params.score_weights)
                .map(|(&h, w)| f64::from(h) * w)
                .sum::<f64>()
                + params.score_bias
        })
        .collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z = exps.iter().sum();
    (exps, z)
}

fn softmax_weights(seq: &EmbeddingSequence, params: &AttentionPoolParams) -> Vec<f64> {
    let (exps, z) = score_exps(seq, params);
    exps.into_iter().map(|e| e / z).collect()
}

/// Returns the pooled vector and the per-frame softmax weights.
pub fn attention_pool(
    seq: &EmbeddingSequence,
    params: &AttentionPoolParams,
) -> Result<(PooledVector, Vec<f64>)> {
    check_params(seq, params)?;
    // Normalize after accumulation so equal scores reproduce mean_pool bit for bit.
    let (exps, z) = score_exps(seq, params);
    let mut out = vec![0.0; seq.dim()];
    for (i, &e) in exps.iter().enumerate() {
        for (o, &h) in out.iter_mut().zip(seq.frame(i)) {
            *o += e * f64::from(h);
        }
    }
    out.iter_mut().for_each(|o| *o /= z);
    let alpha = exps.into_iter().map(|e| e / z).collect();
    Ok((pooled(seq, out), alpha))
}

/// Gradients of `upstream · attention_pool(seq, params)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionGrads {
    pub params: AttentionPoolParams,
    /// Row-major `frames × dim`, only when requested.
    pub frames: Option<Vec<f64>>,
}

pub fn attention_pool_backward(
    seq: &EmbeddingSequence,
    params: &AttentionPoolParams,
    upstream: &[f64],
    want_frame_grads: bool,
) -> Result<AttentionGrads> {
    check_params(seq, params)?;
    if upstream.len() != seq.dim() {
        return Err(Error::Contract(format!(
            "upstream gradient has width {}, expected {}",
            upstream.len(),
            seq.dim()
        )));
    }
    let alpha = softmax_weights(seq, params);
    // dL/dalpha_i = u·h_i ; dL/ds_i = alpha_i (g_i - sum_j alpha_j g_j)
    let g: Vec<f64> = (0..seq.frames())
        .map(|i| {
            seq.frame(i)
                .iter()
                .zip(upstream)
                .map(|(&h, u)| f64::from(h) * u)
                .sum()
        })
        .collect();
    let g_bar: f64 = alpha.iter().zip(&g).map(|(a, g)| a * g).sum();
    let ds: Vec<f64> = alpha.iter().zip(&g).map(|(a, g)| a * (g - g_bar)).collect();

    let mut dw = vec![0.0; seq.dim()];
    for (i, &d) in ds.iter().enumerate() {
        for (w, &h) in dw.iter_mut().zip(seq.frame(i)) {
            *w += d * f64::from(h);
        }
    }
    let db = ds.iter().sum();

    let frames = want_frame_grads.then(|| {
        let mut out = Vec::with_capacity(seq.frames() * seq.dim());
        for (&a, &d) in alpha.iter().zip(&ds) {
            out.extend(
                upstream
                    .iter()
                    .zip(&params.score_weights)
                    .map(|(u, w)| a * u + d * w),
            );
        }
        out
    });

    Ok(AttentionGrads {
        params: AttentionPoolParams {
            score_weights: dw,
            score_bias: db,
        },
        frames,
    })
}
