use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::SplitMix64;

/// Two-layer regressor `ŷ = W2 · ReLU(mask ⊙ (W1 z + b1)) + b2`.
///
/// `w1` is `hidden × input` and `w2` is `output × hidden`, both row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorParams {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl RegressorParams {
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Self {
            input,
            hidden,
            output,
            w1: vec![0.0; hidden * input],
            b1: vec![0.0; hidden],
            w2: vec![0.0; output * hidden],
            b2: vec![0.0; output],
        }
    }

    /// Weights uniform in `±sqrt(6 / fan_in)`, biases zero. `w1` is drawn
    /// first, row by row, then `w2`.
    pub fn init(input: usize, hidden: usize, output: usize, rng: &mut SplitMix64) -> Self {
        let mut p = Self::zeros(input, hidden, output);
        let a1 = (6.0 / input as f64).sqrt();
        p.w1.iter_mut().for_each(|w| *w = rng.uniform(-a1, a1));
        let a2 = (6.0 / hidden as f64).sqrt();
        p.w2.iter_mut().for_each(|w| *w = rng.uniform(-a2, a2));
        p
    }

    pub fn check(&self) -> Result<()> {
        let ok = self.w1.len() == self.hidden * self.input
            && self.b1.len() == self.hidden
            && self.w2.len() == self.output * self.hidden
            && self.b2.len() == self.output;
        if !ok {
            return Err(Error::Contract("regressor parameter shapes are inconsistent".into()));
        }
        Ok(())
    }
}

/// Dot product with four independent accumulators (fixed order, so results
/// are reproducible).
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Everything backward needs from one forward pass over a batch.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Matrix,
    /// `mask ⊙ (W1 z + b1)`, before the ReLU.
    masked: Matrix,
    mask: Option<Matrix>,
    activations: Matrix,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.inputs.rows()
    }
}

/// Forward pass over a batch (one sample per row of `inputs`).
///
/// `masks` (training only) holds one row per sample with entries in
/// `{0, 1/(1-p)}`.
pub fn forward(
    params: &RegressorParams,
    inputs: &Matrix,
    masks: Option<&Matrix>,
) -> Result<(Matrix, ForwardCache)> {
    params.check()?;
    if inputs.cols() != params.input {
        return Err(Error::Contract(format!(
            "input width {} does not match regressor input {}",
            inputs.cols(),
            params.input
        )));
    }
    if let Some(m) = masks {
        if m.rows() != inputs.rows() || m.cols() != params.hidden {
            return Err(Error::Contract("dropout mask shape mismatch".into()));
        }
    }
    let n = inputs.rows();
    let mut masked = Matrix::zeros(n, params.hidden);
    let mut activations = Matrix::zeros(n, params.hidden);
    let mut out = Matrix::zeros(n, params.output);
    for s in 0..n {
        let z = inputs.row(s);
        for j in 0..params.hidden {
            let w = &params.w1[j * params.input..(j + 1) * params.input];
            let mut a = dot(w, z) + params.b1[j];
            if let Some(m) = masks {
                a *= m.get(s, j);
            }
            masked.set(s, j, a);
            activations.set(s, j, if a > 0.0 { a } else { 0.0 });
        }
        let h = activations.row(s);
        for k in 0..params.output {
            let w = &params.w2[k * params.hidden..(k + 1) * params.hidden];
            out.set(s, k, dot(w, h) + params.b2[k]);
        }
    }
    Ok((
        out,
        ForwardCache {
            inputs: inputs.clone(),
            masked,
            mask: masks.cloned(),
            activations,
        },
    ))
}

/// Single-sample convenience wrapper around [`forward`].
pub fn predict_one(params: &RegressorParams, z: &[f64]) -> Result<Vec<f64>> {
    let m = Matrix::from_vec(1, z.len(), z.to_vec())?;
    Ok(forward(params, &m, None)?.0.into_vec())
}

/// Parameter gradients, plus input gradients when requested.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: RegressorParams,
    pub inputs: Option<Matrix>,
}

/// Exact gradients given `dL/dŷ` for every sample of the cached batch.
pub fn backward(
    params: &RegressorParams,
    cache: &ForwardCache,
    loss_grad: &Matrix,
    want_input_grads: bool,
) -> Result<Gradients> {
    let n = cache.batch_size();
    if loss_grad.rows() != n || loss_grad.cols() != params.output {
        return Err(Error::Contract(format!(
            "loss gradient is {}x{}, cache holds {n} samples of width {}",
            loss_grad.rows(),
            loss_grad.cols(),
            params.output
        )));
    }
    if cache.masked.cols() != params.hidden || cache.inputs.cols() != params.input {
        return Err(Error::Contract("cache was produced by a different regressor".into()));
    }
    let mut g = RegressorParams::zeros(params.input, params.hidden, params.output);
    let mut dinputs = want_input_grads.then(|| Matrix::zeros(n, params.input));
    let mut da = vec![0.0; params.hidden];
    for s in 0..n {
        let dy = loss_grad.row(s);
        let h = cache.activations.row(s);
        for k in 0..params.output {
            g.b2[k] += dy[k];
            let row = &mut g.w2[k * params.hidden..(k + 1) * params.hidden];
            row.iter_mut().zip(h).for_each(|(w, &hv)| *w += dy[k] * hv);
        }
        for (j, d) in da.iter_mut().enumerate() {
            // ReLU derivative is zero at exactly zero.
            *d = if cache.masked.get(s, j) > 0.0 {
                let back: f64 = (0..params.output)
                    .map(|k| params.w2[k * params.hidden + j] * dy[k])
                    .sum();
                match &cache.mask {
                    Some(m) => back * m.get(s, j),
                    None => back,
                }
            } else {
                0.0
            };
        }
        let z = cache.inputs.row(s);
        for (j, &d) in da.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            g.b1[j] += d;
            let row = &mut g.w1[j * params.input..(j + 1) * params.input];
            row.iter_mut().zip(z).for_each(|(w, &zv)| *w += d * zv);
        }
        if let Some(dz) = dinputs.as_mut() {
            let out = dz.row_mut(s);
            for (j, &d) in da.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let w = &params.w1[j * params.input..(j + 1) * params.input];
                out.iter_mut().zip(w).for_each(|(o, &wv)| *o += d * wv);
            }
        }
    }
    Ok(Gradients {
        params: g,
        inputs: dinputs,
    })
}

/// Inverted-dropout masks: each entry is `1/(1-p)` with probability `1-p`,
/// else 0. Draws one uniform per entry, row by row.
pub fn dropout_masks(rows: usize, hidden: usize, p: f64, rng: &mut SplitMix64) -> Matrix {
    let keep = 1.0 / (1.0 - p);
    let mut m = Matrix::zeros(rows, hidden);
    m.as_mut_slice()
        .iter_mut()
        .for_each(|v| *v = if rng.next_f64() >= p { keep } else { 0.0 });
    m
}
