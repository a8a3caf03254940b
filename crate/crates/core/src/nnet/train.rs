use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{PairKey, SplitPlan};
use crate::embedding_store::EmbeddingSequence;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics;
use crate::pooling::{attention_pool, attention_pool_backward, AttentionPoolParams};
use crate::rng::{derive_seed, SplitMix64};

use super::adam::{adam_step, AdamConfig, AdamState, ParamBlocks};
use super::loss::LossKind;
use super::mlp::{backward, dropout_masks, forward, RegressorParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub dropout: f64,
    pub hidden: usize,
    pub loss: LossKind,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 200,
            batch_size: 64,
            patience: 15,
            dropout: 0.3,
            hidden: 512,
            loss: LossKind::Mse,
            seed: 42,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.patience == 0 || self.max_epochs == 0 || self.batch_size == 0 || self.hidden == 0 {
            return Err(Error::Config(
                "patience, max_epochs, batch_size and hidden must be positive".into(),
            ));
        }
        let a = &self.adam;
        if !(a.lr >= 0.0 && a.weight_decay >= 0.0 && a.epsilon > 0.0)
            || !(0.0..1.0).contains(&a.beta1)
            || !(0.0..1.0).contains(&a.beta2)
        {
            return Err(Error::Config("optimizer settings out of range".into()));
        }
        self.loss.validate()
    }
}

/// The trainable model: the regressor plus, for attention pooling, the frame
/// scorer in front of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub regressor: RegressorParams,
    pub attention: Option<AttentionPoolParams>,
}

impl ParamBlocks for Model {
    fn blocks(&self) -> Vec<(&'static str, &[f64])> {
        let r = &self.regressor;
        let mut out: Vec<(&'static str, &[f64])> =
            vec![("w1", &r.w1), ("b1", &r.b1), ("w2", &r.w2), ("b2", &r.b2)];
        if let Some(a) = &self.attention {
            out.push(("attention_w", &a.score_weights));
            out.push(("attention_b", std::slice::from_ref(&a.score_bias)));
        }
        out
    }

    fn blocks_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let r = &mut self.regressor;
        let mut out: Vec<(&'static str, &mut [f64])> = vec![
            ("w1", &mut r.w1),
            ("b1", &mut r.b1),
            ("w2", &mut r.w2),
            ("b2", &mut r.b2),
        ];
        if let Some(a) = &mut self.attention {
            out.push(("attention_w", &mut a.score_weights));
            out.push(("attention_b", std::slice::from_mut(&mut a.score_bias)));
        }
        out
    }
}

impl ParamBlocks for RegressorParams {
    fn blocks(&self) -> Vec<(&'static str, &[f64])> {
        vec![("w1", &self.w1), ("b1", &self.b1), ("w2", &self.w2), ("b2", &self.b2)]
    }

    fn blocks_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("w1", &mut self.w1),
            ("b1", &mut self.b1),
            ("w2", &mut self.w2),
            ("b2", &mut self.b2),
        ]
    }
}

/// Model inputs keyed by `(segment, rendition)`.
#[derive(Debug, Clone, Copy)]
pub enum Features<'a> {
    /// Already pooled (mean or max) vectors.
    Pooled(&'a BTreeMap<PairKey, Vec<f64>>),
    /// Raw frame sequences; pooled by a learned attention scorer.
    Sequences(&'a BTreeMap<PairKey, EmbeddingSequence>),
}

impl Features<'_> {
    fn width(&self) -> Option<usize> {
        match self {
            Features::Pooled(m) => m.values().next().map(Vec::len),
            Features::Sequences(m) => m.values().next().map(EmbeddingSequence::dim),
        }
    }

    fn contains(&self, k: &PairKey) -> bool {
        match self {
            Features::Pooled(m) => m.contains_key(k),
            Features::Sequences(m) => m.contains_key(k),
        }
    }
}

/// Pools (when needed) and stacks the inputs of `keys` into one matrix.
fn gather(model: &Model, features: Features<'_>, keys: &[&PairKey]) -> Result<Matrix> {
    let width = model.regressor.input;
    let mut m = Matrix::zeros(keys.len(), width);
    for (row, k) in keys.iter().enumerate() {
        let values = match features {
            Features::Pooled(map) => map
                .get(*k)
                .ok_or_else(|| Error::Contract(format!("no features for {k}")))?
                .clone(),
            Features::Sequences(map) => {
                let seq = map
                    .get(*k)
                    .ok_or_else(|| Error::Contract(format!("no features for {k}")))?;
                let att = model
                    .attention
                    .as_ref()
                    .ok_or_else(|| Error::Contract("sequence features need an attention model".into()))?;
                attention_pool(seq, att)?.0.values
            }
        };
        if values.len() != width {
            return Err(Error::Contract(format!(
                "{k} has width {}, model expects {width}",
                values.len()
            )));
        }
        m.row_mut(row).copy_from_slice(&values);
    }
    Ok(m)
}

/// Deterministic (no dropout) predictions, one row per key.
pub fn predict(model: &Model, features: Features<'_>, keys: &[PairKey]) -> Result<Matrix> {
    let refs: Vec<&PairKey> = keys.iter().collect();
    let x = gather(model, features, &refs)?;
    Ok(forward(&model.regressor, &x, None)?.0)
}

fn targets_of(labels: &BTreeMap<PairKey, Vec<f64>>, keys: &[&PairKey], width: usize) -> Result<Matrix> {
    let mut m = Matrix::zeros(keys.len(), width);
    for (row, k) in keys.iter().enumerate() {
        let t = labels
            .get(*k)
            .ok_or_else(|| Error::Contract(format!("no labels for {k}")))?;
        if t.len() != width {
            return Err(Error::Contract(format!("labels of {k} have width {}", t.len())));
        }
        m.row_mut(row).copy_from_slice(t);
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_validation_r2: f64,
    pub stopped_early: bool,
}

/// Splits a shuffled index list into mini-batches. The last partial batch is
/// kept; when the loss needs pairs, a trailing singleton joins the batch
/// before it.
fn batches(order: &[usize], size: usize, needs_pairs: bool) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    if needs_pairs && out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        out.pop();
        let start = (out.len() - 1) * size;
        *out.last_mut().expect("at least one batch") = &order[start..];
    }
    out
}

/// Trains on `split.train`, early-stopping on the mean per-dimension R² of
/// `split.validation`, and returns the best-scoring snapshot.
///
/// Random streams are derived from `config.seed`: `"init"` for weights,
/// `"shuffle"` for the per-epoch order and `"dropout"` for the masks.
pub fn train(
    split: &SplitPlan,
    features: Features<'_>,
    labels: &BTreeMap<PairKey, Vec<f64>>,
    config: &TrainConfig,
) -> Result<(Model, TrainLog)> {
    config.validate()?;
    if split.train.is_empty() {
        return Err(Error::Contract("training split is empty".into()));
    }
    if split.validation.len() < 2 {
        return Err(Error::Contract(format!(
            "validation split needs at least 2 samples, has {}",
            split.validation.len()
        )));
    }
    if let Some(k) = split
        .train
        .iter()
        .chain(&split.validation)
        .find(|k| !features.contains(k))
    {
        return Err(Error::Contract(format!("no features for {k}")));
    }
    if split.train.len() < 2 && config.loss.needs_pairs() {
        return Err(Error::InsufficientBatch(split.train.len()));
    }
    let input = features
        .width()
        .ok_or_else(|| Error::EmptyInput("no features".into()))?;
    let output = labels
        .values()
        .next()
        .map(Vec::len)
        .ok_or_else(|| Error::EmptyInput("no labels".into()))?;

    let mut init_rng = SplitMix64::new(derive_seed(config.seed, "init"));
    let mut shuffle_rng = SplitMix64::new(derive_seed(config.seed, "shuffle"));
    let mut dropout_rng = SplitMix64::new(derive_seed(config.seed, "dropout"));

    let mut model = Model {
        regressor: RegressorParams::init(input, config.hidden, output, &mut init_rng),
        attention: match features {
            Features::Pooled(_) => None,
            Features::Sequences(_) => Some(AttentionPoolParams::zeros(input)),
        },
    };
    let mut adam = AdamState::new(&model, config.adam);

    let val_keys: Vec<&PairKey> = split.validation.iter().collect();
    let val_targets = targets_of(labels, &val_keys, output)?;

    let mut order: Vec<usize> = (0..split.train.len()).collect();
    let mut best = model.clone();
    let mut log = TrainLog {
        epochs: Vec::new(),
        best_epoch: 0,
        best_validation_r2: f64::NEG_INFINITY,
        stopped_early: false,
    };
    let mut since_best = 0;

    for epoch in 1..=config.max_epochs {
        shuffle_rng.shuffle(&mut order);
        let (mut loss_sum, mut seen) = (0.0, 0usize);
        for (b, batch) in batches(&order, config.batch_size, config.loss.needs_pairs())
            .into_iter()
            .enumerate()
        {
            let keys: Vec<&PairKey> = batch.iter().map(|&i| &split.train[i]).collect();
            let x = gather(&model, features, &keys)?;
            let y = targets_of(labels, &keys, output)?;
            let masks = (config.dropout > 0.0)
                .then(|| dropout_masks(keys.len(), config.hidden, config.dropout, &mut dropout_rng));
            let (pred, cache) = forward(&model.regressor, &x, masks.as_ref())?;
            let (loss, dloss) = config.loss.evaluate(&pred, &y)?;
            if !loss.is_finite() {
                return Err(Error::Divergence(format!(
                    "non-finite loss at epoch {epoch}, batch {b}"
                )));
            }
            loss_sum += loss * keys.len() as f64;
            seen += keys.len();

            let grads = backward(&model.regressor, &cache, &dloss, model.attention.is_some())?;
            let attention_grads = match (features, &model.attention, &grads.inputs) {
                (Features::Sequences(seqs), Some(att), Some(dz)) => {
                    let mut acc = AttentionPoolParams::zeros(input);
                    for (row, k) in keys.iter().enumerate() {
                        let g = attention_pool_backward(&seqs[*k], att, dz.row(row), false)?;
                        acc.score_weights
                            .iter_mut()
                            .zip(&g.params.score_weights)
                            .for_each(|(a, v)| *a += v);
                        acc.score_bias += g.params.score_bias;
                    }
                    Some(acc)
                }
                _ => None,
            };
            let grad_model = Model {
                regressor: grads.params,
                attention: attention_grads,
            };
            adam_step(&mut model, &grad_model, &mut adam).map_err(|e| match e {
                Error::Divergence(m) => Error::Divergence(format!("epoch {epoch}, batch {b}: {m}")),
                other => other,
            })?;
        }

        let val_pred = {
            let x = gather(&model, features, &val_keys)?;
            forward(&model.regressor, &x, None)?.0
        };
        let score = metrics::mean_r2(&val_pred, &val_targets)?;
        if !score.is_finite() {
            return Err(Error::Divergence(format!("non-finite validation R² at epoch {epoch}")));
        }
        log.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / seen as f64,
            validation_r2: score,
        });
        if score > log.best_validation_r2 {
            log.best_validation_r2 = score;
            log.best_epoch = epoch;
            best = model.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                log.stopped_early = true;
                break;
            }
        }
    }
    Ok((best, log))
}
