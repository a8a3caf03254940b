use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::PredictionSet;
use crate::dataset::{assign_folds, load_labels_file, make_split, LabeledSegment, PairKey, RenditionsMode};
use crate::embedding_store::{concat_layers, load_manifest, read_embedding_file, EmbeddingSequence};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::EvalReport;
use crate::nnet::{predict, save_checkpoint, train, Features, TrainConfig, TrainLog};
use crate::pooling::{max_pool, mean_pool, PoolingKind};
use crate::rng::derive_indexed_seed;
use crate::stats::{bootstrap_ci, BootstrapConfig, BootstrapStatistic, ConfidenceInterval};

use super::config::ExperimentConfig;

/// Labels plus model inputs for every labeled `(segment, rendition)`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub labels: Vec<LabeledSegment>,
    pub inputs: Inputs,
}

#[derive(Debug, Clone)]
pub enum Inputs {
    Pooled(BTreeMap<PairKey, Vec<f64>>),
    Sequences(BTreeMap<PairKey, EmbeddingSequence>),
}

impl Inputs {
    pub fn features(&self) -> Features<'_> {
        match self {
            Inputs::Pooled(m) => Features::Pooled(m),
            Inputs::Sequences(m) => Features::Sequences(m),
        }
    }

    pub fn width(&self) -> Option<usize> {
        match self {
            Inputs::Pooled(m) => m.values().next().map(Vec::len),
            Inputs::Sequences(m) => m.values().next().map(EmbeddingSequence::dim),
        }
    }
}

/// Restricts a sequence to `layers`, or keeps it whole when `layers` is empty.
pub fn select_layers(seq: EmbeddingSequence, layers: &[u32]) -> Result<EmbeddingSequence> {
    if layers.is_empty() {
        return Ok(seq);
    }
    concat_layers(std::slice::from_ref(&seq), layers)
}

/// Reads the labels and every embedding a split in `mode` can touch, selects
/// layers and pools. All inputs must share one width.
pub fn load_dataset(config: &ExperimentConfig) -> Result<Dataset> {
    let labels = load_labels_file(&config.labels_path)?;
    if labels.is_empty() {
        return Err(Error::EmptyInput("labels file has no rows".into()));
    }
    let manifest = load_manifest(&config.manifest_path)?;
    let paths: BTreeMap<PairKey, &Path> = manifest
        .iter()
        .map(|e| (PairKey::new(&e.segment_id, &e.rendition), e.embedding_path.as_path()))
        .collect();
    let keys: Vec<PairKey> = labels
        .iter()
        .filter(|l| match &config.renditions_mode {
            RenditionsMode::Single(tag) => &l.rendition == tag,
            _ => true,
        })
        .map(LabeledSegment::key)
        .collect();
    if let Some(k) = keys.iter().find(|k| !paths.contains_key(*k)) {
        return Err(Error::Alignment(format!("labeled {k} has no manifest entry")));
    }

    let load = |k: &PairKey| -> Result<EmbeddingSequence> {
        let seq = read_embedding_file(paths[k])?;
        if seq.segment_id() != k.segment_id || seq.rendition() != k.rendition {
            return Err(Error::Alignment(format!(
                "{} holds {}/{}, manifest says {k}",
                paths[k].display(),
                seq.segment_id(),
                seq.rendition()
            )));
        }
        select_layers(seq, &config.layer_range)
    };
    let inputs = match config.pooling {
        PoolingKind::Attention => Inputs::Sequences(
            keys.par_iter()
                .map(|k| Ok((k.clone(), load(k)?)))
                .collect::<Result<BTreeMap<_, _>>>()?,
        ),
        kind => Inputs::Pooled(
            keys.par_iter()
                .map(|k| {
                    let seq = load(k)?;
                    let pooled = match kind {
                        PoolingKind::Max => max_pool(&seq)?,
                        _ => mean_pool(&seq)?,
                    };
                    Ok((k.clone(), pooled.values))
                })
                .collect::<Result<BTreeMap<_, _>>>()?,
        ),
    };
    let width = inputs.width();
    let uniform = match &inputs {
        Inputs::Pooled(m) => m.values().all(|v| Some(v.len()) == width),
        Inputs::Sequences(m) => m.values().all(|s| Some(s.dim()) == width),
    };
    if !uniform {
        return Err(Error::Alignment("embeddings differ in width".into()));
    }
    Ok(Dataset { labels, inputs })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub folds: u64,
    pub train: Vec<u64>,
    pub bootstrap: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub train_seed: u64,
    pub n_train: usize,
    pub n_validation: usize,
    pub n_test: usize,
    pub held_out_rendition: Option<String>,
    pub best_epoch: usize,
    pub best_validation_r2: f64,
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub report: EvalReport,
    pub confidence_intervals: Vec<ConfidenceInterval>,
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_fingerprint: String,
    pub seeds: RunSeeds,
    /// Metrics over the concatenated test predictions of all folds.
    pub aggregate: EvalReport,
    pub confidence_intervals: Vec<ConfidenceInterval>,
    pub folds: Vec<FoldSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifact {
    pub config_fingerprint: String,
    pub per_fold_reports: Vec<EvalReport>,
    pub aggregate_report: EvalReport,
    pub report: RunReport,
    pub predictions: PredictionSet,
    pub checkpoints: Vec<PathBuf>,
    pub log: PathBuf,
    pub report_path: PathBuf,
    pub predictions_path: PathBuf,
}

#[derive(Serialize)]
struct FoldLog<'a> {
    fold: usize,
    train_seed: u64,
    log: &'a TrainLog,
}

struct FoldOutcome {
    summary: FoldSummary,
    ids: Vec<String>,
    preds: Matrix,
    targets: Matrix,
    log: TrainLog,
    checkpoint: PathBuf,
}

/// Segment-level rows: predictions and targets averaged over the renditions
/// of each segment present in `keys`.
fn per_segment(keys: &[PairKey], preds: &Matrix, labels: &BTreeMap<PairKey, Vec<f64>>) -> (Vec<String>, Matrix, Matrix) {
    let mut acc: BTreeMap<&str, (Vec<f64>, Vec<f64>, usize)> = BTreeMap::new();
    let width = preds.cols();
    for (row, k) in keys.iter().enumerate() {
        let e = acc
            .entry(k.segment_id.as_str())
            .or_insert_with(|| (vec![0.0; width], vec![0.0; width], 0));
        e.0.iter_mut().zip(preds.row(row)).for_each(|(a, v)| *a += v);
        e.1.iter_mut().zip(&labels[k]).for_each(|(a, v)| *a += v);
        e.2 += 1;
    }
    let mut p = Matrix::zeros(acc.len(), width);
    let mut t = Matrix::zeros(acc.len(), width);
    let mut ids = Vec::with_capacity(acc.len());
    for (row, (id, (sp, st, n))) in acc.into_iter().enumerate() {
        let n = n as f64;
        p.row_mut(row).iter_mut().zip(sp).for_each(|(o, v)| *o = v / n);
        t.row_mut(row).iter_mut().zip(st).for_each(|(o, v)| *o = v / n);
        ids.push(id.to_string());
    }
    (ids, p, t)
}

fn intervals(preds: &Matrix, targets: &Matrix, config: &BootstrapConfig) -> Result<Vec<ConfidenceInterval>> {
    [BootstrapStatistic::MeanPerDimR2, BootstrapStatistic::PooledR2]
        .iter()
        .map(|&s| bootstrap_ci(preds, targets, s, config))
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::file(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::file(path, e))
}

/// Piece-split cross-validation with per-fold training, checkpoints and
/// reports. Writes only below `config.output_dir`:
///
/// ```text
/// config.json  report.json  predictions.csv  log.json
/// fold-<k>/model.ckpt  fold-<k>/report.json
/// ```
pub fn run_cv(config: &ExperimentConfig) -> Result<RunArtifact> {
    config.validate()?;
    let data = load_dataset(config)?;
    run_cv_with(config, &data)
}

/// [`run_cv`] on an already loaded dataset.
pub fn run_cv_with(config: &ExperimentConfig, data: &Dataset) -> Result<RunArtifact> {
    let fingerprint = config.fingerprint();
    let pieces: Vec<&str> = data.labels.iter().map(|l| l.piece_id.as_str()).collect();
    let assignment = assign_folds(&pieces, config.folds, config.seed)?;
    let labels: BTreeMap<PairKey, Vec<f64>> = data
        .labels
        .iter()
        .map(|l| (l.key(), l.targets.to_vec()))
        .collect();

    let out = &config.output_dir;
    create_dir(out)?;
    write_json(&out.join("config.json"), config)?;

    let outcomes: Vec<Result<FoldOutcome>> = (0..config.folds)
        .into_par_iter()
        .map(|fold| {
            run_fold(config, data, &assignment, &labels, fold, &fingerprint).map_err(|e| Error::Fold {
                fold,
                source: Box::new(e),
            })
        })
        .collect();
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let mut all_ids = Vec::new();
    let mut pred_rows: Vec<Vec<f64>> = Vec::new();
    let mut target_rows: Vec<Vec<f64>> = Vec::new();
    for o in &outcomes {
        all_ids.extend(o.ids.iter().cloned());
        pred_rows.extend((0..o.preds.rows()).map(|r| o.preds.row(r).to_vec()));
        target_rows.extend((0..o.targets.rows()).map(|r| o.targets.row(r).to_vec()));
    }
    let preds = Matrix::from_rows(&pred_rows)?;
    let targets = Matrix::from_rows(&target_rows)?;
    let aggregate = EvalReport::compute(&preds, &targets, &all_ids, &fingerprint)?;
    let report = RunReport {
        config_fingerprint: fingerprint.clone(),
        seeds: RunSeeds {
            folds: config.seed,
            train: outcomes.iter().map(|o| o.summary.train_seed).collect(),
            bootstrap: config.bootstrap.seed,
        },
        aggregate: aggregate.clone(),
        confidence_intervals: intervals(&preds, &targets, &config.bootstrap)?,
        folds: outcomes.iter().map(|o| o.summary.clone()).collect(),
    };

    let predictions = PredictionSet::new(
        "predictions",
        all_ids.iter().cloned().zip(pred_rows).collect(),
    )?;
    let report_path = out.join("report.json");
    let predictions_path = out.join("predictions.csv");
    let log_path = out.join("log.json");
    write_json(&report_path, &report)?;
    predictions.write_csv_file(&predictions_path)?;
    let logs: Vec<FoldLog> = outcomes
        .iter()
        .map(|o| FoldLog {
            fold: o.summary.fold,
            train_seed: o.summary.train_seed,
            log: &o.log,
        })
        .collect();
    write_json(&log_path, &logs)?;

    Ok(RunArtifact {
        config_fingerprint: fingerprint,
        per_fold_reports: outcomes.iter().map(|o| o.summary.report.clone()).collect(),
        aggregate_report: aggregate,
        report,
        predictions,
        checkpoints: outcomes.iter().map(|o| o.checkpoint.clone()).collect(),
        log: log_path,
        report_path,
        predictions_path,
    })
}

fn run_fold(
    config: &ExperimentConfig,
    data: &Dataset,
    assignment: &crate::dataset::FoldAssignment,
    labels: &BTreeMap<PairKey, Vec<f64>>,
    fold: usize,
    fingerprint: &str,
) -> Result<FoldOutcome> {
    let split = make_split(assignment, fold, config.val_fraction, &data.labels, &config.renditions_mode)?;
    if split.test.is_empty() {
        return Err(Error::InfeasibleSplit(format!("fold {fold} has no test samples")));
    }
    let train_seed = derive_indexed_seed(config.train.seed, fold as u64);
    let train_config = TrainConfig {
        seed: train_seed,
        ..config.train.clone()
    };
    let features = data.inputs.features();
    let (model, log) = train(&split, features, labels, &train_config)?;
    let test_preds = predict(&model, features, &split.test)?;
    let (ids, preds, targets) = per_segment(&split.test, &test_preds, labels);
    let report = EvalReport::compute(&preds, &targets, &ids, fingerprint)?;
    let confidence_intervals = intervals(&preds, &targets, &config.bootstrap)?;

    let dir = config.output_dir.join(format!("fold-{fold}"));
    create_dir(&dir)?;
    let checkpoint = dir.join("model.ckpt");
    save_checkpoint(&model, fingerprint, &checkpoint)?;
    write_json(&dir.join("report.json"), &report)?;

    Ok(FoldOutcome {
        summary: FoldSummary {
            fold,
            train_seed,
            n_train: split.train.len(),
            n_validation: split.validation.len(),
            n_test: split.test.len(),
            held_out_rendition: split.held_out_rendition.clone(),
            best_epoch: log.best_epoch,
            best_validation_r2: log.best_validation_r2,
            epochs_run: log.epochs.len(),
            stopped_early: log.stopped_early,
            report,
            confidence_intervals,
        },
        ids,
        preds,
        targets,
        log,
        checkpoint,
    })
}
