use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use pianoprobe_core::analysis::{
    difficulty_correlation, fit_gate, gated_fusion, intra_piece_consistency, read_performer_map_file,
    select_fusion_weight, weighted_fusion, DifficultyTable, GateFitConfig,
};
use pianoprobe_core::dataset::{load_labels_file, segment_targets};
use pianoprobe_core::embedding_store::{load_manifest, read_embedding_file};
use pianoprobe_core::runner::{parse_layer_range, run_ablation, run_compare, run_cv, select_layers, AblationAxis};
use pianoprobe_core::{Error, ExperimentConfig, PairKey, PredictionSet, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::{render, Command, FuseMode, OUTPUT_ROOT_ENV};

pub fn run(command: Command) -> Result<String> {
    match command {
        Command::Ingest { manifest, labels, layers } => to_json(&ingest(&manifest, labels.as_deref(), layers.as_deref())?),
        Command::Cv { config, overrides } => to_json(&cv(&config, &overrides)?),
        Command::Ablate {
            config,
            overrides,
            axis,
            values,
        } => {
            let cfg = experiment_config(&config, &overrides)?;
            to_json(&run_ablation(&cfg, axis.parse::<AblationAxis>()?, &values)?)
        }
        Command::Fuse {
            a,
            b,
            mode,
            alpha,
            labels,
            fit_ids,
            grid_step,
            gate_steps,
            gate_lr,
            out,
        } => {
            let fit = match (labels, fit_ids) {
                (Some(l), Some(ids)) => Some((l, ids)),
                (None, None) => None,
                _ => return Err(Error::Config("--labels and --fit-ids go together".into())),
            };
            let args = FuseArgs {
                mode,
                alpha,
                fit,
                grid_step,
                gate: GateFitConfig {
                    steps: gate_steps,
                    lr: gate_lr,
                },
            };
            to_json(&fuse(&a, &b, &args, &out)?)
        }
        Command::Compare { a, b, labels } => to_json(&run_compare(&a, &b, &labels)?),
        Command::Consistency { predictions, performers } => {
            let preds = PredictionSet::read_csv_file(&predictions)?;
            let map = read_performer_map_file(&performers)?;
            to_json(&intra_piece_consistency(&preds, &map)?)
        }
        Command::Difficulty {
            predictions,
            ratings,
            labels,
            aggregate,
        } => {
            let preds = PredictionSet::read_csv_file(&predictions)?;
            let table = DifficultyTable::read_csv_file(&ratings)?;
            let piece_of: BTreeMap<String, String> = load_labels_file(&labels)?
                .into_iter()
                .map(|l| (l.segment_id, l.piece_id))
                .collect();
            to_json(&difficulty_correlation(&preds, &table, &piece_of, aggregate.parse()?)?)
        }
        Command::Report { path, json } => {
            let file = if path.is_dir() { path.join("report.json") } else { path };
            let text = std::fs::read_to_string(&file).map_err(|e| Error::File {
                path: file.clone(),
                source: e,
            })?;
            let doc: Value = serde_json::from_str(&text)?;
            if json {
                to_json(&doc)
            } else {
                render::render(&doc)
            }
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

/// Loads a config, applies `--set` overrides and the output-root variable.
pub fn experiment_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?.with_overrides(overrides)?;
    if let Some(root) = std::env::var_os(OUTPUT_ROOT_ENV) {
        if cfg.output_dir.is_relative() {
            cfg.output_dir = PathBuf::from(root).join(&cfg.output_dir);
        }
    }
    Ok(cfg)
}

fn cv(config: &Path, overrides: &[String]) -> Result<Value> {
    let cfg = experiment_config(config, overrides)?;
    let run = run_cv(&cfg)?;
    Ok(json!({
        "config_fingerprint": run.config_fingerprint,
        "output_dir": cfg.output_dir,
        "report": run.report_path,
        "predictions": run.predictions_path,
        "log": run.log,
        "checkpoints": run.checkpoints,
        "aggregate": run.aggregate_report,
    }))
}

#[derive(Debug, Serialize)]
struct IngestSummary {
    manifest: PathBuf,
    entries: usize,
    segments: usize,
    renditions: BTreeSet<String>,
    dims: BTreeSet<usize>,
    layer_sets: BTreeSet<Vec<u32>>,
    min_frames: usize,
    max_frames: usize,
    labeled_pairs: Option<usize>,
}

fn ingest(manifest: &Path, labels: Option<&Path>, layers: Option<&str>) -> Result<IngestSummary> {
    let entries = load_manifest(manifest)?;
    let wanted = layers.map(parse_layer_range).transpose()?;
    let mut summary = IngestSummary {
        manifest: manifest.to_path_buf(),
        entries: entries.len(),
        segments: entries.iter().map(|e| &e.segment_id).collect::<BTreeSet<_>>().len(),
        renditions: BTreeSet::new(),
        dims: BTreeSet::new(),
        layer_sets: BTreeSet::new(),
        min_frames: 0,
        max_frames: 0,
        labeled_pairs: None,
    };
    let mut frames = Vec::with_capacity(entries.len());
    for e in &entries {
        let seq = read_embedding_file(&e.embedding_path)?;
        if seq.segment_id() != e.segment_id || seq.rendition() != e.rendition {
            return Err(Error::Alignment(format!(
                "{} holds {}/{}, manifest says {}/{}",
                e.embedding_path.display(),
                seq.segment_id(),
                seq.rendition(),
                e.segment_id,
                e.rendition
            )));
        }
        summary.renditions.insert(e.rendition.clone());
        summary.dims.insert(seq.dim());
        summary.layer_sets.insert(seq.layer_set().to_vec());
        frames.push(seq.frames());
        if let Some(w) = &wanted {
            select_layers(seq, w)?;
        }
    }
    summary.min_frames = frames.iter().copied().min().unwrap_or(0);
    summary.max_frames = frames.iter().copied().max().unwrap_or(0);
    if let Some(path) = labels {
        let listed: BTreeSet<PairKey> = entries
            .iter()
            .map(|e| PairKey::new(&e.segment_id, &e.rendition))
            .collect();
        let rows = load_labels_file(path)?;
        if let Some(l) = rows.iter().find(|l| !listed.contains(&l.key())) {
            return Err(Error::Alignment(format!("labeled {} has no manifest entry", l.key())));
        }
        summary.labeled_pairs = Some(rows.len());
    }
    Ok(summary)
}

struct FuseArgs {
    mode: FuseMode,
    alpha: Option<f64>,
    fit: Option<(PathBuf, PathBuf)>,
    grid_step: f64,
    gate: GateFitConfig,
}

fn read_ids(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::File {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

fn fuse(a: &Path, b: &Path, args: &FuseArgs, out: &Path) -> Result<Value> {
    let pa = PredictionSet::read_csv_file(a)?;
    let pb = PredictionSet::read_csv_file(b)?;
    let fit = match &args.fit {
        Some((labels, ids)) => Some((segment_targets(&load_labels_file(labels)?), read_ids(ids)?)),
        None => None,
    };
    let (fused, detail) = match (args.mode, args.alpha, &fit) {
        (FuseMode::Weighted, Some(alpha), _) => (weighted_fusion(&pa, &pb, alpha)?, json!({ "alpha": alpha })),
        (FuseMode::Weighted, None, Some((targets, ids))) => {
            let w = select_fusion_weight(&pa, &pb, targets, ids, args.grid_step)?;
            (weighted_fusion(&pa, &pb, w.alpha)?, serde_json::to_value(w)?)
        }
        (FuseMode::Gated, None, Some((targets, ids))) => {
            let gate = fit_gate(&pa, &pb, targets, ids, &args.gate)?;
            let weights = gate.weights();
            (
                gated_fusion(&pa, &pb, &gate)?,
                json!({ "logits": gate.logits, "weights": weights }),
            )
        }
        (FuseMode::Gated, Some(_), _) => {
            return Err(Error::Config("--alpha applies to weighted fusion only".into()))
        }
        (_, None, None) => {
            return Err(Error::Config(
                "give --alpha, or --labels with --fit-ids to fit the fusion".into(),
            ))
        }
    };
    fused.write_csv_file(out)?;
    Ok(json!({
        "mode": match args.mode { FuseMode::Weighted => "weighted", FuseMode::Gated => "gated" },
        "a": pa.model_label,
        "b": pb.model_label,
        "segments": fused.entries.len(),
        "output": out,
        "fit": detail,
    }))
}
