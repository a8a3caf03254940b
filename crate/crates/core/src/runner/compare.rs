use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{check_aligned, error_correlation, PredictionSet};
use crate::dataset::{load_labels_file, segment_targets};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::{dimension_deltas, segment_digest, EvalReport};
use crate::stats::{paired_t, wilcoxon_signed_rank, PairedErrorSeries, PairedTTest, WilcoxonTest};

/// Significance of the per-segment MSE difference `a − b`; negative `t`
/// favors model a.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub paired_t: PairedTTest,
    /// Absent when fewer than 10 segments differ.
    pub wilcoxon: Option<WilcoxonTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionDelta {
    pub dimension: String,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub model_a: String,
    pub model_b: String,
    pub n_segments: usize,
    pub segment_digest: String,
    pub mean_mse_a: f64,
    pub mean_mse_b: f64,
    pub significance: Significance,
    pub error_correlation: f64,
    /// Per-dimension R² of a minus b, largest first.
    pub dimension_deltas: Vec<DimensionDelta>,
    pub report_a: EvalReport,
    pub report_b: EvalReport,
}

/// SHA-256 of a prediction set's CSV serialization.
pub fn prediction_digest(set: &PredictionSet) -> Result<String> {
    let mut buf = Vec::new();
    set.write_csv(&mut buf)?;
    Ok(hex::encode(Sha256::digest(&buf)))
}

fn targets_matrix(targets: &BTreeMap<String, Vec<f64>>, ids: &[&str]) -> Result<Matrix> {
    let rows = ids
        .iter()
        .map(|id| {
            targets
                .get(*id)
                .cloned()
                .ok_or_else(|| Error::Alignment(format!("no labels for segment '{id}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    Matrix::from_rows(&rows)
}

pub fn compare_predictions(
    a: &PredictionSet,
    b: &PredictionSet,
    targets: &BTreeMap<String, Vec<f64>>,
) -> Result<CompareReport> {
    check_aligned(a, b)?;
    let ids: Vec<&str> = a.ids().collect();
    let y = targets_matrix(targets, &ids)?;
    let (ma, mb) = (a.to_matrix(&ids)?, b.to_matrix(&ids)?);
    let series = PairedErrorSeries::from_predictions(ids.iter().map(|s| s.to_string()).collect(), &ma, &mb, &y)?;
    let t = paired_t(&series)?;
    let wilcoxon = match wilcoxon_signed_rank(&series) {
        Ok(w) => Some(w),
        Err(Error::SmallSample(_)) => None,
        Err(e) => return Err(e),
    };
    let report_a = EvalReport::compute(&ma, &y, &ids, &prediction_digest(a)?)?;
    let report_b = EvalReport::compute(&mb, &y, &ids, &prediction_digest(b)?)?;
    let n = series.len() as f64;
    Ok(CompareReport {
        model_a: a.model_label.clone(),
        model_b: b.model_label.clone(),
        n_segments: series.len(),
        segment_digest: segment_digest(&ids),
        mean_mse_a: series.errors_a.iter().sum::<f64>() / n,
        mean_mse_b: series.errors_b.iter().sum::<f64>() / n,
        significance: Significance { paired_t: t, wilcoxon },
        error_correlation: error_correlation(a, b, targets)?,
        dimension_deltas: dimension_deltas(&report_a, &report_b)?
            .into_iter()
            .map(|(dimension, delta)| DimensionDelta { dimension, delta })
            .collect(),
        report_a,
        report_b,
    })
}

/// Reads two prediction CSVs (labels from their file stems) and the labels
/// file, whose targets are averaged over renditions per segment.
pub fn run_compare(preds_a: &Path, preds_b: &Path, labels: &Path) -> Result<CompareReport> {
    let a = PredictionSet::read_csv_file(preds_a)?;
    let b = PredictionSet::read_csv_file(preds_b)?;
    let targets = segment_targets(&load_labels_file(labels)?);
    compare_predictions(&a, &b, &targets)
}
