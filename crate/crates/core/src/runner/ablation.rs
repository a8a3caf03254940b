use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::nnet::LossKind;
use crate::pooling::PoolingKind;

use super::config::ExperimentConfig;
use super::cv::run_cv;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationAxis {
    LayerRange,
    Pooling,
    Loss,
}

impl fmt::Display for AblationAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AblationAxis::LayerRange => "layer_range",
            AblationAxis::Pooling => "pooling",
            AblationAxis::Loss => "loss",
        })
    }
}

impl FromStr for AblationAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "layer_range" => Ok(AblationAxis::LayerRange),
            "pooling" => Ok(AblationAxis::Pooling),
            "loss" => Ok(AblationAxis::Loss),
            _ => Err(Error::Config(format!(
                "ablation axis '{s}': expected layer_range, pooling or loss"
            ))),
        }
    }
}

/// `"9-12"` (inclusive), `"1,3,5"` or a single layer.
pub fn parse_layer_range(s: &str) -> Result<Vec<u32>> {
    let bad = || Error::Config(format!("layer range '{s}': expected a-b, a,b,c or a single layer"));
    let s = s.trim();
    if let Some((a, b)) = s.split_once('-') {
        let (a, b): (u32, u32) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|p| p.trim().parse().map_err(|_| bad()))
        .collect()
}

/// `base` with one axis set to `value`.
pub fn configure(base: &ExperimentConfig, axis: AblationAxis, value: &str) -> Result<ExperimentConfig> {
    let mut c = base.clone();
    match axis {
        AblationAxis::LayerRange => c.layer_range = parse_layer_range(value)?,
        AblationAxis::Pooling => c.pooling = value.parse::<PoolingKind>()?,
        AblationAxis::Loss => c.train.loss = value.parse::<LossKind>()?,
    }
    let slug: String = value
        .chars()
        .map(|ch| if ch.is_ascii_alphanumeric() || ch == '.' { ch } else { '_' })
        .collect();
    c.output_dir = base.output_dir.join(format!("{axis}-{slug}"));
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub value: String,
    pub config_fingerprint: String,
    pub mean_per_dimension_r2: f64,
    pub pooled_r2: f64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub axis: AblationAxis,
    pub base_fingerprint: String,
    /// Best mean per-dimension R² first; ties keep the order given.
    pub rows: Vec<AblationRow>,
}

/// One cross-validation run per value, everything else fixed. Each cell
/// writes to `<output_dir>/<axis>-<value>/`; the table goes to
/// `<output_dir>/ablation.json`.
pub fn run_ablation<S: AsRef<str>>(base: &ExperimentConfig, axis: AblationAxis, values: &[S]) -> Result<AblationTable> {
    if values.is_empty() {
        return Err(Error::Config("ablation needs at least one value".into()));
    }
    let configs = values
        .iter()
        .map(|v| configure(base, axis, v.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(values.len());
    for (v, c) in values.iter().zip(&configs) {
        let run = run_cv(c)?;
        rows.push(AblationRow {
            value: v.as_ref().to_string(),
            config_fingerprint: run.config_fingerprint,
            mean_per_dimension_r2: run.aggregate_report.mean_per_dimension_r2,
            pooled_r2: run.aggregate_report.pooled_r2,
            report: run.aggregate_report,
        });
    }
    rows.sort_by(|a, b| b.mean_per_dimension_r2.total_cmp(&a.mean_per_dimension_r2));
    let table = AblationTable {
        axis,
        base_fingerprint: base.fingerprint(),
        rows,
    };
    let path = base.output_dir.join("ablation.json");
    let mut text = serde_json::to_string_pretty(&table)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::file(&path, e))?;
    Ok(table)
}
