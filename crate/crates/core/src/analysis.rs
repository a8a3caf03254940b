//! Late fusion, error-correlation diagnostics, multi-performer consistency
//! and external difficulty correlation.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{DIMENSIONS, NUM_DIMENSIONS};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::{mean_r2, NamedValues};
use crate::stats::{self, RankCorrelation};

/// Segment-level predictions of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub model_label: String,
    pub entries: BTreeMap<String, Vec<f64>>,
}

impl PredictionSet {
    pub fn new(model_label: impl Into<String>, entries: BTreeMap<String, Vec<f64>>) -> Result<Self> {
        for (row, (id, v)) in entries.iter().enumerate() {
            if v.len() != NUM_DIMENSIONS {
                return Err(Error::Schema(format!(
                    "prediction for '{id}' has {} values, expected {NUM_DIMENSIONS}",
                    v.len()
                )));
            }
            if let Some(col) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite { row, col });
            }
        }
        Ok(Self {
            model_label: model_label.into(),
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Rows in the order of `ids`.
    pub fn to_matrix<S: AsRef<str>>(&self, ids: &[S]) -> Result<Matrix> {
        rows_of(&self.entries, ids, &self.model_label)
    }

    /// Reads `segment_id,<19 dimension names>`; column order is free.
    pub fn read_csv<R: Read>(model_label: impl Into<String>, source: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
        let headers = rdr.headers()?.clone();
        let seg_col = column(&headers, "segment_id")?;
        let dim_cols = DIMENSIONS
            .iter()
            .map(|d| column(&headers, d))
            .collect::<Result<Vec<_>>>()?;
        let mut entries = BTreeMap::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let id = record.get(seg_col).unwrap_or("").to_string();
            if id.is_empty() {
                return Err(Error::Schema(format!("row {}: empty segment_id", i + 1)));
            }
            let values = dim_cols
                .iter()
                .map(|&c| parse_number(&record, c, i + 1, &headers))
                .collect::<Result<Vec<f64>>>()?;
            if entries.insert(id.clone(), values).is_some() {
                return Err(Error::Duplicate(format!("segment '{id}' predicted twice")));
            }
        }
        Self::new(model_label, entries)
    }

    /// Model label is the file stem.
    pub fn read_csv_file(path: &Path) -> Result<Self> {
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
        Self::read_csv(label, std::io::BufReader::new(f))
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(std::iter::once("segment_id").chain(DIMENSIONS))?;
        for (id, v) in &self.entries {
            let mut record = vec![id.clone()];
            record.extend(v.iter().map(f64::to_string));
            w.write_record(&record)?;
        }
        w.flush().map_err(|source| Error::Io { offset: 0, source })?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
}

fn parse_number(record: &csv::StringRecord, c: usize, row: usize, headers: &csv::StringRecord) -> Result<f64> {
    let raw = record.get(c).unwrap_or("");
    raw.parse().map_err(|_| {
        Error::Schema(format!(
            "row {row}, column '{}': '{raw}' is not a number",
            headers.get(c).unwrap_or("?")
        ))
    })
}

fn rows_of<S: AsRef<str>>(map: &BTreeMap<String, Vec<f64>>, ids: &[S], what: &str) -> Result<Matrix> {
    let width = map.values().next().map_or(NUM_DIMENSIONS, Vec::len);
    let mut m = Matrix::zeros(ids.len(), width);
    for (r, id) in ids.iter().enumerate() {
        let id = id.as_ref();
        let v = map
            .get(id)
            .ok_or_else(|| Error::Alignment(format!("'{what}' has no entry for segment '{id}'")))?;
        if v.len() != width {
            return Err(Error::Alignment(format!("segment '{id}' has width {}", v.len())));
        }
        m.row_mut(r).copy_from_slice(v);
    }
    Ok(m)
}

/// Fails unless both sets cover exactly the same segments; the message lists
/// the symmetric difference.
pub fn check_aligned(a: &PredictionSet, b: &PredictionSet) -> Result<()> {
    let ka: BTreeSet<&str> = a.ids().collect();
    let kb: BTreeSet<&str> = b.ids().collect();
    if ka == kb {
        return Ok(());
    }
    let only_a: Vec<&str> = ka.difference(&kb).copied().collect();
    let only_b: Vec<&str> = kb.difference(&ka).copied().collect();
    Err(Error::Alignment(format!(
        "segment sets differ: only in '{}': {}; only in '{}': {}",
        a.model_label,
        list_ids(&only_a),
        b.model_label,
        list_ids(&only_b)
    )))
}

fn list_ids(ids: &[&str]) -> String {
    const SHOWN: usize = 20;
    if ids.is_empty() {
        return "none".into();
    }
    let mut s = ids.iter().take(SHOWN).copied().collect::<Vec<_>>().join(", ");
    if ids.len() > SHOWN {
        s.push_str(&format!(" and {} more", ids.len() - SHOWN));
    }
    s
}

/// `alpha·a + (1 − alpha)·b` per entry.
pub fn weighted_fusion(a: &PredictionSet, b: &PredictionSet, alpha: f64) -> Result<PredictionSet> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Contract(format!("fusion weight {alpha} outside [0, 1]")));
    }
    mix(a, b, |_| alpha, format!("{}+{}@{alpha}", a.model_label, b.model_label))
}

fn mix(a: &PredictionSet, b: &PredictionSet, weight: impl Fn(usize) -> f64, label: String) -> Result<PredictionSet> {
    check_aligned(a, b)?;
    let entries = a
        .entries
        .iter()
        .map(|(id, va)| {
            let vb = &b.entries[id];
            let fused = va
                .iter()
                .zip(vb)
                .enumerate()
                .map(|(d, (x, y))| {
                    let w = weight(d);
                    w * x + (1.0 - w) * y
                })
                .collect();
            (id.clone(), fused)
        })
        .collect();
    Ok(PredictionSet {
        model_label: label,
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionWeight {
    pub alpha: f64,
    pub validation_mean_r2: f64,
}

/// Scores within this distance of the best count as ties.
const TIE_TOLERANCE: f64 = 1e-12;

/// Grid search for the fusion weight maximizing mean per-dimension R² on
/// `validation_ids`; ties go to the weight closest to 0.5 (then the smaller).
pub fn select_fusion_weight<S: AsRef<str>>(
    a: &PredictionSet,
    b: &PredictionSet,
    targets: &BTreeMap<String, Vec<f64>>,
    validation_ids: &[S],
    grid_step: f64,
) -> Result<FusionWeight> {
    if validation_ids.is_empty() {
        return Err(Error::Contract("fusion weight selection needs validation segments".into()));
    }
    let steps = (1.0 / grid_step).round();
    if !(grid_step > 0.0 && grid_step <= 1.0) || (steps * grid_step - 1.0).abs() > 1e-9 {
        return Err(Error::Contract(format!("grid step {grid_step} does not divide 1")));
    }
    check_aligned(a, b)?;
    let ma = a.to_matrix(validation_ids)?;
    let mb = b.to_matrix(validation_ids)?;
    let y = rows_of(targets, validation_ids, "targets")?;

    let steps = steps as usize;
    let mut scored = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let alpha = k as f64 / steps as f64;
        let mut fused = ma.clone();
        fused
            .as_mut_slice()
            .iter_mut()
            .zip(mb.as_slice())
            .for_each(|(x, y)| *x = alpha * *x + (1.0 - alpha) * y);
        scored.push((alpha, mean_r2(&fused, &y)?));
    }
    let best = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let (alpha, validation_mean_r2) = scored
        .into_iter()
        .filter(|s| s.1 >= best - TIE_TOLERANCE)
        .min_by(|x, y| {
            (x.0 - 0.5)
                .abs()
                .total_cmp(&(y.0 - 0.5).abs())
                .then(x.0.total_cmp(&y.0))
        })
        .expect("grid is never empty");
    Ok(FusionWeight {
        alpha,
        validation_mean_r2,
    })
}

/// Per-dimension gate pre-activations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub logits: Vec<f64>,
}

impl GateParams {
    pub fn zeros() -> Self {
        Self {
            logits: vec![0.0; NUM_DIMENSIONS],
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.logits.len() != NUM_DIMENSIONS {
            return Err(Error::Contract(format!(
                "gate has {} logits, expected {NUM_DIMENSIONS}",
                self.logits.len()
            )));
        }
        if let Some(d) = self.logits.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: 0, col: d });
        }
        Ok(())
    }

    pub fn weights(&self) -> Vec<f64> {
        self.logits.iter().map(|&x| logistic(x)).collect()
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `g_d·a_d + (1 − g_d)·b_d` with `g_d = logistic(logits[d])`.
pub fn gated_fusion(a: &PredictionSet, b: &PredictionSet, gate: &GateParams) -> Result<PredictionSet> {
    gate.check()?;
    let g = gate.weights();
    mix(a, b, |d| g[d], format!("{}+{}@gate", a.model_label, b.model_label))
}

/// Sum over dimensions of the per-dimension MSE of the gated output on `ids`,
/// and its gradient with respect to the logits.
pub fn gate_objective<S: AsRef<str>>(
    a: &PredictionSet,
    b: &PredictionSet,
    targets: &BTreeMap<String, Vec<f64>>,
    ids: &[S],
    gate: &GateParams,
) -> Result<(f64, Vec<f64>)> {
    gate.check()?;
    if ids.is_empty() {
        return Err(Error::Contract("gate objective needs at least one segment".into()));
    }
    let ma = a.to_matrix(ids)?;
    let mb = b.to_matrix(ids)?;
    let y = rows_of(targets, ids, "targets")?;
    Ok(gate_loss(&ma, &mb, &y, &gate.logits))
}

fn gate_loss(a: &Matrix, b: &Matrix, y: &Matrix, logits: &[f64]) -> (f64, Vec<f64>) {
    let n = y.rows() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; logits.len()];
    for (d, &l) in logits.iter().enumerate() {
        let g = logistic(l);
        let dg = g * (1.0 - g);
        for i in 0..y.rows() {
            let (xa, xb) = (a.get(i, d), b.get(i, d));
            let r = g * xa + (1.0 - g) * xb - y.get(i, d);
            loss += r * r / n;
            grad[d] += 2.0 * r * (xa - xb) * dg / n;
        }
    }
    (loss, grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateFitConfig {
    pub steps: usize,
    pub lr: f64,
}

impl Default for GateFitConfig {
    fn default() -> Self {
        Self { steps: 500, lr: 0.1 }
    }
}

/// Plain gradient descent on the logits from zero (an even blend).
pub fn fit_gate<S: AsRef<str>>(
    a: &PredictionSet,
    b: &PredictionSet,
    targets: &BTreeMap<String, Vec<f64>>,
    train_ids: &[S],
    config: &GateFitConfig,
) -> Result<GateParams> {
    check_aligned(a, b)?;
    if train_ids.is_empty() {
        return Err(Error::Contract("gate fitting needs training segments".into()));
    }
    let ma = a.to_matrix(train_ids)?;
    let mb = b.to_matrix(train_ids)?;
    let y = rows_of(targets, train_ids, "targets")?;
    let mut logits = vec![0.0; NUM_DIMENSIONS];
    for step in 0..config.steps {
        let (loss, grad) = gate_loss(&ma, &mb, &y, &logits);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence(format!("gate fit became non-finite at step {step}")));
        }
        logits.iter_mut().zip(&grad).for_each(|(l, g)| *l -= config.lr * g);
    }
    let gate = GateParams { logits };
    gate.check()
        .map_err(|_| Error::Divergence("gate logits became non-finite".into()))?;
    Ok(gate)
}

/// Pearson correlation between the two models' per-segment MSE.
pub fn error_correlation(
    a: &PredictionSet,
    b: &PredictionSet,
    targets: &BTreeMap<String, Vec<f64>>,
) -> Result<f64> {
    check_aligned(a, b)?;
    let ids: Vec<&str> = a.ids().collect();
    if ids.len() < 2 {
        return Err(Error::Contract("error correlation needs at least 2 segments".into()));
    }
    let y = rows_of(targets, &ids, "targets")?;
    let ea = stats::per_segment_mse(&a.to_matrix(&ids)?, &y)?;
    let eb = stats::per_segment_mse(&b.to_matrix(&ids)?, &y)?;
    stats::pearson(&ea, &eb).map_err(|e| match e {
        Error::Degenerate(_) => Error::Degenerate("an error series is constant".into()),
        other => other,
    })
}

/// Piece and performer of a segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Performance {
    pub piece_id: String,
    pub performer_id: String,
}

/// Reads `segment_id,piece_id,performer_id`.
pub fn read_performer_map<R: Read>(source: R) -> Result<BTreeMap<String, Performance>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = rdr.headers()?.clone();
    let (s, p, f) = (
        column(&headers, "segment_id")?,
        column(&headers, "piece_id")?,
        column(&headers, "performer_id")?,
    );
    let mut out = BTreeMap::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let get = |c: usize| record.get(c).unwrap_or("").to_string();
        let (seg, perf) = (
            get(s),
            Performance {
                piece_id: get(p),
                performer_id: get(f),
            },
        );
        if seg.is_empty() || perf.piece_id.is_empty() || perf.performer_id.is_empty() {
            return Err(Error::Schema(format!("row {}: empty identifier", i + 1)));
        }
        if out.insert(seg.clone(), perf).is_some() {
            return Err(Error::Duplicate(format!("segment '{seg}' mapped twice")));
        }
    }
    Ok(out)
}

pub fn read_performer_map_file(path: &Path) -> Result<BTreeMap<String, Performance>> {
    let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    read_performer_map(std::io::BufReader::new(f))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub per_dimension_mean_std: NamedValues,
    pub overall: f64,
    pub pieces: usize,
    pub performances: usize,
}

fn mean_vectors<'a>(rows: impl Iterator<Item = &'a Vec<f64>>) -> Vec<f64> {
    let mut acc = vec![0.0; NUM_DIMENSIONS];
    let mut n = 0usize;
    for r in rows {
        acc.iter_mut().zip(r).for_each(|(a, v)| *a += v);
        n += 1;
    }
    acc.iter_mut().for_each(|a| *a /= n as f64);
    acc
}

/// Spread of predictions across performers of the same piece.
///
/// A performance is one `(piece, performer)` pair, predicted by the mean over
/// its segments. Pieces with at least two performances contribute the sample
/// standard deviation per dimension; the stds are averaged over pieces.
/// Mapped segments without predictions are ignored.
pub fn intra_piece_consistency(
    preds: &PredictionSet,
    performer_map: &BTreeMap<String, Performance>,
) -> Result<ConsistencyReport> {
    let mut by_piece: BTreeMap<&str, BTreeMap<&str, Vec<&Vec<f64>>>> = BTreeMap::new();
    for (seg, v) in &preds.entries {
        let p = performer_map
            .get(seg)
            .ok_or_else(|| Error::Alignment(format!("segment '{seg}' has no performer mapping")))?;
        by_piece
            .entry(&p.piece_id)
            .or_default()
            .entry(&p.performer_id)
            .or_default()
            .push(v);
    }
    let mut sum_std = vec![0.0; NUM_DIMENSIONS];
    let (mut pieces, mut performances) = (0usize, 0usize);
    for performers in by_piece.values().filter(|p| p.len() >= 2) {
        let means: Vec<Vec<f64>> = performers
            .values()
            .map(|segs| mean_vectors(segs.iter().copied()))
            .collect();
        let center = mean_vectors(means.iter());
        let k = means.len() as f64;
        for (d, s) in sum_std.iter_mut().enumerate() {
            let var = means.iter().map(|m| (m[d] - center[d]).powi(2)).sum::<f64>() / (k - 1.0);
            *s += var.sqrt();
        }
        pieces += 1;
        performances += means.len();
    }
    if pieces == 0 {
        return Err(Error::Contract("no piece has two or more performances".into()));
    }
    let per_dim: Vec<f64> = sum_std.iter().map(|s| s / pieces as f64).collect();
    Ok(ConsistencyReport {
        overall: per_dim.iter().sum::<f64>() / NUM_DIMENSIONS as f64,
        per_dimension_mean_std: NamedValues::canonical(&per_dim),
        pieces,
        performances,
    })
}

/// Expert difficulty per piece on a 0–10 scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyTable {
    pub entries: BTreeMap<String, f64>,
}

impl DifficultyTable {
    pub fn new(entries: BTreeMap<String, f64>) -> Result<Self> {
        for (row, (piece, &r)) in entries.iter().enumerate() {
            if !(0.0..=10.0).contains(&r) {
                return Err(Error::Schema(format!(
                    "rating {r} of piece '{piece}' (entry {}) outside [0, 10]",
                    row + 1
                )));
            }
        }
        Ok(Self { entries })
    }

    /// Reads `piece_id,rating`.
    pub fn read_csv<R: Read>(source: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
        let headers = rdr.headers()?.clone();
        let (p, r) = (column(&headers, "piece_id")?, column(&headers, "rating")?);
        let mut entries = BTreeMap::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let piece = record.get(p).unwrap_or("").to_string();
            if piece.is_empty() {
                return Err(Error::Schema(format!("row {}: empty piece_id", i + 1)));
            }
            let rating = parse_number(&record, r, i + 1, &headers)?;
            if entries.insert(piece.clone(), rating).is_some() {
                return Err(Error::Duplicate(format!("piece '{piece}' rated twice")));
            }
        }
        Self::new(entries)
    }

    pub fn read_csv_file(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

/// How the single overall difficulty correlation is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DifficultyAggregate {
    /// Spearman between the ratings and the mean over dimensions.
    #[default]
    MeanOfDimensions,
    /// Mean of the 19 per-dimension Spearman coefficients (no p-value).
    PerDimension,
}

impl std::str::FromStr for DifficultyAggregate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean_of_dimensions" => Ok(Self::MeanOfDimensions),
            "per_dimension" => Ok(Self::PerDimension),
            _ => Err(Error::Config(format!(
                "aggregate '{s}': expected mean_of_dimensions or per_dimension"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionCorrelation {
    pub dimension: String,
    #[serde(flatten)]
    pub correlation: RankCorrelation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyReport {
    pub aggregate: DifficultyAggregate,
    pub overall_rho: f64,
    #[serde(with = "optional_p")]
    pub overall_p: Option<f64>,
    pub per_dimension: Vec<DimensionCorrelation>,
    pub pieces: usize,
}

mod optional_p {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::stats::p_value;

    #[derive(Serialize, Deserialize)]
    struct Wrapped(#[serde(with = "p_value")] f64);

    pub fn serialize<S: Serializer>(p: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        p.map(Wrapped).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Ok(Option::<Wrapped>::deserialize(d)?.map(|w| w.0))
    }
}

/// Spearman correlation between piece-level predictions (mean over each
/// piece's segments) and difficulty ratings.
pub fn difficulty_correlation(
    preds: &PredictionSet,
    table: &DifficultyTable,
    piece_of: &BTreeMap<String, String>,
    aggregate: DifficultyAggregate,
) -> Result<DifficultyReport> {
    let mut by_piece: BTreeMap<&str, Vec<&Vec<f64>>> = BTreeMap::new();
    for (seg, v) in &preds.entries {
        if let Some(piece) = piece_of.get(seg) {
            if table.entries.contains_key(piece) {
                by_piece.entry(piece).or_default().push(v);
            }
        }
    }
    if by_piece.len() < 3 {
        return Err(Error::Contract(format!(
            "difficulty correlation needs at least 3 rated pieces with predictions, found {}",
            by_piece.len()
        )));
    }
    let ratings: Vec<f64> = by_piece.keys().map(|p| table.entries[*p]).collect();
    let piece_means: Vec<Vec<f64>> = by_piece
        .values()
        .map(|segs| mean_vectors(segs.iter().copied()))
        .collect();

    let per_dimension = (0..NUM_DIMENSIONS)
        .map(|d| {
            let col: Vec<f64> = piece_means.iter().map(|m| m[d]).collect();
            Ok(DimensionCorrelation {
                dimension: DIMENSIONS[d].to_string(),
                correlation: stats::spearman(&col, &ratings)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (overall_rho, overall_p) = match aggregate {
        DifficultyAggregate::MeanOfDimensions => {
            let overall: Vec<f64> = piece_means
                .iter()
                .map(|m| m.iter().sum::<f64>() / NUM_DIMENSIONS as f64)
                .collect();
            let c = stats::spearman(&overall, &ratings)?;
            (c.rho, Some(c.p))
        }
        DifficultyAggregate::PerDimension => (
            per_dimension.iter().map(|c| c.correlation.rho).sum::<f64>() / NUM_DIMENSIONS as f64,
            None,
        ),
    };
    Ok(DifficultyReport {
        aggregate,
        overall_rho,
        overall_p,
        per_dimension,
        pieces: by_piece.len(),
    })
}
