//! Coefficient of determination in two conventions, evaluation reports and
//! per-dimension deltas.
//!
//! * **mean per-dimension R²**: one R² per column, each against that column's
//!   mean, then averaged. This is the headline number.
//! * **pooled R²**: every `(sample, dimension)` pair is one observation of a
//!   single regression, measured against the grand mean.

use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::dataset::{DIMENSIONS, NUM_DIMENSIONS};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Name → value pairs that serialize as a JSON object in insertion order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NamedValues(pub Vec<(String, f64)>);

impl NamedValues {
    pub fn canonical(values: &[f64]) -> Self {
        Self(
            DIMENSIONS
                .iter()
                .zip(values)
                .map(|(n, &v)| (n.to_string(), v))
                .collect(),
        )
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().map(|&(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Serialize for NamedValues {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for NamedValues {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = NamedValues;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object of name → number")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut m: A) -> std::result::Result<NamedValues, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = m.next_entry::<String, f64>()? {
                    out.push((k, v));
                }
                // Sorted-key sources (e.g. a JSON value tree) lose the
                // canonical order; restore it when every dimension is present.
                if out.len() == NUM_DIMENSIONS {
                    let pos = |n: &str| DIMENSIONS.iter().position(|d| *d == n);
                    if out.iter().all(|(k, _)| pos(k).is_some()) {
                        out.sort_by_key(|(k, _)| pos(k));
                    }
                }
                Ok(NamedValues(out))
            }
        }
        d.deserialize_map(V)
    }
}

fn dimension_label(cols: usize, d: usize) -> String {
    if cols == NUM_DIMENSIONS {
        DIMENSIONS[d].to_string()
    } else {
        format!("dimension {d}")
    }
}

fn check_shapes(preds: &Matrix, targets: &Matrix) -> Result<()> {
    if !preds.same_shape(targets) {
        return Err(Error::Contract(format!(
            "predictions are {}x{}, targets {}x{}",
            preds.rows(),
            preds.cols(),
            targets.rows(),
            targets.cols()
        )));
    }
    if preds.rows() < 2 {
        return Err(Error::Contract(format!(
            "R² needs at least 2 samples, got {}",
            preds.rows()
        )));
    }
    Ok(())
}

/// `1 − SS_res/SS_tot` for every column.
pub fn r2_per_dimension(preds: &Matrix, targets: &Matrix) -> Result<Vec<f64>> {
    check_shapes(preds, targets)?;
    let n = targets.rows();
    (0..targets.cols())
        .map(|d| {
            let mean = (0..n).map(|i| targets.get(i, d)).sum::<f64>() / n as f64;
            let (mut ss_res, mut ss_tot) = (0.0, 0.0);
            for i in 0..n {
                let y = targets.get(i, d);
                ss_res += (y - preds.get(i, d)).powi(2);
                ss_tot += (y - mean).powi(2);
            }
            if ss_tot == 0.0 {
                return Err(Error::Degenerate(format!(
                    "targets of {} have zero variance",
                    dimension_label(targets.cols(), d)
                )));
            }
            Ok(1.0 - ss_res / ss_tot)
        })
        .collect()
}

pub fn mean_r2(preds: &Matrix, targets: &Matrix) -> Result<f64> {
    let r2 = r2_per_dimension(preds, targets)?;
    Ok(r2.iter().sum::<f64>() / r2.len() as f64)
}

/// One regression over all `(sample, dimension)` pairs.
pub fn r2_pooled(preds: &Matrix, targets: &Matrix) -> Result<f64> {
    check_shapes(preds, targets)?;
    let y = targets.as_slice();
    let grand = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - grand).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Degenerate("targets have zero total variance".into()));
    }
    let ss_res: f64 = y
        .iter()
        .zip(preds.as_slice())
        .map(|(t, p)| (t - p).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Order-independent digest of a set of segment ids.
pub fn segment_digest<S: AsRef<str>>(ids: &[S]) -> String {
    let mut sorted: Vec<&str> = ids.iter().map(AsRef::as_ref).collect();
    sorted.sort_unstable();
    let mut h = Sha256::new();
    for id in sorted {
        h.update(id.as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_dimension_r2: NamedValues,
    pub mean_per_dimension_r2: f64,
    pub pooled_r2: f64,
    pub n_segments: usize,
    pub config_fingerprint: String,
    pub segment_digest: String,
}

impl EvalReport {
    /// Rows of `preds`/`targets` correspond to `segment_ids`.
    pub fn compute<S: AsRef<str>>(
        preds: &Matrix,
        targets: &Matrix,
        segment_ids: &[S],
        config_fingerprint: &str,
    ) -> Result<Self> {
        if targets.cols() != NUM_DIMENSIONS {
            return Err(Error::Contract(format!(
                "reports need {NUM_DIMENSIONS} dimensions, got {}",
                targets.cols()
            )));
        }
        if segment_ids.len() != targets.rows() {
            return Err(Error::Contract("segment ids do not match rows".into()));
        }
        let r2 = r2_per_dimension(preds, targets)?;
        Ok(Self {
            mean_per_dimension_r2: r2.iter().sum::<f64>() / r2.len() as f64,
            per_dimension_r2: NamedValues::canonical(&r2),
            pooled_r2: r2_pooled(preds, targets)?,
            n_segments: targets.rows(),
            config_fingerprint: config_fingerprint.to_string(),
            segment_digest: segment_digest(segment_ids),
        })
    }
}

/// Per-dimension `a − b`, sorted from largest to smallest.
pub fn dimension_deltas(a: &EvalReport, b: &EvalReport) -> Result<Vec<(String, f64)>> {
    if a.segment_digest != b.segment_digest || a.n_segments != b.n_segments {
        return Err(Error::Alignment(
            "reports were computed over different segment sets".into(),
        ));
    }
    let mut out = Vec::with_capacity(a.per_dimension_r2.len());
    for (name, va) in &a.per_dimension_r2.0 {
        let vb = b
            .per_dimension_r2
            .get(name)
            .ok_or_else(|| Error::Alignment(format!("dimension '{name}' missing")))?;
        out.push((name.clone(), va - vb));
    }
    out.sort_by(|x, y| y.1.total_cmp(&x.1));
    Ok(out)
}
