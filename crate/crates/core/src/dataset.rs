//! Labels, piece-level fold assignment and train/validation/test splits.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, SplitMix64};

/// Number of perceptual dimensions.
pub const NUM_DIMENSIONS: usize = 19;

/// Canonical ordering of the perceptual dimensions.
pub const DIMENSIONS: [&str; NUM_DIMENSIONS] = [
    "timing",
    "articulation_length",
    "articulation_touch",
    "pedal_amount",
    "pedal_clarity",
    "timbre_variety",
    "timbre_depth",
    "timbre_brightness",
    "timbre_loudness",
    "dynamic_range",
    "tempo",
    "space",
    "balance",
    "drama",
    "mood_valence",
    "mood_energy",
    "mood_imagination",
    "sophistication",
    "interpretation",
];

/// Identifies one rendered file: a segment under one soundfont.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairKey {
    pub segment_id: String,
    pub rendition: String,
}

impl PairKey {
    pub fn new(segment_id: impl Into<String>, rendition: impl Into<String>) -> Self {
        Self {
            segment_id: segment_id.into(),
            rendition: rendition.into(),
        }
    }
}

impl fmt::Display for PairKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.segment_id, self.rendition)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSegment {
    pub segment_id: String,
    pub piece_id: String,
    pub rendition: String,
    pub targets: [f64; NUM_DIMENSIONS],
}

impl LabeledSegment {
    pub fn key(&self) -> PairKey {
        PairKey::new(&self.segment_id, &self.rendition)
    }
}

/// Parses the labels CSV: `segment_id,piece_id,rendition,<19 dimension names>`.
///
/// Column order is free; extra columns are ignored. Rows are returned in file
/// order. `row` in errors counts data rows from 1.
pub fn load_labels<R: Read>(source: R) -> Result<Vec<LabeledSegment>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
    };
    let seg_col = col("segment_id")?;
    let piece_col = col("piece_id")?;
    let rend_col = col("rendition")?;
    let dim_cols = DIMENSIONS.iter().map(|d| col(d)).collect::<Result<Vec<_>>>()?;

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let field = |c: usize| record.get(c).unwrap_or("");
        let mut targets = [0.0; NUM_DIMENSIONS];
        for (d, &c) in dim_cols.iter().enumerate() {
            let raw = field(c);
            let v: f64 = raw.parse().map_err(|_| {
                Error::Schema(format!("row {row}, column '{}': '{raw}' is not a number", DIMENSIONS[d]))
            })?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Range {
                    row,
                    column: DIMENSIONS[d].to_string(),
                    value: v,
                });
            }
            targets[d] = v;
        }
        let seg = LabeledSegment {
            segment_id: field(seg_col).to_string(),
            piece_id: field(piece_col).to_string(),
            rendition: field(rend_col).to_string(),
            targets,
        };
        if seg.segment_id.is_empty() || seg.piece_id.is_empty() || seg.rendition.is_empty() {
            return Err(Error::Schema(format!("row {row}: empty identifier")));
        }
        if !seen.insert(seg.key()) {
            return Err(Error::Duplicate(format!("labels list {} twice", seg.key())));
        }
        out.push(seg);
    }
    Ok(out)
}

pub fn load_labels_file(path: &Path) -> Result<Vec<LabeledSegment>> {
    let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    load_labels(std::io::BufReader::new(f))
}

/// Targets per segment id, averaged over the renditions that carry a label.
pub fn segment_targets(labels: &[LabeledSegment]) -> BTreeMap<String, Vec<f64>> {
    let mut acc: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
    for l in labels {
        let e = acc
            .entry(l.segment_id.clone())
            .or_insert_with(|| (vec![0.0; NUM_DIMENSIONS], 0));
        e.0.iter_mut().zip(&l.targets).for_each(|(a, t)| *a += t);
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(k, (sum, n))| (k, sum.into_iter().map(|s| s / n as f64).collect()))
        .collect()
}

/// Piece → fold mapping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub fold_count: usize,
    pub seed: u64,
    pub mapping: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn fold_of(&self, piece_id: &str) -> Option<usize> {
        self.mapping.get(piece_id).copied()
    }

    pub fn pieces_in(&self, fold: usize) -> impl Iterator<Item = &str> {
        self.mapping
            .iter()
            .filter(move |(_, &f)| f == fold)
            .map(|(p, _)| p.as_str())
    }
}

/// Sorts the distinct pieces, shuffles them with `SplitMix64(seed)` and deals
/// them round-robin into `k` folds.
pub fn assign_folds<S: AsRef<str>>(pieces: &[S], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::Config(format!("fold count must be at least 2, got {k}")));
    }
    let mut sorted: Vec<&str> = pieces
        .iter()
        .map(AsRef::as_ref)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if sorted.is_empty() {
        return Err(Error::EmptyInput("no pieces to assign".into()));
    }
    if k > sorted.len() {
        return Err(Error::InfeasibleSplit(format!(
            "{k} folds requested for {} pieces",
            sorted.len()
        )));
    }
    SplitMix64::new(seed).shuffle(&mut sorted);
    let mapping = sorted
        .into_iter()
        .enumerate()
        .map(|(i, p)| (p.to_string(), i % k))
        .collect();
    Ok(FoldAssignment {
        fold_count: k,
        seed,
        mapping,
    })
}

/// Which renditions enter each side of a split.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum RenditionsMode {
    /// Every rendition everywhere; the soundfont ensemble acts as augmentation.
    #[default]
    All,
    /// Only this rendition, everywhere.
    Single(String),
    /// Train/validation without this rendition, test with only this one.
    LeaveOneOut(String),
}

impl RenditionsMode {
    fn tag(&self) -> Option<&str> {
        match self {
            RenditionsMode::All => None,
            RenditionsMode::Single(t) | RenditionsMode::LeaveOneOut(t) => Some(t),
        }
    }
}

impl fmt::Display for RenditionsMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RenditionsMode::All => f.write_str("all"),
            RenditionsMode::Single(t) => write!(f, "single:{t}"),
            RenditionsMode::LeaveOneOut(t) => write!(f, "leave_one_out:{t}"),
        }
    }
}

impl FromStr for RenditionsMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "all" => Ok(RenditionsMode::All),
            Some(("single", t)) if !t.is_empty() => Ok(RenditionsMode::Single(t.into())),
            Some(("leave_one_out", t)) if !t.is_empty() => Ok(RenditionsMode::LeaveOneOut(t.into())),
            _ => Err(Error::Config(format!(
                "renditions mode '{s}': expected all, single:<tag> or leave_one_out:<tag>"
            ))),
        }
    }
}

impl Serialize for RenditionsMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RenditionsMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train: Vec<PairKey>,
    pub validation: Vec<PairKey>,
    pub test: Vec<PairKey>,
    pub held_out_rendition: Option<String>,
}

/// Builds the split for one test fold.
///
/// Validation pieces are carved out of the non-test pieces: they are sorted,
/// shuffled with the stream `derive_seed(fold.seed, "validation-<test_fold>")`
/// and the first `round(val_fraction * n)` (at least one, at most `n - 1`)
/// are taken.
pub fn make_split(
    fold: &FoldAssignment,
    test_fold: usize,
    val_fraction: f64,
    segments: &[LabeledSegment],
    mode: &RenditionsMode,
) -> Result<SplitPlan> {
    if test_fold >= fold.fold_count {
        return Err(Error::Config(format!(
            "test fold {test_fold} out of range for {} folds",
            fold.fold_count
        )));
    }
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::Config(format!(
            "validation fraction must lie in (0, 1), got {val_fraction}"
        )));
    }
    if let Some(tag) = mode.tag() {
        if !segments.iter().any(|s| s.rendition == tag) {
            return Err(Error::MissingRendition(tag.to_string()));
        }
    }
    for s in segments {
        if fold.fold_of(&s.piece_id).is_none() {
            return Err(Error::Contract(format!(
                "piece '{}' of segment {} has no fold",
                s.piece_id,
                s.key()
            )));
        }
    }

    let mut rest: Vec<&str> = fold
        .mapping
        .iter()
        .filter(|(_, &f)| f != test_fold)
        .map(|(p, _)| p.as_str())
        .collect();
    if rest.len() < 2 {
        return Err(Error::InfeasibleSplit(format!(
            "only {} training pieces outside fold {test_fold}; need 2 to carve validation",
            rest.len()
        )));
    }
    let n_val = ((val_fraction * rest.len() as f64).round() as usize).clamp(1, rest.len() - 1);
    let mut rng = SplitMix64::new(derive_seed(fold.seed, &format!("validation-{test_fold}")));
    rng.shuffle(&mut rest);
    let val_pieces: HashSet<&str> = rest[..n_val].iter().copied().collect();

    let mut plan = SplitPlan {
        held_out_rendition: match mode {
            RenditionsMode::LeaveOneOut(t) => Some(t.clone()),
            _ => None,
        },
        ..Default::default()
    };
    for s in segments {
        let in_test = fold.fold_of(&s.piece_id) == Some(test_fold);
        let keep = match mode {
            RenditionsMode::All => true,
            RenditionsMode::Single(t) => &s.rendition == t,
            RenditionsMode::LeaveOneOut(t) => (&s.rendition == t) == in_test,
        };
        if !keep {
            continue;
        }
        if in_test {
            plan.test.push(s.key());
        } else if val_pieces.contains(s.piece_id.as_str()) {
            plan.validation.push(s.key());
        } else {
            plan.train.push(s.key());
        }
    }
    Ok(plan)
}
