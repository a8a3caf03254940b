//! Bootstrap intervals, paired significance tests and correlations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{derive_indexed_seed, SplitMix64};

/// Smallest p-value ever returned; p-values are kept strictly positive.
pub const P_FLOOR: f64 = f64::MIN_POSITIVE;

/// Reports print p-values below this as a string rather than a number.
pub const P_REPORT_THRESHOLD: f64 = 1e-300;

/// Serde helpers writing tiny p-values as `"< 1e-300"`.
pub mod p_value {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::{P_FLOOR, P_REPORT_THRESHOLD};

    pub const BELOW: &str = "< 1e-300";

    pub fn serialize<S: Serializer>(p: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *p < P_REPORT_THRESHOLD {
            s.serialize_str(BELOW)
        } else {
            s.serialize_f64(*p)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Number(p) => Ok(p),
            Repr::Text(t) if t == BELOW => Ok(P_FLOOR),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad p-value '{t}'"))),
        }
    }
}

fn clamp_p(p: f64) -> f64 {
    if p.is_nan() {
        1.0
    } else {
        p.clamp(P_FLOOR, 1.0)
    }
}

/// Two-sided tail probability of Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return P_FLOOR;
    }
    clamp_p(beta_reg(df / 2.0, 0.5, df / (df + t * t)))
}

/// Two-sided tail probability of the standard normal.
pub fn normal_two_sided(z: f64) -> f64 {
    clamp_p(erfc(z.abs() / std::f64::consts::SQRT_2))
}

/// Per-segment errors of two models on the same segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedErrorSeries {
    pub segment_ids: Vec<String>,
    pub errors_a: Vec<f64>,
    pub errors_b: Vec<f64>,
}

impl PairedErrorSeries {
    pub fn new(segment_ids: Vec<String>, errors_a: Vec<f64>, errors_b: Vec<f64>) -> Result<Self> {
        if segment_ids.len() != errors_a.len() || errors_a.len() != errors_b.len() {
            return Err(Error::Alignment(format!(
                "{} ids, {} errors for a, {} errors for b",
                segment_ids.len(),
                errors_a.len(),
                errors_b.len()
            )));
        }
        for (i, (a, b)) in errors_a.iter().zip(&errors_b).enumerate() {
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::NonFinite { row: i, col: 0 });
            }
        }
        Ok(Self {
            segment_ids,
            errors_a,
            errors_b,
        })
    }

    /// Per-segment MSE series for two prediction matrices against shared targets.
    pub fn from_predictions(
        segment_ids: Vec<String>,
        preds_a: &Matrix,
        preds_b: &Matrix,
        targets: &Matrix,
    ) -> Result<Self> {
        let a = per_segment_mse(preds_a, targets)?;
        let b = per_segment_mse(preds_b, targets)?;
        Self::new(segment_ids, a, b)
    }

    pub fn len(&self) -> usize {
        self.errors_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.errors_a.is_empty()
    }

    /// `errors_a − errors_b`
    pub fn differences(&self) -> Vec<f64> {
        self.errors_a.iter().zip(&self.errors_b).map(|(a, b)| a - b).collect()
    }

    pub fn swapped(&self) -> Self {
        Self {
            segment_ids: self.segment_ids.clone(),
            errors_a: self.errors_b.clone(),
            errors_b: self.errors_a.clone(),
        }
    }
}

/// Mean squared error across columns, one value per row.
pub fn per_segment_mse(preds: &Matrix, targets: &Matrix) -> Result<Vec<f64>> {
    if !preds.same_shape(targets) || targets.cols() == 0 {
        return Err(Error::Alignment(format!(
            "predictions {}x{} vs targets {}x{}",
            preds.rows(),
            preds.cols(),
            targets.rows(),
            targets.cols()
        )));
    }
    Ok((0..targets.rows())
        .map(|i| {
            preds
                .row(i)
                .iter()
                .zip(targets.row(i))
                .map(|(p, t)| (p - t).powi(2))
                .sum::<f64>()
                / targets.cols() as f64
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapStatistic {
    #[serde(rename = "mean_per_dim_r2")]
    MeanPerDimR2,
    PooledR2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub confidence: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            resamples: 10_000,
            confidence: 0.95,
            seed: 42,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resamples == 0 {
            return Err(Error::Config("bootstrap needs at least one resample".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::Config(format!(
                "confidence {} outside (0, 1)",
                self.confidence
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub statistic: BootstrapStatistic,
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub confidence: f64,
    pub resamples: usize,
    pub skipped: usize,
    pub seed: u64,
}

/// Statistic over the rows listed in `rows` (repeats allowed). `None` when the
/// resampled targets have no variance.
fn statistic_on(preds: &Matrix, targets: &Matrix, rows: &[usize], statistic: BootstrapStatistic) -> Option<f64> {
    let n = rows.len() as f64;
    let dims = targets.cols();
    match statistic {
        BootstrapStatistic::MeanPerDimR2 => {
            let mut means = vec![0.0; dims];
            for &r in rows {
                means.iter_mut().zip(targets.row(r)).for_each(|(m, y)| *m += y);
            }
            means.iter_mut().for_each(|m| *m /= n);
            let mut ss_res = vec![0.0; dims];
            let mut ss_tot = vec![0.0; dims];
            for &r in rows {
                let (y, p) = (targets.row(r), preds.row(r));
                for d in 0..dims {
                    ss_res[d] += (y[d] - p[d]).powi(2);
                    ss_tot[d] += (y[d] - means[d]).powi(2);
                }
            }
            if ss_tot.iter().any(|&s| s == 0.0) {
                return None;
            }
            Some(ss_res.iter().zip(&ss_tot).map(|(r, t)| 1.0 - r / t).sum::<f64>() / dims as f64)
        }
        BootstrapStatistic::PooledR2 => {
            let grand = rows.iter().map(|&r| targets.row(r).iter().sum::<f64>()).sum::<f64>() / (n * dims as f64);
            let (mut ss_res, mut ss_tot) = (0.0, 0.0);
            for &r in rows {
                for (y, p) in targets.row(r).iter().zip(preds.row(r)) {
                    ss_res += (y - p).powi(2);
                    ss_tot += (y - grand).powi(2);
                }
            }
            (ss_tot != 0.0).then(|| 1.0 - ss_res / ss_tot)
        }
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap over segment rows. Resample `r` draws its rows from
/// a generator seeded with `derive_indexed_seed(config.seed, r)`, so the
/// result does not depend on thread scheduling.
pub fn bootstrap_ci(
    preds: &Matrix,
    targets: &Matrix,
    statistic: BootstrapStatistic,
    config: &BootstrapConfig,
) -> Result<ConfidenceInterval> {
    config.validate()?;
    if !preds.same_shape(targets) {
        return Err(Error::Alignment("prediction and target shapes differ".into()));
    }
    let n = targets.rows();
    if n < 2 {
        return Err(Error::Contract(format!("bootstrap needs at least 2 segments, got {n}")));
    }
    let all: Vec<usize> = (0..n).collect();
    let point = statistic_on(preds, targets, &all, statistic)
        .ok_or_else(|| Error::Degenerate("targets have zero variance".into()))?;

    let draws: Vec<Option<f64>> = (0..config.resamples)
        .into_par_iter()
        .map_init(
            || vec![0usize; n],
            |rows, r| {
                let mut rng = SplitMix64::new(derive_indexed_seed(config.seed, r as u64));
                rows.iter_mut().for_each(|i| *i = rng.below(n as u64) as usize);
                statistic_on(preds, targets, rows, statistic)
            },
        )
        .collect();
    let mut values: Vec<f64> = draws.iter().flatten().copied().collect();
    let skipped = draws.len() - values.len();
    if skipped * 100 > config.resamples {
        return Err(Error::Degenerate(format!(
            "{skipped} of {} bootstrap resamples had zero target variance",
            config.resamples
        )));
    }
    values.sort_by(f64::total_cmp);
    let tail = (1.0 - config.confidence) / 2.0;
    Ok(ConfidenceInterval {
        statistic,
        point,
        lo: quantile_sorted(&values, tail),
        hi: quantile_sorted(&values, 1.0 - tail),
        confidence: config.confidence,
        resamples: config.resamples,
        skipped,
        seed: config.seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTTest {
    pub t: f64,
    #[serde(with = "p_value")]
    pub p: f64,
    pub cohens_d: f64,
    pub n: usize,
    pub mean_difference: f64,
}

fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Paired t-test on `errors_a − errors_b`. `t` is computed as `d·√n`.
pub fn paired_t(series: &PairedErrorSeries) -> Result<PairedTTest> {
    let n = series.len();
    if n < 2 {
        return Err(Error::Contract(format!("paired t-test needs n ≥ 2, got {n}")));
    }
    let d = series.differences();
    let (mean, sd) = mean_and_sd(&d);
    if sd == 0.0 || !sd.is_finite() {
        return Err(Error::ZeroVariance);
    }
    let cohens_d = mean / sd;
    let t = cohens_d * (n as f64).sqrt();
    Ok(PairedTTest {
        t,
        p: student_t_two_sided(t, (n - 1) as f64),
        cohens_d,
        n,
        mean_difference: mean,
    })
}

/// Ranks starting at 1; tied values share the mean of their ranks.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // Positions i..j hold ranks i+1..=j.
        let rank = (i + 1 + j) as f64 / 2.0;
        order[i..j].iter().for_each(|&k| ranks[k] = rank);
        i = j;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonTest {
    /// Sum of the ranks of positive differences.
    pub statistic: f64,
    #[serde(with = "p_value")]
    pub p: f64,
    pub z: f64,
    /// Differences left after dropping zeros.
    pub n: usize,
}

/// Wilcoxon signed-rank test, normal approximation with tie-corrected
/// variance and a continuity correction.
pub fn wilcoxon_signed_rank(series: &PairedErrorSeries) -> Result<WilcoxonTest> {
    let d: Vec<f64> = series.differences().into_iter().filter(|&v| v != 0.0).collect();
    if d.is_empty() {
        return Err(Error::Degenerate("all paired differences are zero".into()));
    }
    let n = d.len();
    if n < 10 {
        return Err(Error::SmallSample(n));
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = average_ranks(&abs);
    let w = d
        .iter()
        .zip(&ranks)
        .filter(|(v, _)| **v > 0.0)
        .fold(0.0, |acc, (_, r)| acc + r);

    let mut sorted = abs.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let nf = n as f64;
    let mu = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let diff = w - mu;
    let sign = if diff > 0.0 {
        1.0
    } else if diff < 0.0 {
        -1.0
    } else {
        0.0
    };
    let z = (diff - 0.5 * sign) / var.sqrt();
    Ok(WilcoxonTest {
        statistic: w,
        p: normal_two_sided(z),
        z,
        n,
    })
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Alignment(format!("lengths {} and {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Contract(format!("correlation needs n ≥ 2, got {}", x.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("correlation with a constant series".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankCorrelation {
    pub rho: f64,
    #[serde(with = "p_value")]
    pub p: f64,
    pub n: usize,
}

/// Spearman's rho (Pearson on average ranks); p from Student's t with n − 2
/// degrees of freedom.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<RankCorrelation> {
    if x.len() != y.len() {
        return Err(Error::Alignment(format!("lengths {} and {}", x.len(), y.len())));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::Contract(format!("spearman needs n ≥ 3, got {n}")));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::Degenerate("NaN in rank correlation input".into()));
    }
    let rho = pearson(&average_ranks(x), &average_ranks(y))?;
    let df = (n - 2) as f64;
    let p = if rho.abs() >= 1.0 {
        P_FLOOR
    } else {
        student_t_two_sided(rho * (df / ((1.0 - rho) * (1.0 + rho))).sqrt(), df)
    };
    Ok(RankCorrelation { rho, p, n })
}
