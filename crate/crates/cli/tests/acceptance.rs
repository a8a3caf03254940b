//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so that each criterion reports
//! its measured values and timing rather than only pass/fail.

#[path = "../../core/tests/common/oracle.rs"]
mod oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use oracle::fixtures::*;
use pianoprobe_core::analysis::{error_correlation, gate_objective, gated_fusion, weighted_fusion, GateParams};
use pianoprobe_core::dataset::{assign_folds, make_split, LabeledSegment, RenditionsMode};
use pianoprobe_core::embedding_store::{read_embedding, write_embedding, EmbeddingSequence};
use pianoprobe_core::metrics::{mean_r2, r2_per_dimension, r2_pooled};
use pianoprobe_core::nnet::{
    backward, ccc_loss, forward, hybrid_loss, mse_loss, AdamConfig, ParamBlocks, RegressorParams, TrainConfig,
};
use pianoprobe_core::pooling::{attention_pool, attention_pool_backward, AttentionPoolParams};
use pianoprobe_core::rng::SplitMix64;
use pianoprobe_core::runner::{run_cv, ExperimentConfig};
use pianoprobe_core::stats::{self, bootstrap_ci, BootstrapConfig, BootstrapStatistic, PairedErrorSeries};
use pianoprobe_core::synthetic::{write_synthetic, SyntheticSpec};
use pianoprobe_core::{Matrix, PredictionSet, NUM_DIMENSIONS};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn random_matrix(rng: &mut SplitMix64, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.uniform(lo, hi)).collect()).unwrap()
}

/// `‖fd − analytic‖ / max(‖fd‖, ‖analytic‖)` over the whole gradient.
fn relative_error(fd: &[f64], analytic: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = fd.iter().zip(analytic).map(|(a, b)| a - b).collect();
    let scale = norm(fd).max(norm(analytic));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Central differences of `f` at `x`.
fn central(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn flatten(p: &RegressorParams) -> Vec<f64> {
    p.blocks().into_iter().flat_map(|(_, b)| b.to_vec()).collect()
}

fn unflatten(template: &RegressorParams, flat: &[f64]) -> RegressorParams {
    let mut p = template.clone();
    let mut i = 0;
    for (_, block) in p.blocks_mut() {
        block.copy_from_slice(&flat[i..i + block.len()]);
        i += block.len();
    }
    p
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = SplitMix64::new(2024);
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut record = |name: &'static str, e: f64| {
        let w = worst.entry(name).or_insert(0.0);
        *w = w.max(e);
    };
    for _ in 0..5 {
        let (n, d) = (6, 5);
        let pred = random_matrix(&mut rng, n, d, 0.0, 1.0);
        let target = random_matrix(&mut rng, n, d, 0.0, 1.0);
        let with = |flat: &[f64]| Matrix::from_vec(n, d, flat.to_vec()).unwrap();
        let losses: [(&'static str, f64, Box<dyn Fn(&Matrix) -> (f64, Matrix)>); 3] = [
            ("mse", 1e-3, Box::new(|p: &Matrix| mse_loss(p, &target).unwrap())),
            ("ccc", 1e-6, Box::new(|p: &Matrix| ccc_loss(p, &target).unwrap())),
            ("hybrid", 1e-6, Box::new(|p: &Matrix| hybrid_loss(p, &target, 0.3).unwrap())),
        ];
        for (name, h, loss) in &losses {
            let analytic = loss(&pred).1;
            let fd = central(pred.as_slice(), *h, |x| loss(&with(x)).0);
            record(name, relative_error(&fd, analytic.as_slice()));
        }

        let (input, hidden, output, batch) = (4, 7, 3, 5);
        let params = RegressorParams::init(input, hidden, output, &mut rng);
        let params = unflatten(
            &params,
            &flatten(&params).iter().map(|v| v + rng.uniform(-0.1, 0.1)).collect::<Vec<_>>(),
        );
        let x = random_matrix(&mut rng, batch, input, -1.0, 1.0);
        let y = random_matrix(&mut rng, batch, output, 0.0, 1.0);
        let mask = Matrix::from_vec(
            batch,
            hidden,
            (0..batch * hidden).map(|_| if rng.next_f64() < 0.25 { 0.0 } else { 4.0 / 3.0 }).collect(),
        )
        .unwrap();
        let objective = |p: &RegressorParams, x: &Matrix| {
            let (out, _) = forward(p, x, Some(&mask)).unwrap();
            hybrid_loss(&out, &y, 0.5).unwrap().0
        };
        let (out, cache) = forward(&params, &x, Some(&mask)).map_err(err)?;
        let dloss = hybrid_loss(&out, &y, 0.5).map_err(err)?.1;
        let grads = backward(&params, &cache, &dloss, true).map_err(err)?;
        let fd = central(&flatten(&params), 1e-6, |flat| objective(&unflatten(&params, flat), &x));
        record("mlp params", relative_error(&fd, &flatten(&grads.params)));
        let fd = central(x.as_slice(), 1e-6, |flat| {
            objective(&params, &Matrix::from_vec(batch, input, flat.to_vec()).unwrap())
        });
        record("mlp inputs", relative_error(&fd, grads.inputs.as_ref().unwrap().as_slice()));

        let (frames, dim) = (6, 5);
        let data: Vec<f32> = (0..frames * dim).map(|_| rng.uniform(-1.0, 1.0) as f32).collect();
        let seq = EmbeddingSequence::new("s", "r", vec![1], dim, data).map_err(err)?;
        let att = AttentionPoolParams {
            score_weights: (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect(),
            score_bias: rng.uniform(-1.0, 1.0),
        };
        let upstream: Vec<f64> = (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let pooled = |flat: &[f64]| {
            let p = AttentionPoolParams {
                score_weights: flat[..dim].to_vec(),
                score_bias: flat[dim],
            };
            let v = attention_pool(&seq, &p).unwrap().0.values;
            v.iter().zip(&upstream).map(|(a, b)| a * b).sum::<f64>()
        };
        let g = attention_pool_backward(&seq, &att, &upstream, false).map_err(err)?;
        let mut flat = att.score_weights.clone();
        flat.push(att.score_bias);
        let mut analytic = g.params.score_weights.clone();
        analytic.push(g.params.score_bias);
        record("attention pool", relative_error(&central(&flat, 1e-6, pooled), &analytic));

        let (a, b, targets, ids) = fusion_fixture(&mut rng, 30, 0.2, 0.3);
        let gate = GateParams {
            logits: (0..NUM_DIMENSIONS).map(|_| rng.uniform(-2.0, 2.0)).collect(),
        };
        let (_, analytic) = gate_objective(&a, &b, &targets, &ids, &gate).map_err(err)?;
        let fd = central(&gate.logits, 1e-6, |l| {
            let g = GateParams { logits: l.to_vec() };
            gate_objective(&a, &b, &targets, &ids, &g).unwrap().0
        });
        record("gate", relative_error(&fd, &analytic));
    }
    let elapsed = start.elapsed();
    let max = worst.values().copied().fold(0.0, f64::max);
    let detail = worst
        .iter()
        .map(|(k, v)| format!("{k} {v:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    ensure!(max < 1e-6, "max relative error {max:.2e} ({detail})");
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("max relative error {max:.1e} ({detail}) in {elapsed:.2?}"))
}

fn series(a: &[f64], b: &[f64]) -> PairedErrorSeries {
    PairedErrorSeries::new((0..a.len()).map(|i| format!("s{i}")).collect(), a.to_vec(), b.to_vec()).unwrap()
}

fn close(name: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    ensure!((got - want).abs() <= tol, "{name}: {got} vs {want} (tol {tol:e})");
    Ok(())
}

fn oracle_equivalence() -> Outcome {
    let t = Matrix::from_rows(&R2_TARGETS).map_err(err)?;
    let p = Matrix::from_rows(&R2_PREDS).map_err(err)?;
    let rows = |m: &[[f64; 3]; 6]| m.iter().map(|r| r.to_vec()).collect::<Vec<_>>();
    let per_dim = r2_per_dimension(&p, &t).map_err(err)?;
    let brute = oracle::r2_columns(&rows(&R2_TARGETS), &rows(&R2_PREDS));
    for d in 0..3 {
        close("per-dimension R²", per_dim[d], brute[d], 1e-10)?;
        close("per-dimension R² reference", per_dim[d], R2_PER_DIM[d], 1e-10)?;
    }
    close("mean R²", mean_r2(&p, &t).map_err(err)?, R2_MEAN, 1e-10)?;
    let pooled = r2_pooled(&p, &t).map_err(err)?;
    close("pooled R²", pooled, oracle::r2_flat(t.as_slice(), p.as_slice()), 1e-10)?;
    close("pooled R² reference", pooled, R2_POOLED, 1e-10)?;

    let r = stats::pearson(&PEARSON_X, &PEARSON_Y).map_err(err)?;
    close("pearson", r, oracle::pearson(&PEARSON_X, &PEARSON_Y), 1e-10)?;
    close("pearson reference", r, PEARSON_R, 1e-10)?;

    let s = stats::spearman(&SPEARMAN_X, &SPEARMAN_Y).map_err(err)?;
    close("spearman", s.rho, oracle::spearman(&SPEARMAN_X, &SPEARMAN_Y), 1e-10)?;
    close("spearman reference", s.rho, SPEARMAN_RHO, 1e-10)?;
    close("spearman p", s.p, SPEARMAN_P, 1e-6)?;

    let w = stats::wilcoxon_signed_rank(&series(&WILCOXON_D, &[0.0; 13])).map_err(err)?;
    close("wilcoxon W+", w.statistic, oracle::wilcoxon_w(&WILCOXON_D), 1e-10)?;
    close("wilcoxon W+ reference", w.statistic, WILCOXON_W, 1e-10)?;
    close("wilcoxon p", w.p, WILCOXON_P, 1e-6)?;

    let pt = stats::paired_t(&series(&T_A, &T_B)).map_err(err)?;
    close("paired t", pt.t, oracle::paired_t(&T_A, &T_B), 1e-10)?;
    close("paired t reference", pt.t, T_STAT, 1e-10)?;
    close("paired t p", pt.p, T_P, 1e-6)?;

    let mut rng = SplitMix64::new(99);
    for _ in 0..200 {
        let n = 10 + rng.below(40) as usize;
        let x: Vec<f64> = (0..n).map(|_| rng.below(6) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.below(6) as f64 - 3.0).collect();
        if let Ok(s) = stats::spearman(&x, &y) {
            close("random spearman", s.rho, oracle::spearman(&x, &y), 1e-10)?;
        }
        if let Ok(w) = stats::wilcoxon_signed_rank(&series(&y, &vec![0.0; n])) {
            close("random wilcoxon", w.statistic, oracle::wilcoxon_w(&y), 1e-10)?;
        }
    }
    Ok(format!(
        "R² (both), Pearson, Spearman rho={:.6}, W+={}, t={:.6} match oracles; 200 random tied vectors agree",
        s.rho, w.statistic, pt.t
    ))
}

fn t_identity() -> Outcome {
    let mut rng = SplitMix64::new(5);
    for case in 0..1000 {
        let n = 2 + rng.below(300) as usize;
        let a: Vec<f64> = (0..n).map(|_| rng.uniform(0.0, 0.2)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.uniform(0.0, 0.2)).collect();
        let t = stats::paired_t(&series(&a, &b)).map_err(err)?;
        ensure!(
            t.t.abs() == t.cohens_d.abs() * (n as f64).sqrt(),
            "case {case}: |t| {} vs |d|√n {}",
            t.t.abs(),
            t.cohens_d.abs() * (n as f64).sqrt()
        );
    }
    let n = 1202;
    let z: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
    let m = z.iter().sum::<f64>() / n as f64;
    let sd = (z.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let d: Vec<f64> = z.iter().map(|v| 0.31 + (v - m) / sd).collect();
    let t = stats::paired_t(&series(&d, &vec![0.0; n])).map_err(err)?;
    close("cohen's d", t.cohens_d, 0.31, 1e-12)?;
    close("t", t.t, 0.31 * (n as f64).sqrt(), 1e-9)?;
    ensure!((t.t.abs() - 10.71).abs() < 0.05, "t {} is not within rounding of 10.71", t.t);
    Ok(format!(
        "exact on 1000 random series; d=0.31, n=1202 gives t={:.4}, within rounding of 10.71",
        t.t
    ))
}

fn learnability_config(dir: &Path) -> ExperimentConfig {
    let paths = write_synthetic(&dir.join("data"), &SyntheticSpec::default()).unwrap();
    ExperimentConfig {
        manifest_path: paths.manifest,
        labels_path: paths.labels,
        output_dir: dir.join("run"),
        bootstrap: BootstrapConfig {
            resamples: 1000,
            ..BootstrapConfig::default()
        },
        train: TrainConfig {
            hidden: 128,
            batch_size: 8,
            dropout: 0.0,
            patience: 40,
            adam: AdamConfig {
                lr: 1e-2,
                weight_decay: 0.5,
                ..AdamConfig::default()
            },
            ..TrainConfig::default()
        },
        ..ExperimentConfig::default()
    }
}

fn learnability() -> Outcome {
    let tmp = tempfile::tempdir().map_err(err)?;
    let cfg = learnability_config(tmp.path());
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(err)?;
    let start = Instant::now();
    let run = pool.install(|| run_cv(&cfg)).map_err(err)?;
    let elapsed = start.elapsed();
    let r2 = run.aggregate_report.mean_per_dimension_r2;
    ensure!(run.aggregate_report.n_segments == 40, "{} segments", run.aggregate_report.n_segments);
    ensure!(r2 > 0.9, "aggregate mean per-dimension R² {r2:.4}");
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!(
        "40 segments / 10 pieces, aggregate mean per-dimension R² {r2:.4} (pooled {:.4}) in {elapsed:.2?} on 1 thread",
        run.aggregate_report.pooled_r2
    ))
}

fn files_under(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(err)?;
    let cfg = learnability_config(tmp.path());
    let config_path = tmp.path().join("config.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(&cfg).map_err(err)?).map_err(err)?;
    let mut runs = Vec::new();
    for run in ["first", "second"] {
        let _ = std::fs::remove_dir_all(&cfg.output_dir);
        let out = Command::new(env!("CARGO_BIN_EXE_pianoprobe"))
            .arg("cv")
            .arg("--config")
            .arg(&config_path)
            .output()
            .map_err(err)?;
        ensure!(
            out.status.success(),
            "{run} run failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        runs.push(files_under(&cfg.output_dir));
    }
    let (a, b) = (&runs[0], &runs[1]);
    ensure!(a.keys().eq(b.keys()), "runs wrote different files");
    let differing: Vec<&String> = a.keys().filter(|k| a[*k] != b[*k]).collect();
    ensure!(differing.is_empty(), "files differ: {differing:?}");
    let checkpoints = a.keys().filter(|k| k.ends_with(".ckpt")).count();
    ensure!(checkpoints == 4 && a.contains_key("report.json"), "missing outputs");
    Ok(format!(
        "two `cv` executions wrote {} byte-identical files (report.json, {checkpoints} checkpoints, predictions, logs)",
        a.len()
    ))
}

fn split_integrity() -> Outcome {
    let mut rng = SplitMix64::new(77);
    let (mut generated, mut leaks, mut rendition_leaks, mut loo) = (0usize, 0usize, 0usize, 0usize);
    for _ in 0..1000 {
        let k = 2 + rng.below(4) as usize;
        let pieces = k + 2 + rng.below(30) as usize;
        let renditions = 1 + rng.below(4) as usize;
        let mut segments = Vec::new();
        for p in 0..pieces {
            for s in 0..1 + rng.below(5) {
                for r in 0..renditions {
                    segments.push(LabeledSegment {
                        segment_id: format!("p{p}_s{s}"),
                        piece_id: format!("p{p}"),
                        rendition: format!("r{r}"),
                        targets: [0.5; NUM_DIMENSIONS],
                    });
                }
            }
        }
        let ids: Vec<&str> = segments.iter().map(|s| s.piece_id.as_str()).collect();
        let folds = assign_folds(&ids, k, rng.next_u64()).map_err(err)?;
        let mode = if rng.next_f64() < 0.5 {
            RenditionsMode::All
        } else {
            loo += 1;
            RenditionsMode::LeaveOneOut(format!("r{}", rng.below(renditions as u64)))
        };
        let val_fraction = rng.uniform(0.05, 0.5);
        let piece_of: BTreeMap<String, &str> = segments
            .iter()
            .map(|s| (s.segment_id.clone(), s.piece_id.as_str()))
            .collect();
        for test_fold in 0..k {
            let plan = make_split(&folds, test_fold, val_fraction, &segments, &mode).map_err(err)?;
            generated += 1;
            let pieces_of = |keys: &[pianoprobe_core::PairKey]| -> BTreeSet<&str> {
                keys.iter().map(|k| piece_of[&k.segment_id]).collect()
            };
            let (tr, va, te) = (pieces_of(&plan.train), pieces_of(&plan.validation), pieces_of(&plan.test));
            if !tr.is_disjoint(&va) || !tr.is_disjoint(&te) || !va.is_disjoint(&te) {
                leaks += 1;
            }
            if let RenditionsMode::LeaveOneOut(tag) = &mode {
                let bad = plan.test.iter().any(|k| &k.rendition != tag)
                    || plan.train.iter().chain(&plan.validation).any(|k| &k.rendition == tag);
                if bad {
                    rendition_leaks += 1;
                }
            }
        }
    }
    ensure!(
        leaks == 0 && rendition_leaks == 0,
        "{leaks} piece leaks, {rendition_leaks} rendition leaks"
    );
    Ok(format!(
        "1000 fold assignments ({generated} splits, {loo} leave-one-out): 0 piece leaks, 0 rendition leaks"
    ))
}

fn bootstrap_coverage() -> Outcome {
    use rayon::prelude::*;
    const SIMULATIONS: u64 = 500;
    let (rows, noise_sd) = (60usize, 0.5f64);
    // Targets N(0, 1), predictions = targets + N(0, noise_sd²): R² = 1 − noise_sd².
    let truth = 1.0 - noise_sd * noise_sd;
    let start = Instant::now();
    let covered: Vec<bool> = (0..SIMULATIONS)
        .into_par_iter()
        .map(|sim| {
            let mut rng = SplitMix64::new(1000 + sim);
            let y: Vec<f64> = (0..rows * NUM_DIMENSIONS).map(|_| rng.normal()).collect();
            let p: Vec<f64> = y.iter().map(|v| v + noise_sd * rng.normal()).collect();
            let targets = Matrix::from_vec(rows, NUM_DIMENSIONS, y).unwrap();
            let preds = Matrix::from_vec(rows, NUM_DIMENSIONS, p).unwrap();
            let cfg = BootstrapConfig {
                resamples: 10_000,
                confidence: 0.95,
                seed: sim,
            };
            let ci = bootstrap_ci(&preds, &targets, BootstrapStatistic::PooledR2, &cfg).unwrap();
            ci.lo <= truth && truth <= ci.hi
        })
        .collect();
    let elapsed = start.elapsed();
    let rate = covered.iter().filter(|c| **c).count() as f64 / SIMULATIONS as f64;
    ensure!(rate >= 0.93, "coverage {:.1}%", rate * 100.0);
    ensure!(elapsed < Duration::from_secs(300), "took {elapsed:?}");
    Ok(format!(
        "pooled R² truth {truth}, n={rows}: 95% interval covered truth in {:.1}% of {SIMULATIONS} simulations (10000 resamples each) in {elapsed:.2?}",
        rate * 100.0
    ))
}

fn format_robustness() -> Outcome {
    let mut rng = SplitMix64::new(8);
    let (frames, dim) = (7, 12);
    let mut data: Vec<f32> = (0..frames * dim).map(|_| rng.normal() as f32).collect();
    data[3] = f32::MIN_POSITIVE / 2.0;
    data[4] = -0.0;
    data[5] = f32::MAX;
    let seq = EmbeddingSequence::new("seg_001", "steinway", vec![9, 10, 11, 12], dim, data).map_err(err)?;
    let mut bytes = Vec::new();
    write_embedding(&seq, &mut bytes).map_err(err)?;
    let back = read_embedding(bytes.as_slice()).map_err(err)?;
    let bits = |s: &EmbeddingSequence| s.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    ensure!(bits(&back) == bits(&seq), "payload bits changed");
    ensure!(back.segment_id() == seq.segment_id() && back.rendition() == seq.rendition(), "metadata changed");
    ensure!(back.layer_set() == seq.layer_set(), "layer set changed");
    let mut again = Vec::new();
    write_embedding(&back, &mut again).map_err(err)?;
    ensure!(again == bytes, "re-serialization differs");

    let mut kinds: BTreeMap<&'static str, usize> = BTreeMap::new();
    for trial in 0..100 {
        let mut corrupt = bytes.clone();
        let at = rng.below(corrupt.len() as u64) as usize;
        corrupt[at] ^= 1 + rng.below(255) as u8;
        let result = catch_unwind(AssertUnwindSafe(|| read_embedding(corrupt.as_slice())));
        match result {
            Err(_) => return Err(format!("trial {trial}: reader panicked on byte {at}")),
            Ok(Ok(_)) => return Err(format!("trial {trial}: corruption at byte {at} accepted")),
            Ok(Err(e)) => *kinds.entry(e.kind()).or_insert(0) += 1,
        }
    }
    Ok(format!(
        "{}-byte file roundtrips bit-exactly; 100/100 single-byte corruptions rejected ({kinds:?})",
        bytes.len()
    ))
}

/// Targets in [0, 1] with two predictors whose errors are independent.
fn fusion_fixture(
    rng: &mut SplitMix64,
    n: usize,
    sd_a: f64,
    sd_b: f64,
) -> (PredictionSet, PredictionSet, BTreeMap<String, Vec<f64>>, Vec<String>) {
    let mut a = BTreeMap::new();
    let mut b = BTreeMap::new();
    let mut targets = BTreeMap::new();
    for i in 0..n {
        let id = format!("seg{i:05}");
        let y: Vec<f64> = (0..NUM_DIMENSIONS).map(|_| rng.uniform(0.2, 0.8)).collect();
        a.insert(id.clone(), y.iter().map(|v| v + sd_a * rng.normal()).collect());
        b.insert(id.clone(), y.iter().map(|v| v + sd_b * rng.normal()).collect());
        targets.insert(id, y);
    }
    let ids = targets.keys().cloned().collect();
    (
        PredictionSet::new("a", a).unwrap(),
        PredictionSet::new("b", b).unwrap(),
        targets,
        ids,
    )
}

fn fusion_sanity() -> Outcome {
    let mut rng = SplitMix64::new(31);
    let (a, b, targets, _) = fusion_fixture(&mut rng, 2000, 0.1, 0.15);
    let at_one = weighted_fusion(&a, &b, 1.0).map_err(err)?;
    let at_zero = weighted_fusion(&a, &b, 0.0).map_err(err)?;
    ensure!(at_one.entries == a.entries, "alpha = 1 does not reproduce a");
    ensure!(at_zero.entries == b.entries, "alpha = 0 does not reproduce b");
    let gated = gated_fusion(&a, &b, &GateParams::zeros()).map_err(err)?;
    let half = weighted_fusion(&a, &b, 0.5).map_err(err)?;
    ensure!(gated.entries == half.entries, "zero gate differs from alpha = 0.5");
    let self_r = error_correlation(&a, &a, &targets).map_err(err)?;
    ensure!(self_r == 1.0, "error_correlation(a, a) = {self_r}");
    let r = error_correlation(&a, &b, &targets).map_err(err)?;
    ensure!(r.abs() < 0.1, "independent errors give r = {r}");
    Ok(format!(
        "endpoints exact, zero gate == alpha 0.5 exactly, r(a, a) = {self_r}, independent errors r = {r:.4} (n = 2000)"
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("gradient suite", gradient_suite),
        ("oracle equivalence", oracle_equivalence),
        ("algebraic identity", t_identity),
        ("learnability", learnability),
        ("determinism", determinism),
        ("split integrity", split_integrity),
        ("bootstrap coverage", bootstrap_coverage),
        ("format robustness", format_robustness),
        ("fusion sanity", fusion_sanity),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match &outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
