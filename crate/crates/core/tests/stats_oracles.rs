mod common;

use common::oracle::{self, fixtures::*};
use pianoprobe_core::matrix::Matrix;
use pianoprobe_core::metrics::{mean_r2, r2_per_dimension, r2_pooled};
use pianoprobe_core::rng::SplitMix64;
use pianoprobe_core::stats::{self, PairedErrorSeries};

fn series(a: &[f64], b: &[f64]) -> PairedErrorSeries {
    PairedErrorSeries::new((0..a.len()).map(|i| format!("seg{i}")).collect(), a.to_vec(), b.to_vec()).unwrap()
}

#[test]
fn wilcoxon_matches_hand_ranking_and_reference_p() {
    let w = stats::wilcoxon_signed_rank(&series(&WILCOXON_D, &[0.0; 13])).unwrap();
    assert_eq!(w.n, 12);
    assert!((w.statistic - oracle::wilcoxon_w(&WILCOXON_D)).abs() < 1e-10);
    assert!((w.statistic - WILCOXON_W).abs() < 1e-10);
    assert!((w.p - WILCOXON_P).abs() < 1e-6, "p {}", w.p);
}

#[test]
fn paired_t_matches_textbook_formula() {
    let t = stats::paired_t(&series(&T_A, &T_B)).unwrap();
    assert!((t.t - oracle::paired_t(&T_A, &T_B)).abs() < 1e-10);
    assert!((t.t - T_STAT).abs() < 1e-10);
    assert!((t.p - T_P).abs() < 1e-6);
}

#[test]
fn spearman_with_ties_matches_rank_then_pearson() {
    let s = stats::spearman(&SPEARMAN_X, &SPEARMAN_Y).unwrap();
    assert!((s.rho - oracle::spearman(&SPEARMAN_X, &SPEARMAN_Y)).abs() < 1e-12);
    assert!((s.rho - SPEARMAN_RHO).abs() < 1e-12);
    assert!((s.p - SPEARMAN_P).abs() < 1e-6);
    assert_eq!(stats::average_ranks(&SPEARMAN_X), oracle::ranks(&SPEARMAN_X));
}

#[test]
fn pearson_matches_raw_moment_formula() {
    let r = stats::pearson(&PEARSON_X, &PEARSON_Y).unwrap();
    assert!((r - oracle::pearson(&PEARSON_X, &PEARSON_Y)).abs() < 1e-12);
    assert!((r - PEARSON_R).abs() < 1e-12);
}

#[test]
fn r2_conventions_match_reference() {
    let t = Matrix::from_rows(&R2_TARGETS).unwrap();
    let p = Matrix::from_rows(&R2_PREDS).unwrap();
    let per_dim = r2_per_dimension(&p, &t).unwrap();
    let rows = |m: &[[f64; 3]; 6]| m.iter().map(|r| r.to_vec()).collect::<Vec<_>>();
    let expected = oracle::r2_columns(&rows(&R2_TARGETS), &rows(&R2_PREDS));
    for d in 0..3 {
        assert!((per_dim[d] - expected[d]).abs() < 1e-10);
        assert!((per_dim[d] - R2_PER_DIM[d]).abs() < 1e-10);
    }
    assert!((mean_r2(&p, &t).unwrap() - R2_MEAN).abs() < 1e-10);
    let pooled = oracle::r2_flat(t.as_slice(), p.as_slice());
    assert!((r2_pooled(&p, &t).unwrap() - pooled).abs() < 1e-10);
    assert!((pooled - R2_POOLED).abs() < 1e-10);
}

#[test]
fn random_vectors_agree_with_oracles() {
    let mut rng = SplitMix64::new(17);
    for _ in 0..50 {
        let n = 10 + rng.below(40) as usize;
        // Coarse grid so that ties are common.
        let x: Vec<f64> = (0..n).map(|_| rng.below(8) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.below(8) as f64 - 4.0).collect();
        if let Ok(s) = stats::spearman(&x, &y) {
            assert!((s.rho - oracle::spearman(&x, &y)).abs() < 1e-10);
        }
        if let Ok(w) = stats::wilcoxon_signed_rank(&series(&y, &vec![0.0; n])) {
            assert!((w.statistic - oracle::wilcoxon_w(&y)).abs() < 1e-10);
        }
    }
}

#[test]
fn reported_effect_size_reproduces_t_magnitude() {
    // Differences standardized to sample mean 0 and sd 1, then shifted by 0.31.
    let n = 1202;
    let mut rng = SplitMix64::new(3);
    let z: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
    let m = z.iter().sum::<f64>() / n as f64;
    let sd = (z.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let d: Vec<f64> = z.iter().map(|v| 0.31 + (v - m) / sd).collect();
    let t = stats::paired_t(&series(&d, &vec![0.0; n])).unwrap();
    assert!((t.cohens_d - 0.31).abs() < 1e-12);
    assert!((t.t - 10.7477).abs() < 1e-3, "t {}", t.t);
    assert_eq!(t.t.abs(), t.cohens_d.abs() * (n as f64).sqrt());
}
