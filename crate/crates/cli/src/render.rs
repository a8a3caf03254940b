use std::fmt::Write;

use pianoprobe_core::runner::{AblationTable, CompareReport, RunReport};
use pianoprobe_core::stats::{p_value, P_REPORT_THRESHOLD};
use pianoprobe_core::{ConfidenceInterval, Error, EvalReport, Result};
use serde_json::Value;

/// Plain-text view of a run, ablation or comparison report.
pub fn render(doc: &Value) -> Result<String> {
    let mut out = String::new();
    if doc.get("folds").is_some() {
        run_report(&mut out, &serde_json::from_value(doc.clone())?);
    } else if doc.get("rows").is_some() {
        ablation(&mut out, &serde_json::from_value(doc.clone())?);
    } else if doc.get("significance").is_some() {
        compare(&mut out, &serde_json::from_value(doc.clone())?);
    } else {
        return Err(Error::Schema(
            "not a run, ablation or comparison report".into(),
        ));
    }
    Ok(out.trim_end().to_string())
}

fn eval_table(out: &mut String, r: &EvalReport) {
    for (name, v) in &r.per_dimension_r2.0 {
        let _ = writeln!(out, "  {name:<24} {v:>8.4}");
    }
    let _ = writeln!(out, "  {:<24} {:>8.4}", "mean per-dimension R²", r.mean_per_dimension_r2);
    let _ = writeln!(out, "  {:<24} {:>8.4}", "pooled R²", r.pooled_r2);
}

fn interval(out: &mut String, ci: &ConfidenceInterval) {
    let name = serde_json::to_value(ci.statistic)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default();
    let _ = writeln!(
        out,
        "  {name:<24} {:.4} [{:.4}, {:.4}] ({:.0}%, {} resamples, {} skipped)",
        ci.point,
        ci.lo,
        ci.hi,
        ci.confidence * 100.0,
        ci.resamples,
        ci.skipped
    );
}

fn run_report(out: &mut String, r: &RunReport) {
    let _ = writeln!(out, "config {}", r.config_fingerprint);
    let _ = writeln!(
        out,
        "seeds: folds {}, bootstrap {}, train {:?}",
        r.seeds.folds, r.seeds.bootstrap, r.seeds.train
    );
    let _ = writeln!(out, "\naggregate over {} segments", r.aggregate.n_segments);
    eval_table(out, &r.aggregate);
    let _ = writeln!(out, "\nconfidence intervals");
    for ci in &r.confidence_intervals {
        interval(out, ci);
    }
    let _ = writeln!(out, "\nfold  train  val  test  best epoch  val R²    test R²");
    for f in &r.folds {
        let _ = writeln!(
            out,
            "{:>4}  {:>5}  {:>3}  {:>4}  {:>10}  {:>7.4}  {:>8.4}",
            f.fold,
            f.n_train,
            f.n_validation,
            f.n_test,
            f.best_epoch,
            f.best_validation_r2,
            f.report.mean_per_dimension_r2
        );
    }
}

fn ablation(out: &mut String, t: &AblationTable) {
    let _ = writeln!(out, "ablation over {} (base config {})", t.axis, t.base_fingerprint);
    let _ = writeln!(out, "{:<20} {:>10} {:>10}", "value", "mean R²", "pooled R²");
    for row in &t.rows {
        let _ = writeln!(
            out,
            "{:<20} {:>10.4} {:>10.4}",
            row.value, row.mean_per_dimension_r2, row.pooled_r2
        );
    }
}

fn p(v: f64) -> String {
    if v < P_REPORT_THRESHOLD {
        p_value::BELOW.to_string()
    } else {
        format!("{v:.3e}")
    }
}

fn compare(out: &mut String, c: &CompareReport) {
    let _ = writeln!(out, "{} vs {} over {} segments", c.model_a, c.model_b, c.n_segments);
    let _ = writeln!(out, "mean MSE: {:.6} vs {:.6}", c.mean_mse_a, c.mean_mse_b);
    let t = &c.significance.paired_t;
    let _ = writeln!(
        out,
        "paired t = {:.4} (p {}), Cohen's d = {:.4}",
        t.t,
        p(t.p),
        t.cohens_d
    );
    match &c.significance.wilcoxon {
        Some(w) => {
            let _ = writeln!(out, "Wilcoxon W+ = {} (z {:.4}, p {})", w.statistic, w.z, p(w.p));
        }
        None => {
            let _ = writeln!(out, "Wilcoxon: too few non-zero differences");
        }
    }
    let _ = writeln!(out, "error correlation r = {:.4}", c.error_correlation);
    let _ = writeln!(out, "\nper-dimension R² delta (a − b)");
    for d in &c.dimension_deltas {
        let _ = writeln!(out, "  {:<24} {:>+8.4}", d.dimension, d.delta);
    }
}
