//! Experiment orchestration: configs, cross-validation, ablation sweeps and
//! model comparison reports.

pub mod ablation;
pub mod compare;
pub mod config;
pub mod cv;

pub use ablation::{parse_layer_range, run_ablation, AblationAxis, AblationRow, AblationTable};
pub use compare::{compare_predictions, run_compare, CompareReport, DimensionDelta, Significance};
pub use config::ExperimentConfig;
pub use cv::{load_dataset, run_cv, run_cv_with, select_layers, Dataset, FoldSummary, Inputs, RunArtifact, RunReport, RunSeeds};
