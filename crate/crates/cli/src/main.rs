//! `pianoprobe` command-line front end.
//!
//! Every subcommand prints one JSON document on stdout (except `report`,
//! which renders text unless `--json` is given). Failures print
//! `{"error": {"kind": ..., "message": ...}}` on stderr and exit nonzero.

mod commands;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

/// Relative `output_dir`s resolve against this directory when it is set.
pub const OUTPUT_ROOT_ENV: &str = "PIANOPROBE_OUTPUT_ROOT";

#[derive(Parser, Debug)]
#[command(name = "pianoprobe", version, about = "Probe frozen audio embeddings for perceptual piano regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a manifest and every embedding file it lists.
    Ingest {
        #[arg(long)]
        manifest: PathBuf,
        /// Labels CSV; every labeled (segment, rendition) must have an entry.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Layers each file must contain, e.g. `9-12` or `1,3`.
        #[arg(long)]
        layers: Option<String>,
    },
    /// Piece-split cross-validation.
    Cv {
        #[arg(long)]
        config: PathBuf,
        /// Override a config leaf: `train.adam.lr=0.001`. Repeatable.
        #[arg(long = "set", value_name = "PATH=VALUE")]
        overrides: Vec<String>,
    },
    /// One cross-validation run per value along an axis.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "PATH=VALUE")]
        overrides: Vec<String>,
        /// `layer_range`, `pooling` or `loss`.
        #[arg(long)]
        axis: String,
        #[arg(long = "value", required = true)]
        values: Vec<String>,
    },
    /// Late fusion of two prediction files.
    Fuse {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, value_enum, default_value_t = FuseMode::Weighted)]
        mode: FuseMode,
        /// Fixed weight of `a`; otherwise selected on `--fit-ids`.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Segment ids (one per line) used to select alpha or fit the gate.
        #[arg(long)]
        fit_ids: Option<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        grid_step: f64,
        #[arg(long, default_value_t = 500)]
        gate_steps: usize,
        #[arg(long, default_value_t = 0.1)]
        gate_lr: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Paired significance tests between two prediction files.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        labels: PathBuf,
    },
    /// Spread of predictions across performers of the same piece.
    Consistency {
        #[arg(long)]
        predictions: PathBuf,
        /// CSV with `segment_id,piece_id,performer_id`.
        #[arg(long)]
        performers: PathBuf,
    },
    /// Rank correlation between piece-level predictions and difficulty ratings.
    Difficulty {
        #[arg(long)]
        predictions: PathBuf,
        /// CSV with `piece_id,rating`.
        #[arg(long)]
        ratings: PathBuf,
        /// Labels CSV providing each segment's piece.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value = "mean_of_dimensions")]
        aggregate: String,
    },
    /// Render a report.json, ablation.json or comparison report.
    Report {
        /// A report file or a run directory containing report.json.
        path: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FuseMode {
    Weighted,
    Gated,
}

fn fail(kind: &str, message: &str) -> ExitCode {
    eprintln!("{}", json!({ "error": { "kind": kind, "message": message } }));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim()),
    };
    match commands::run(cli.command) {
        Ok(out) => {
            println!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.kind(), &e.to_string()),
    }
}
