//! Probing harness for perceptual piano-performance regression on frozen
//! audio-encoder embeddings.
//!
//! The pipeline reads per-segment frame embeddings ([`embedding_store`]),
//! joins them with 19-dimensional perceptual labels ([`dataset`]), pools
//! frames ([`pooling`]), trains a small regressor ([`nnet`]) under piece-split
//! cross-validation ([`runner`]) and evaluates it ([`metrics`], [`stats`],
//! [`analysis`]).

pub mod analysis;
pub mod dataset;
pub mod embedding_store;
pub mod error;
pub mod matrix;
pub mod metrics;
pub mod nnet;
pub mod pooling;
pub mod rng;
pub mod runner;
pub mod stats;
pub mod synthetic;

pub use analysis::PredictionSet;
pub use dataset::{LabeledSegment, PairKey, RenditionsMode, SplitPlan, DIMENSIONS, NUM_DIMENSIONS};
pub use embedding_store::{EmbeddingSequence, ManifestEntry};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use metrics::{EvalReport, NamedValues};
pub use nnet::{LossKind, TrainConfig};
pub use pooling::PoolingKind;
pub use runner::{ExperimentConfig, RunArtifact};
pub use stats::{BootstrapConfig, ConfidenceInterval};
