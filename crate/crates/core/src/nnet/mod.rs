//! Two-layer MLP regressor: forward/backward, losses, AdamW and the
//! early-stopped training loop. All arithmetic is `f64`.

pub mod adam;
pub mod checkpoint;
pub mod loss;
pub mod mlp;
pub mod train;

pub use adam::{adam_step, AdamConfig, AdamState, ParamBlocks};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointHeader};
pub use loss::{ccc_loss, hybrid_loss, mse_loss, LossKind, CCC_EPSILON};
pub use mlp::{backward, dropout_masks, forward, predict_one, ForwardCache, Gradients, RegressorParams};
pub use train::{predict, train, EpochRecord, Features, Model, TrainConfig, TrainLog};
