//! Graph variational autoencoder on a small reverse-mode tape.

pub mod loss;
pub mod model;
pub mod tape;
pub mod train;

pub use loss::{
    kl_divergence, log_ratio_loss, loss_total, orth_reg_value, rank_weights, LossBreakdown, LossWeights,
    TrainBatch,
};
pub use model::{raw_to_configuration, reparameterize, Checkpoint, ModelConfig, VgaeModel};
pub use tape::{Tape, Tensor};
pub use train::{Adam, AdamConfig, Trainer, WARMUP_EPOCHS};
