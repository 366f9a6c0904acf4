//! Masked loss, optimizers and the cluster-as-minibatch training loop.

mod config;
pub mod loss;
pub mod optim;
pub mod pretrain;
mod trainer;

pub use config::{OptimizerKind, TrainConfig, TrainMode, LR_RANGE};
pub use loss::{loss_mask, mask_weight, masked_loss, symbol_counts};
pub use optim::{clip_global_norm, OptState};
pub use pretrain::pretrain_autoencoders;
pub use trainer::{
    batch_gradients, batches_for, cluster_pairs, evaluate_batches, make_batches, pair_masks,
    predict_batch, EpochLog, Trainer, METRICS_HEADER,
};

use crate::pipeline::{EncodedPair, PipelineError};
use crate::treelstm::{ModelError, Params};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("config line {0}: expected `key = value`")]
    MalformedConfigLine(usize),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`")]
    InvalidValue { key: String, value: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss or parameters")]
    NonFiniteLoss,
    #[error("training diverged in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("no training data")]
    EmptyData,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Trains a model from scratch according to `cfg.mode`.
pub fn fit(
    train: &[EncodedPair],
    val: &[EncodedPair],
    vocab_in: usize,
    vocab_out: usize,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochLog, &Params) -> Result<(), TrainError>,
) -> Result<(Params, Vec<EpochLog>), TrainError> {
    cfg.validate()?;
    match cfg.mode {
        TrainMode::Direct => {
            let params = Params::init(&cfg.model_config(vocab_in, vocab_out), cfg.seed)?;
            let tb = batches_for(train, cfg.cluster_steps)?;
            let vb = batches_for(val, cfg.cluster_steps)?;
            let mut t = Trainer::new(params, cfg.clone());
            let logs = t.train(&tb, &vb, cfg.epochs, on_epoch)?;
            Ok((t.params, logs))
        }
        TrainMode::AutoencoderPretrain => {
            pretrain_autoencoders(train, val, vocab_in, vocab_out, cfg, on_epoch)
        }
    }
}
