//! Tree-to-tree recursive LSTM: a two-child encoder, a state bridge and a
//! top-down decoder with separate left and right cells.

mod checkpoint;
mod decode;
pub mod net;
mod params;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use decode::{decode_greedy, DecodeOptions};
pub use net::{combine_children, Feed, ForwardPass, HullBatch};
pub use params::{xavier_init, BridgeMode, Layout, ModelConfig, Params};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("bridge mode `none` needs equal state sizes (encoder {enc}, decoder {dec})")]
    BridgeRequired { enc: usize, dec: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite values in the {0} state")]
    NonFiniteState(&'static str),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
