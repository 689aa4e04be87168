//! Differentiable planners: the value-iteration block and the three ways of
//! turning its iterates into action logits.

mod checkpoint;
mod config;
pub mod crafted;
mod heuristic;
mod params;
mod planner;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use config::{ModelConfig, Variant};
pub use heuristic::{
    heuristic_k, scaled_k, verify_table4, TableMismatch, TABLE4_F, TABLE4_K, TABLE4_K_PRIME,
};
pub use params::{param_layout, BoundGs, BoundParams, GsParams, ModelParams, INIT_STD};
pub use planner::{
    argmax, attention_summarize, check_gradients, encode_maps, forward, gs_module, loss_and_grad,
    loss_graph, q_maps, vi_module, EncodedBatch, LossGraph, Planner, ViOutput,
};

use crate::codec::CodecError;
use crate::gridworld::GridError;
use crate::tensor::TensorError;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("parameter mismatch: {0}")]
    Params(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Grid(#[from] GridError),
}
