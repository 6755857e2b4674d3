//! Shifted-window transformer: windowing, masked attention with relative
//! position bias, patch embedding and merging, and the classification head.

mod attention;
mod config;
mod io;
mod model;
mod window;

use thiserror::Error;

use crate::tensor::TensorError;

pub use attention::{window_attention, AttentionOutput, AttentionParams};
pub use config::{SwinConfig, LAYER_NORM_EPS};
pub use io::{load_weights, load_weights_expecting, save_weights, weights_from_bytes, weights_to_bytes, FORMAT_VERSION, MAGIC};
pub use model::{
    attention_params, block_on_tape, forward_classify, forward_on_tape, merge_concat_on_tape, parameter_shapes,
    patch_embed, patch_embed_on_tape, patch_index, patch_merging_on_tape, random_image, ModelWeights, ParamVars,
    Prediction,
};
pub use window::{
    build_shift_mask, cyclic_shift, expand_rows, invert_order, partition_order, relative_bias_index, shift_order,
    shift_region_ids, window_partition, window_reverse, AttentionMask, TokenGrid, MASK_NEG,
};

#[derive(Debug, Error)]
pub enum SwinError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("weight file format error at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
