//! Locality-biased Conformer block: macaron feed-forward halves around
//! attention and a convolution module, finished by a layer norm.

mod block;
mod config;
mod weights;

pub use block::{
    attention_core, block_forward, block_forward_with_core, conv_module_forward, encoder_forward,
    ffn_forward, BatchNormParams, ConformerBlockParams, ConvModuleParams, FfnParams,
    LayerNormParams, BATCH_NORM_EPS, LAYER_NORM_EPS,
};
pub use config::{AttnKind, ModelConfig};
pub use weights::{decode_weights, encode_weights, load_weights, save_weights, MAGIC, VERSION};
