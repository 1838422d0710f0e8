//! Locality-biased linear attention (LBLA) for Conformer encoders.
//!
//! The crate contains a small dense-matrix substrate ([`tensor`], [`rng`]),
//! quadratic reference attention and the explicit LBLA oracle
//! ([`attention`]), the linear-time LBLA forward and backward passes
//! ([`lbla`]), and a Conformer block that hosts either mechanism
//! ([`conformer`]).

pub mod attention;
pub mod conformer;
pub mod error;
pub mod lbla;
pub mod rng;
pub mod tensor;

pub use attention::{
    lbla_attention_weights, lbla_oracle, multi_head_attention, normalize_rows, proximity_matrix,
    softmax_attention, AttentionParams, HeadAttention, ProjectedTriple, SoftmaxCore,
};
pub use error::{Error, Result, WeightFileError};
pub use lbla::{
    apply_kernel, build_reweight, cosine_weight, lbla_backward, lbla_forward,
    lbla_forward_with_stats, CosineReweight, ForwardStats, Horizon, KernelKind, LblaCore,
    LblaGradients, LblaOracleCore, ROW_SUM_EPS,
};
pub use rng::{seeded_init, RngState};
pub use tensor::{
    depthwise_conv1d, layernorm, matmul, relative_error, softmax_rows, Scalar, SequenceTensor,
    Tensor,
};
pub use conformer::{
    block_forward, block_forward_with_core, encoder_forward, load_weights, save_weights, AttnKind, ConformerBlockParams,
    ModelConfig,
};
