use super::config::{AttnKind, ModelConfig};
use crate::attention::{multi_head_attention, AttentionParams, HeadAttention, SoftmaxCore};
use crate::error::{Error, Result};
use crate::lbla::LblaCore;
use crate::rng::{seeded_init, RngState};
use crate::tensor::{depthwise_conv1d, layernorm, matmul, sigmoid, swish, Tensor};

pub const LAYER_NORM_EPS: f64 = 1e-5;
pub const BATCH_NORM_EPS: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct LayerNormParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl LayerNormParams {
    pub fn identity(d: usize) -> Self {
        LayerNormParams {
            gamma: vec![1.0; d],
            beta: vec![0.0; d],
        }
    }

    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        layernorm(x, &self.gamma, &self.beta, LAYER_NORM_EPS)
    }
}

/// Pre-norm feed-forward module: linear → Swish → linear.
#[derive(Clone, Debug, PartialEq)]
pub struct FfnParams {
    pub norm: LayerNormParams,
    pub w_in: Tensor,
    pub b_in: Vec<f64>,
    pub w_out: Tensor,
    pub b_out: Vec<f64>,
}

impl FfnParams {
    pub fn init(rng: &mut RngState, d: usize, d_ff: usize) -> Self {
        FfnParams {
            norm: LayerNormParams::identity(d),
            w_in: seeded_init(rng, d, d_ff, d),
            b_in: vec![0.0; d_ff],
            w_out: seeded_init(rng, d_ff, d, d_ff),
            b_out: vec![0.0; d],
        }
    }
}

/// Inference-mode batch normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

impl BatchNormParams {
    pub fn identity(d: usize) -> Self {
        BatchNormParams {
            gamma: vec![1.0; d],
            beta: vec![0.0; d],
            running_mean: vec![0.0; d],
            running_var: vec![1.0; d],
        }
    }

    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let d = x.cols();
        if [&self.gamma, &self.beta, &self.running_mean, &self.running_var]
            .iter()
            .any(|v| v.len() != d)
        {
            return Err(Error::shape("batch_norm", x.shape(), (1, self.gamma.len())));
        }
        let mut out = x.clone();
        for t in 0..x.rows() {
            for (c, v) in out.row_mut(t).iter_mut().enumerate() {
                let inv = 1.0 / (self.running_var[c] + BATCH_NORM_EPS).sqrt();
                *v = (*v - self.running_mean[c]) * inv * self.gamma[c] + self.beta[c];
            }
        }
        Ok(out)
    }
}

/// Pointwise(d→2d) → GLU → depthwise → batch norm → Swish → pointwise(d→d).
#[derive(Clone, Debug, PartialEq)]
pub struct ConvModuleParams {
    pub norm: LayerNormParams,
    pub pw1_w: Tensor,
    pub pw1_b: Vec<f64>,
    /// `d × kernel_size`, one row per channel.
    pub dw: Tensor,
    pub bn: BatchNormParams,
    pub pw2_w: Tensor,
    pub pw2_b: Vec<f64>,
}

impl ConvModuleParams {
    pub fn init(rng: &mut RngState, d: usize, kernel_size: usize) -> Self {
        ConvModuleParams {
            norm: LayerNormParams::identity(d),
            pw1_w: seeded_init(rng, d, 2 * d, d),
            pw1_b: vec![0.0; 2 * d],
            dw: seeded_init(rng, d, kernel_size, kernel_size),
            bn: BatchNormParams::identity(d),
            pw2_w: seeded_init(rng, d, d, d),
            pw2_b: vec![0.0; d],
        }
    }
}

/// All weights of one Conformer block.
#[derive(Clone, Debug, PartialEq)]
pub struct ConformerBlockParams {
    pub ffn1: FfnParams,
    pub attn_norm: LayerNormParams,
    pub attn: AttentionParams,
    pub conv: ConvModuleParams,
    pub ffn2: FfnParams,
    pub final_norm: LayerNormParams,
}

impl ConformerBlockParams {
    /// Seeded uniform weights, zero biases, identity norms.
    pub fn init(cfg: &ModelConfig, rng: &mut RngState) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.d_model;
        let ffn1 = FfnParams::init(rng, d, cfg.d_ff);
        let mut w = || seeded_init(rng, d, d, d);
        let attn = AttentionParams::new(w(), w(), w(), w(), cfg.heads)?;
        let conv = ConvModuleParams::init(rng, d, cfg.conv_kernel);
        let ffn2 = FfnParams::init(rng, d, cfg.d_ff);
        Ok(ConformerBlockParams {
            ffn1,
            attn_norm: LayerNormParams::identity(d),
            attn,
            conv,
            ffn2,
            final_norm: LayerNormParams::identity(d),
        })
    }

    /// `n` blocks drawn from independent streams of `seed`.
    pub fn init_stack(cfg: &ModelConfig, n: usize, seed: u64) -> Result<Vec<Self>> {
        let root = RngState::new(seed);
        (0..n)
            .map(|i| Self::init(cfg, &mut root.fork(i as u64)))
            .collect()
    }

    /// Every parameter with its stable name and shape; vectors are `1 × n`.
    pub fn tensors(&self) -> Vec<(String, (usize, usize), &[f64])> {
        let mut out = Vec::new();
        fn mat<'a>(out: &mut Vec<(String, (usize, usize), &'a [f64])>, name: String, t: &'a Tensor) {
            out.push((name, t.shape(), t.as_slice()));
        }
        fn vector<'a>(out: &mut Vec<(String, (usize, usize), &'a [f64])>, name: String, v: &'a [f64]) {
            out.push((name, (1, v.len()), v));
        }
        for (tag, f) in [("ffn1", &self.ffn1), ("ffn2", &self.ffn2)] {
            vector(&mut out, format!("{tag}.norm.gamma"), &f.norm.gamma);
            vector(&mut out, format!("{tag}.norm.beta"), &f.norm.beta);
            mat(&mut out, format!("{tag}.w_in"), &f.w_in);
            vector(&mut out, format!("{tag}.b_in"), &f.b_in);
            mat(&mut out, format!("{tag}.w_out"), &f.w_out);
            vector(&mut out, format!("{tag}.b_out"), &f.b_out);
        }
        vector(&mut out, "attn.norm.gamma".into(), &self.attn_norm.gamma);
        vector(&mut out, "attn.norm.beta".into(), &self.attn_norm.beta);
        mat(&mut out, "attn.w_q".into(), &self.attn.w_q);
        mat(&mut out, "attn.w_k".into(), &self.attn.w_k);
        mat(&mut out, "attn.w_v".into(), &self.attn.w_v);
        mat(&mut out, "attn.w_o".into(), &self.attn.w_o);
        let c = &self.conv;
        vector(&mut out, "conv.norm.gamma".into(), &c.norm.gamma);
        vector(&mut out, "conv.norm.beta".into(), &c.norm.beta);
        mat(&mut out, "conv.pw1_w".into(), &c.pw1_w);
        vector(&mut out, "conv.pw1_b".into(), &c.pw1_b);
        mat(&mut out, "conv.dw".into(), &c.dw);
        vector(&mut out, "conv.bn.gamma".into(), &c.bn.gamma);
        vector(&mut out, "conv.bn.beta".into(), &c.bn.beta);
        vector(&mut out, "conv.bn.running_mean".into(), &c.bn.running_mean);
        vector(&mut out, "conv.bn.running_var".into(), &c.bn.running_var);
        mat(&mut out, "conv.pw2_w".into(), &c.pw2_w);
        vector(&mut out, "conv.pw2_b".into(), &c.pw2_b);
        vector(&mut out, "final_norm.gamma".into(), &self.final_norm.gamma);
        vector(&mut out, "final_norm.beta".into(), &self.final_norm.beta);
        out
    }

    /// Mutable views in the same order as [`tensors`](Self::tensors).
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for f in [&mut self.ffn1, &mut self.ffn2] {
            out.push(&mut f.norm.gamma);
            out.push(&mut f.norm.beta);
            out.push(f.w_in.as_mut_slice());
            out.push(&mut f.b_in);
            out.push(f.w_out.as_mut_slice());
            out.push(&mut f.b_out);
        }
        out.push(&mut self.attn_norm.gamma);
        out.push(&mut self.attn_norm.beta);
        out.push(self.attn.w_q.as_mut_slice());
        out.push(self.attn.w_k.as_mut_slice());
        out.push(self.attn.w_v.as_mut_slice());
        out.push(self.attn.w_o.as_mut_slice());
        let c = &mut self.conv;
        out.push(&mut c.norm.gamma);
        out.push(&mut c.norm.beta);
        out.push(c.pw1_w.as_mut_slice());
        out.push(&mut c.pw1_b);
        out.push(c.dw.as_mut_slice());
        out.push(&mut c.bn.gamma);
        out.push(&mut c.bn.beta);
        out.push(&mut c.bn.running_mean);
        out.push(&mut c.bn.running_var);
        out.push(c.pw2_w.as_mut_slice());
        out.push(&mut c.pw2_b);
        out.push(&mut self.final_norm.gamma);
        out.push(&mut self.final_norm.beta);
        out
    }

    /// Checks shapes against `cfg` and that batch-norm variances are positive.
    pub fn validate(&self, cfg: &ModelConfig) -> Result<()> {
        let reference = ConformerBlockParams::init(cfg, &mut RngState::new(0))?;
        for ((name, expected, _), (_, found, values)) in reference.tensors().into_iter().zip(self.tensors()) {
            if expected != found {
                return Err(Error::config(format!(
                    "parameter `{name}` has shape {found:?}, config implies {expected:?}"
                )));
            }
            if name == "conv.bn.running_var" && values.iter().any(|&v| v.is_nan() || v <= 0.0) {
                return Err(Error::config("batch-norm running variance must be positive"));
            }
        }
        self.attn.validate()
    }
}

fn linear(x: &Tensor, w: &Tensor, b: &[f64]) -> Result<Tensor> {
    matmul(x, w)?.add_row_vector(b)
}

/// `x + s · FFN(norm(x))` with `s = 0.5` for half-step residuals.
pub fn ffn_forward(x: &Tensor, p: &FfnParams, half_step: bool) -> Result<Tensor> {
    let h = linear(&p.norm.apply(x)?, &p.w_in, &p.b_in)?.map(swish);
    let y = linear(&h, &p.w_out, &p.b_out)?;
    x.add_scaled(&y, if half_step { 0.5 } else { 1.0 })
}

/// Gated linear unit over the two column halves: `a ⊙ σ(b)`.
fn glu(x: &Tensor) -> Tensor {
    let d = x.cols() / 2;
    Tensor::from_fn(x.rows(), d, |t, c| x[(t, c)] * sigmoid(x[(t, d + c)]))
}

/// `x + Conv(norm(x))`.
pub fn conv_module_forward(x: &Tensor, p: &ConvModuleParams) -> Result<Tensor> {
    let h = linear(&p.norm.apply(x)?, &p.pw1_w, &p.pw1_b)?;
    if h.cols() != 2 * x.cols() {
        return Err(Error::shape("conv_module pointwise", x.shape(), p.pw1_w.shape()));
    }
    let h = depthwise_conv1d(&glu(&h), &p.dw, p.dw.cols())?;
    let h = p.bn.apply(&h)?.map(swish);
    x.add(&linear(&h, &p.pw2_w, &p.pw2_b)?)
}

/// The head-level attention core selected by `cfg.attn_kind`.
pub fn attention_core(cfg: &ModelConfig) -> Box<dyn HeadAttention<f64>> {
    match cfg.attn_kind {
        AttnKind::Softmax => Box::new(SoftmaxCore),
        AttnKind::Lbla {
            kernel,
            use_reweight,
        } => Box::new(LblaCore::new(
            kernel,
            use_reweight.then_some(cfg.reweight_horizon),
        )),
    }
}

/// One block: ½FFN → attention → convolution → ½FFN → layer norm, each
/// submodule pre-normed with a residual connection.
pub fn block_forward(x: &Tensor, params: &ConformerBlockParams, cfg: &ModelConfig) -> Result<Tensor> {
    block_forward_with_core(x, params, cfg, attention_core(cfg).as_ref())
}

/// [`block_forward`] with an explicit attention core.
pub fn block_forward_with_core(
    x: &Tensor,
    params: &ConformerBlockParams,
    cfg: &ModelConfig,
    core: &dyn HeadAttention<f64>,
) -> Result<Tensor> {
    if x.cols() != cfg.d_model {
        return Err(Error::shape("block_forward", x.shape(), (x.rows(), cfg.d_model)));
    }
    let x = ffn_forward(x, &params.ffn1, true)?;
    let attended = multi_head_attention(&params.attn_norm.apply(&x)?, &params.attn, core)?;
    let x = x.add(&attended)?;
    let x = conv_module_forward(&x, &params.conv)?;
    let x = ffn_forward(&x, &params.ffn2, true)?;
    params.final_norm.apply(&x)
}

/// Applies `blocks` in order.
pub fn encoder_forward(x: &Tensor, blocks: &[ConformerBlockParams], cfg: &ModelConfig) -> Result<Tensor> {
    let core = attention_core(cfg);
    blocks.iter().try_fold(x.clone(), |h, b| {
        block_forward_with_core(&h, b, cfg, core.as_ref())
    })
}
