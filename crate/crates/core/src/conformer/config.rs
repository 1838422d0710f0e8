//! Model configuration and its flat `key = value` text form.
//!
//! ```text
//! # comments and blank lines are ignored
//! num_layers = 12
//! d_model = 256
//! d_ff = 2048
//! heads = 4
//! conv_kernel = 31
//! attn_kind = lbla-sigmoid      # softmax | lbla-relu | lbla-exp | lbla-sigmoid | lbla-identity
//! use_reweight = true
//! reweight_horizon = seq_len    # seq_len | <positive integer>
//! ```
//!
//! Unknown or repeated keys are errors; omitted keys keep their defaults.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lbla::{Horizon, KernelKind};

/// Which attention mechanism a block uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AttnKind {
    Softmax,
    Lbla { kernel: KernelKind, use_reweight: bool },
}

impl AttnKind {
    /// Name without the re-weighting flag (`softmax`, `lbla-sigmoid`, ...).
    pub fn base_name(self) -> String {
        match self {
            AttnKind::Softmax => "softmax".to_string(),
            AttnKind::Lbla { kernel, .. } => format!("lbla-{kernel}"),
        }
    }

    pub fn kernel(self) -> Option<KernelKind> {
        match self {
            AttnKind::Softmax => None,
            AttnKind::Lbla { kernel, .. } => Some(kernel),
        }
    }

    pub fn with_reweight(self, on: bool) -> Self {
        match self {
            AttnKind::Softmax => AttnKind::Softmax,
            AttnKind::Lbla { kernel, .. } => AttnKind::Lbla {
                kernel,
                use_reweight: on,
            },
        }
    }
}

impl fmt::Display for AttnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.base_name())
    }
}

/// Parses `softmax` or `lbla-<kernel>`; LBLA kinds default to re-weighting on.
impl FromStr for AttnKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "softmax" {
            return Ok(AttnKind::Softmax);
        }
        match s.strip_prefix("lbla-") {
            Some(kernel) => Ok(AttnKind::Lbla {
                kernel: kernel.parse()?,
                use_reweight: true,
            }),
            None => Err(Error::config(format!("unknown attention kind `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub heads: usize,
    pub conv_kernel: usize,
    pub attn_kind: AttnKind,
    pub reweight_horizon: Horizon,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            num_layers: 12,
            d_model: 256,
            d_ff: 2048,
            heads: 4,
            conv_kernel: 31,
            attn_kind: AttnKind::Lbla {
                kernel: KernelKind::Sigmoid,
                use_reweight: true,
            },
            reweight_horizon: Horizon::SeqLen,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("d_model", self.d_model),
            ("d_ff", self.d_ff),
            ("heads", self.heads),
            ("conv_kernel", self.conv_kernel),
        ] {
            if v == 0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        if !self.d_model.is_multiple_of(self.heads) {
            return Err(Error::config(format!(
                "d_model {} is not divisible by {} heads",
                self.d_model, self.heads
            )));
        }
        if self.conv_kernel.is_multiple_of(2) {
            return Err(Error::config(format!(
                "conv_kernel must be odd, got {}",
                self.conv_kernel
            )));
        }
        if self.reweight_horizon == Horizon::Fixed(0) {
            return Err(Error::config("reweight_horizon must be positive"));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let (attn, reweight) = match self.attn_kind {
            AttnKind::Softmax => ("softmax".to_string(), false),
            AttnKind::Lbla { use_reweight, .. } => (self.attn_kind.base_name(), use_reweight),
        };
        let horizon = match self.reweight_horizon {
            Horizon::SeqLen => "seq_len".to_string(),
            Horizon::Fixed(m) => m.to_string(),
        };
        format!(
            "num_layers = {}\nd_model = {}\nd_ff = {}\nheads = {}\nconv_kernel = {}\n\
             attn_kind = {attn}\nuse_reweight = {reweight}\nreweight_horizon = {horizon}\n",
            self.num_layers, self.d_model, self.d_ff, self.heads, self.conv_kernel,
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ModelConfig::default();
        let mut seen: Vec<String> = Vec::new();
        let mut reweight: Option<bool> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if seen.iter().any(|k| k == key) {
                return Err(Error::config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
            seen.push(key.to_string());
            let count = || {
                value.parse::<usize>().map_err(|_| {
                    Error::config(format!("line {}: `{key}` expects a count, got `{value}`", lineno + 1))
                })
            };
            match key {
                "num_layers" => cfg.num_layers = count()?,
                "d_model" => cfg.d_model = count()?,
                "d_ff" => cfg.d_ff = count()?,
                "heads" => cfg.heads = count()?,
                "conv_kernel" => cfg.conv_kernel = count()?,
                "attn_kind" => cfg.attn_kind = value.parse()?,
                "use_reweight" => {
                    reweight = Some(match value {
                        "true" => true,
                        "false" => false,
                        _ => {
                            return Err(Error::config(format!(
                                "line {}: `use_reweight` expects true or false",
                                lineno + 1
                            )))
                        }
                    })
                }
                "reweight_horizon" => {
                    cfg.reweight_horizon = match value {
                        "seq_len" => Horizon::SeqLen,
                        _ => Horizon::Fixed(count()?),
                    }
                }
                other => {
                    return Err(Error::config(format!("line {}: unknown key `{other}`", lineno + 1)))
                }
            }
        }
        if let Some(on) = reweight {
            cfg.attn_kind = cfg.attn_kind.with_reweight(on);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}
