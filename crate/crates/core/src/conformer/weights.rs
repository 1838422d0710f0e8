//! Binary weight files.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic        8 bytes   b"LBLAWGT\0"
//! version      u32       1
//! header_len   u32       byte length of the header
//! header       UTF-8     model config in `key = value` form
//! count        u32       number of tensors
//! index        count × { name_len u16, name, rows u32, cols u32 }
//! data         f64 × Σ rows·cols, tensors in index order, row-major
//! ```
//!
//! Tensor names are `blocks.<i>.<parameter>`; the index must match, entry for
//! entry, the layout implied by the header config.

use std::fs;
use std::path::Path;

use super::block::ConformerBlockParams;
use super::config::ModelConfig;
use crate::error::{Error, Result, Shape, WeightFileError};
use crate::rng::RngState;

pub const MAGIC: &[u8; 8] = b"LBLAWGT\0";
pub const VERSION: u32 = 1;

struct Entry {
    name: String,
    shape: Shape,
}

fn layout(cfg: &ModelConfig) -> Result<Vec<Entry>> {
    let template = ConformerBlockParams::init(cfg, &mut RngState::new(0))?;
    let per_block = template.tensors();
    Ok((0..cfg.num_layers)
        .flat_map(|b| {
            per_block.iter().map(move |(name, shape, _)| Entry {
                name: format!("blocks.{b}.{name}"),
                shape: *shape,
            })
        })
        .collect())
}

pub fn encode_weights(blocks: &[ConformerBlockParams], cfg: &ModelConfig) -> Result<Vec<u8>> {
    cfg.validate()?;
    if blocks.len() != cfg.num_layers {
        return Err(Error::config(format!(
            "config declares {} layers but {} blocks were given",
            cfg.num_layers,
            blocks.len()
        )));
    }
    for b in blocks {
        b.validate(cfg)?;
    }
    let header = cfg.to_text();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());

    let tensors: Vec<_> = blocks
        .iter()
        .enumerate()
        .flat_map(|(b, block)| {
            block
                .tensors()
                .into_iter()
                .map(move |(name, shape, data)| (format!("blocks.{b}.{name}"), shape, data))
        })
        .collect();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, (rows, cols), _) in &tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(*rows as u32).to_le_bytes());
        out.extend_from_slice(&(*cols as u32).to_le_bytes());
    }
    for (_, _, data) in &tensors {
        for v in *data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WeightFileError> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(WeightFileError::Truncated {
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, WeightFileError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, WeightFileError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode_weights(bytes: &[u8]) -> Result<(ModelConfig, Vec<ConformerBlockParams>)> {
    let mut r = Reader { bytes, pos: 0 };
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(WeightFileError::BadMagic.into());
    }
    r.take(MAGIC.len())?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(WeightFileError::Version {
            found: version,
            expected: VERSION,
        }
        .into());
    }
    let header_len = r.u32()? as usize;
    let header = std::str::from_utf8(r.take(header_len)?)
        .map_err(|e| WeightFileError::Header(e.to_string()))?;
    let cfg = ModelConfig::parse(header).map_err(|e| WeightFileError::Header(e.to_string()))?;

    let expected = layout(&cfg)?;
    let count = r.u32()? as usize;
    if count != expected.len() {
        return Err(WeightFileError::TensorCount {
            expected: expected.len(),
            found: count,
        }
        .into());
    }
    for (position, want) in expected.iter().enumerate() {
        let name_len = r.u16()? as usize;
        let name = String::from_utf8_lossy(r.take(name_len)?).into_owned();
        let shape = (r.u32()? as usize, r.u32()? as usize);
        if name != want.name {
            return Err(WeightFileError::TensorName {
                position,
                expected: want.name.clone(),
                found: name,
            }
            .into());
        }
        if shape != want.shape {
            return Err(WeightFileError::ShapeIndex {
                name,
                expected: want.shape,
                found: shape,
            }
            .into());
        }
    }

    let total: usize = expected.iter().map(|e| e.shape.0 * e.shape.1).sum();
    let data = r.take(total * 8)?;
    if r.pos != bytes.len() {
        return Err(WeightFileError::TrailingBytes(bytes.len() - r.pos).into());
    }
    let mut values = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));

    let template = ConformerBlockParams::init(&cfg, &mut RngState::new(0))?;
    let mut blocks = Vec::with_capacity(cfg.num_layers);
    for _ in 0..cfg.num_layers {
        let mut block = template.clone();
        for slot in block.tensors_mut() {
            for v in slot.iter_mut() {
                *v = values.next().expect("length checked above");
            }
        }
        block.validate(&cfg)?;
        blocks.push(block);
    }
    Ok((cfg, blocks))
}

pub fn save_weights(path: impl AsRef<Path>, blocks: &[ConformerBlockParams], cfg: &ModelConfig) -> Result<()> {
    fs::write(path, encode_weights(blocks, cfg)?)?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<(ModelConfig, Vec<ConformerBlockParams>)> {
    decode_weights(&fs::read(path)?)
}
