//! Binary weight file.
//!
//! Layout, all integers `u32` little-endian:
//!
//! ```text
//! "SWNW" | version | image_size in_channels patch_size embed_dim
//! | num_stages | depths[num_stages] | num_heads[num_stages]
//! | window_size shift_size mlp_ratio num_classes
//! | param_count | { path_len | path (UTF-8) | rank | extents[rank] | f64 LE values }*
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use crate::tensor::Tensor;

use super::{ModelWeights, SwinConfig, SwinError};

pub const MAGIC: &[u8; 4] = b"SWNW";
pub const FORMAT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn weights_to_bytes(weights: &ModelWeights) -> Vec<u8> {
    let c = weights.config();
    let mut out = Vec::with_capacity(16 + weights.num_scalars() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for v in [c.image_size, c.in_channels, c.patch_size, c.embed_dim, c.num_stages()] {
        put_u32(&mut out, v);
    }
    c.depths.iter().chain(&c.num_heads).for_each(|&v| put_u32(&mut out, v));
    for v in [c.window_size, c.shift_size, c.mlp_ratio, c.num_classes] {
        put_u32(&mut out, v);
    }
    put_u32(&mut out, weights.len());
    for (path, tensor) in weights.iter() {
        put_u32(&mut out, path.len());
        out.extend_from_slice(path.as_bytes());
        put_u32(&mut out, tensor.shape().len());
        tensor.shape().iter().for_each(|&d| put_u32(&mut out, d));
        for v in tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn fail<T>(&self, reason: impl Into<String>) -> Result<T, SwinError> {
        Err(SwinError::Format {
            offset: self.pos,
            reason: reason.into(),
        })
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], SwinError> {
        if self.bytes.len() - self.pos < n {
            return self.fail(format!("truncated while reading {what}"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize, SwinError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn f64(&mut self) -> Result<f64, SwinError> {
        let b = self.take(8, "parameter value")?;
        Ok(f64::from_le_bytes(b.try_into().expect("8 bytes")))
    }
}

pub fn weights_from_bytes(bytes: &[u8]) -> Result<ModelWeights, SwinError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        r.pos = 0;
        return r.fail("bad magic, expected SWNW");
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION as usize {
        r.pos -= 4;
        return r.fail(format!("unsupported version {version}"));
    }
    let image_size = r.u32("image_size")?;
    let in_channels = r.u32("in_channels")?;
    let patch_size = r.u32("patch_size")?;
    let embed_dim = r.u32("embed_dim")?;
    let stages = r.u32("num_stages")?;
    if stages > 16 {
        return r.fail(format!("implausible stage count {stages}"));
    }
    let depths = (0..stages).map(|_| r.u32("depths")).collect::<Result<Vec<_>, _>>()?;
    let num_heads = (0..stages).map(|_| r.u32("num_heads")).collect::<Result<Vec<_>, _>>()?;
    let config = SwinConfig {
        image_size,
        in_channels,
        patch_size,
        embed_dim,
        depths,
        num_heads,
        window_size: r.u32("window_size")?,
        shift_size: r.u32("shift_size")?,
        mlp_ratio: r.u32("mlp_ratio")?,
        num_classes: r.u32("num_classes")?,
    };
    let count = r.u32("parameter count")?;
    let mut params = BTreeMap::new();
    for _ in 0..count {
        let start = r.pos;
        let len = r.u32("path length")?;
        let path = match std::str::from_utf8(r.take(len, "path")?) {
            Ok(p) => p.to_owned(),
            Err(_) => {
                r.pos = start;
                return r.fail("parameter path is not UTF-8");
            }
        };
        let rank = r.u32("rank")?;
        if rank > 8 {
            return r.fail(format!("implausible rank {rank} for {path}"));
        }
        let shape = (0..rank).map(|_| r.u32("extent")).collect::<Result<Vec<_>, _>>()?;
        let numel: usize = shape.iter().product();
        if numel.saturating_mul(8) > bytes.len() - r.pos {
            return r.fail(format!("truncated values for {path}"));
        }
        let data = (0..numel).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        let tensor = Tensor::new(shape, data).map_err(|e| SwinError::Format {
            offset: start,
            reason: format!("{path}: {e}"),
        })?;
        if params.insert(path.clone(), tensor).is_some() {
            r.pos = start;
            return r.fail(format!("duplicate parameter {path}"));
        }
    }
    if r.pos != bytes.len() {
        return r.fail(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    ModelWeights::from_parts(config, params)
}

pub fn save_weights(weights: &ModelWeights, path: impl AsRef<Path>) -> Result<(), SwinError> {
    std::fs::write(path, weights_to_bytes(weights))?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<ModelWeights, SwinError> {
    weights_from_bytes(&std::fs::read(path)?)
}

/// Loads weights and checks they were built for `config`.
pub fn load_weights_expecting(path: impl AsRef<Path>, config: &SwinConfig) -> Result<ModelWeights, SwinError> {
    let w = load_weights(path)?;
    if w.config() != config {
        return Err(SwinError::Config(format!(
            "weight file config {:?} does not match expected {:?}",
            w.config(),
            config
        )));
    }
    Ok(w)
}
