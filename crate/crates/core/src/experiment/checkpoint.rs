//! `GXNR1` checkpoint files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "GXNR1"            5-byte magic
//! u64                header length in bytes
//! header             TOML: format version, input shape, layer specs
//! per layer, in order:
//!   dense / conv     u64 weight count L, then
//!                    ternary spaces: mask plane, sign plane
//!                    other spaces:   B index bit-planes (B = bits for 2^N+1 states)
//!                    each plane is ceil(L/64) u64 words, lane i at bit i%64
//!   batch norm       gamma, beta, running mean, running variance as f64
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::discrete::DiscreteSpace;
use crate::error::{Error, Result};
use crate::gxnor::pack;
use crate::net::{Layer, LayerSpec, Model};

pub const MAGIC: &[u8; 5] = b"GXNR1";
const HEADER_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    input_shape: Vec<usize>,
    layers: Vec<LayerSpec>,
}

fn bits_for(space: &DiscreteSpace) -> u32 {
    usize::BITS - space.max_index().leading_zeros()
}

fn put_words(out: &mut Vec<u8>, words: &[u64]) {
    for w in words {
        out.extend_from_slice(&w.to_le_bytes());
    }
}

fn encode_weights(out: &mut Vec<u8>, w: &[f64], space: &DiscreteSpace) -> Result<()> {
    out.extend_from_slice(&(w.len() as u64).to_le_bytes());
    if space.is_ternary() {
        let h = space.half_range();
        let unit: Vec<f64> = w.iter().map(|&v| v / h).collect();
        let p = pack(&unit)?;
        put_words(out, p.mask());
        put_words(out, p.sign());
        return Ok(());
    }
    let words = w.len().div_ceil(64);
    let mut planes = vec![vec![0u64; words]; bits_for(space) as usize];
    for (i, &v) in w.iter().enumerate() {
        let idx = space
            .index_of(v)
            .ok_or_else(|| Error::Checkpoint(format!("weight {v} is not a state of its space")))?;
        for (b, plane) in planes.iter_mut().enumerate() {
            if idx >> b & 1 == 1 {
                plane[i / 64] |= 1 << (i % 64);
            }
        }
    }
    for plane in &planes {
        put_words(out, plane);
    }
    Ok(())
}

/// Serialize weights, batch-norm parameters and running statistics.
pub fn encode(model: &Model) -> Result<Vec<u8>> {
    let header = Header {
        format_version: HEADER_VERSION,
        input_shape: model.input_shape().to_vec(),
        layers: model.specs().to_vec(),
    };
    let text = toml::to_string(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut out = MAGIC.to_vec();
    out.extend_from_slice(&(text.len() as u64).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    for layer in model.layers() {
        match layer {
            Layer::Dense { space, weights, .. } => encode_weights(&mut out, weights.data(), space)?,
            Layer::Conv2d { space, kernels, .. } => encode_weights(&mut out, kernels.data(), space)?,
            Layer::BatchNorm { bn, .. } => {
                for v in bn.gamma.iter().chain(&bn.beta).chain(&bn.running_mean).chain(&bn.running_var) {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            _ => {}
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Checkpoint("file is truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn words(&mut self, n: usize) -> Result<Vec<u64>> {
        (0..n).map(|_| self.u64()).collect()
    }
}

fn decode_weights(r: &mut Reader, dst: &mut [f64], space: &DiscreteSpace) -> Result<()> {
    let len = r.u64()? as usize;
    if len != dst.len() {
        return Err(Error::Checkpoint(format!("layer stores {len} weights, spec needs {}", dst.len())));
    }
    let words = len.div_ceil(64);
    if space.is_ternary() {
        let mask = r.words(words)?;
        let sign = r.words(words)?;
        let p = crate::gxnor::PackedTernary::from_planes(len, mask, sign).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let h = space.half_range();
        for (i, v) in dst.iter_mut().enumerate() {
            *v = p.get(i) as f64 * h;
        }
        return Ok(());
    }
    let planes: Vec<Vec<u64>> = (0..bits_for(space)).map(|_| r.words(words)).collect::<Result<_>>()?;
    for (i, v) in dst.iter_mut().enumerate() {
        let idx = planes
            .iter()
            .enumerate()
            .fold(0usize, |acc, (b, plane)| acc | ((plane[i / 64] >> (i % 64) & 1) as usize) << b);
        if idx > space.max_index() {
            return Err(Error::Checkpoint(format!("state index {idx} out of range")));
        }
        *v = space.state(idx);
    }
    Ok(())
}

pub fn decode(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(MAGIC.len()).ok() != Some(&MAGIC[..]) {
        return Err(Error::Checkpoint("missing GXNR1 magic".into()));
    }
    let n = r.u64()? as usize;
    let text = std::str::from_utf8(r.take(n)?).map_err(|_| Error::Checkpoint("header is not UTF-8".into()))?;
    let header: Header = toml::from_str(text).map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    if header.format_version != HEADER_VERSION {
        return Err(Error::Checkpoint(format!("unsupported header version {}", header.format_version)));
    }
    let mut model = Model::new(header.layers, &header.input_shape).map_err(|e| Error::Checkpoint(e.to_string()))?;
    for layer in model.layers_mut() {
        match layer {
            Layer::Dense { space, weights, .. } => decode_weights(&mut r, weights.data_mut(), space)?,
            Layer::Conv2d { space, kernels, .. } => decode_weights(&mut r, kernels.data_mut(), space)?,
            Layer::BatchNorm { bn, .. } => {
                let f = bn.features();
                for v in bn.gamma.iter_mut().chain(&mut bn.beta).chain(&mut bn.running_mean).chain(&mut bn.running_var) {
                    *v = r.f64()?;
                }
                if bn.running_var.iter().any(|&v| !(v >= 0.0)) {
                    return Err(Error::Checkpoint(format!("negative running variance in a {f}-feature batch norm")));
                }
            }
            _ => {}
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(model)
}

pub fn save(model: &Model, path: &Path) -> Result<()> {
    super::metrics::write_atomic(path, &encode(model)?)
}

pub fn load(path: &Path) -> Result<Model> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
