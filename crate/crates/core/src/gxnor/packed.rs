use serde::{Deserialize, Serialize};

use super::cost::Architecture;
use crate::error::{Error, Result};

const WORD: usize = 64;

/// Ternary vector as `mask`/`sign` bit planes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackedTernary {
    len: usize,
    mask: Vec<u64>,
    sign: Vec<u64>,
}

impl PackedTernary {
    /// Build from raw planes; `sign` bits outside `mask` and bits past `len`
    /// are rejected.
    pub fn from_planes(len: usize, mask: Vec<u64>, sign: Vec<u64>) -> Result<Self> {
        let words = len.div_ceil(WORD);
        if mask.len() != words || sign.len() != words {
            return Err(Error::Input(format!("{len} lanes need {words} words per plane")));
        }
        if mask.iter().zip(&sign).any(|(m, s)| s & !m != 0) {
            return Err(Error::Input("sign plane has bits outside the mask".into()));
        }
        if len % WORD != 0 {
            if let Some(last) = mask.last() {
                if last >> (len % WORD) != 0 {
                    return Err(Error::Input("mask has bits beyond the vector length".into()));
                }
            }
        }
        Ok(Self { len, mask, sign })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn mask(&self) -> &[u64] {
        &self.mask
    }

    pub fn sign(&self) -> &[u64] {
        &self.sign
    }

    pub fn words(&self) -> usize {
        self.mask.len()
    }

    pub fn nonzeros(&self) -> u64 {
        self.mask.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Value of lane `i`.
    pub fn get(&self, i: usize) -> i8 {
        let (w, b) = (i / WORD, i % WORD);
        if self.mask[w] >> b & 1 == 0 {
            0
        } else if self.sign[w] >> b & 1 == 1 {
            1
        } else {
            -1
        }
    }
}

/// Pack ternary values. Anything outside `{-1, 0, 1}` is rejected.
pub fn pack<T: Copy + Into<f64>>(values: &[T]) -> Result<PackedTernary> {
    let words = values.len().div_ceil(WORD);
    let mut mask = vec![0u64; words];
    let mut sign = vec![0u64; words];
    for (i, &v) in values.iter().enumerate() {
        let bit = 1u64 << (i % WORD);
        let v: f64 = v.into();
        if v == 1.0 {
            mask[i / WORD] |= bit;
            sign[i / WORD] |= bit;
        } else if v == -1.0 {
            mask[i / WORD] |= bit;
        } else if v != 0.0 {
            return Err(Error::Input(format!("value {v} at lane {i} is not ternary")));
        }
    }
    Ok(PackedTernary {
        len: values.len(),
        mask,
        sign,
    })
}

pub fn unpack(p: &PackedTernary) -> Vec<i8> {
    (0..p.len).map(|i| p.get(i)).collect()
}

/// Measured operation counts of a packed computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpReport {
    pub architecture: Architecture,
    pub multiplications: u64,
    pub accumulations: u64,
    pub xnor_ops: u64,
    pub bitcount_ops: u64,
    /// Lanes offered to the compute units.
    pub lanes: u64,
    /// Lanes whose gate stayed closed.
    pub resting_lanes: u64,
}

impl OpReport {
    pub fn empty(architecture: Architecture) -> Self {
        Self {
            architecture,
            multiplications: 0,
            accumulations: 0,
            xnor_ops: 0,
            bitcount_ops: 0,
            lanes: 0,
            resting_lanes: 0,
        }
    }

    pub fn resting_fraction(&self) -> f64 {
        if self.lanes == 0 {
            0.0
        } else {
            self.resting_lanes as f64 / self.lanes as f64
        }
    }

    pub fn merge(&mut self, other: &OpReport) {
        self.multiplications += other.multiplications;
        self.accumulations += other.accumulations;
        self.xnor_ops += other.xnor_ops;
        self.bitcount_ops += other.bitcount_ops;
        self.lanes += other.lanes;
        self.resting_lanes += other.resting_lanes;
    }
}

/// `Σ a_i·b_i` via gate/XNOR/popcount.
///
/// Only lanes where both operands are non-zero do work: `xnor_ops` counts
/// them, and a word whose gate is entirely closed skips its bitcount.
pub fn gated_xnor_dot(a: &PackedTernary, b: &PackedTernary) -> Result<(i64, OpReport)> {
    if a.len != b.len {
        return Err(Error::dim(format!("packed lengths differ: {} vs {}", a.len, b.len)));
    }
    let mut sum = 0i64;
    let mut active = 0u64;
    let mut words = 0u64;
    for i in 0..a.mask.len() {
        let gate = a.mask[i] & b.mask[i];
        if gate == 0 {
            continue;
        }
        let agree = !(a.sign[i] ^ b.sign[i]) & gate;
        let g = gate.count_ones() as i64;
        sum += 2 * agree.count_ones() as i64 - g;
        active += g as u64;
        words += 1;
    }
    Ok((
        sum,
        OpReport {
            architecture: Architecture::Gxnor,
            multiplications: 0,
            accumulations: 0,
            xnor_ops: active,
            bitcount_ops: words,
            lanes: a.len as u64,
            resting_lanes: a.len as u64 - active,
        },
    ))
}

#[cfg(test)]
fn dot_unpacked(a: &[i8], b: &[i8]) -> i64 {
    a.iter().zip(b).map(|(&x, &y)| x as i64 * y as i64).sum()
}
