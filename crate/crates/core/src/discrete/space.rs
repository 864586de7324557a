use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported state parameter. `2^N + 1` states must index comfortably
/// into a `u32` and the grid spacing must stay far above `f64` resolution.
pub const MAX_STATE_PARAM: u32 = 24;

/// The grid `Z_N` scaled to `[-H, H]`.
///
/// States are `H·(n·2^(1-N) - 1)` for `n = 0..=2^N`. `N = 0` gives the binary
/// space `{-H, H}`, `N = 1` the ternary space `{-H, 0, H}`. Adjacent states are
/// `dz = H·2^(1-N)` apart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSpace {
    n: u32,
    h: f64,
}

impl DiscreteSpace {
    pub fn new(n: u32, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Input(format!("half-range H must be positive, got {h}")));
        }
        if n > MAX_STATE_PARAM {
            return Err(Error::Input(format!(
                "state parameter N={n} exceeds the supported maximum {MAX_STATE_PARAM}"
            )));
        }
        Ok(Self { n, h })
    }

    pub fn ternary() -> Self {
        Self { n: 1, h: 1.0 }
    }

    pub fn binary() -> Self {
        Self { n: 0, h: 1.0 }
    }

    pub fn state_param(&self) -> u32 {
        self.n
    }

    pub fn half_range(&self) -> f64 {
        self.h
    }

    pub fn is_ternary(&self) -> bool {
        self.n == 1
    }

    /// Spacing relative to `H = 1`, i.e. `2^(1-N)`. Exact in binary floating point.
    fn unit_step(&self) -> f64 {
        (2.0f64).powi(1 - self.n as i32)
    }

    /// Distance between adjacent states.
    pub fn dz(&self) -> f64 {
        self.h * self.unit_step()
    }

    pub fn state_count(&self) -> usize {
        (1usize << self.n) + 1
    }

    pub fn max_index(&self) -> usize {
        1usize << self.n
    }

    /// The `index`-th state in ascending order.
    pub fn state(&self, index: usize) -> f64 {
        debug_assert!(index <= self.max_index());
        self.h * (index as f64 * self.unit_step() - 1.0)
    }

    pub fn states(&self) -> Vec<f64> {
        (0..self.state_count()).map(|i| self.state(i)).collect()
    }

    /// Index of `value` if it is exactly a grid state.
    pub fn index_of(&self, value: f64) -> Option<usize> {
        if !value.is_finite() {
            return None;
        }
        let t = ((value / self.h + 1.0) / self.unit_step()).round();
        if t < 0.0 || t > self.max_index() as f64 {
            return None;
        }
        let idx = t as usize;
        (self.state(idx) == value).then_some(idx)
    }

    pub fn contains(&self, value: f64) -> bool {
        self.index_of(value).is_some()
    }

    /// Nearest state index, used only where a value is known to be on the grid
    /// up to rounding noise (e.g. decoding external data).
    pub fn nearest_index(&self, value: f64) -> usize {
        let t = ((value / self.h + 1.0) / self.unit_step()).round();
        t.clamp(0.0, self.max_index() as f64) as usize
    }
}
