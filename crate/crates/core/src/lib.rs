//! Training and inference for deep networks whose weights and activations
//! live on the discrete grids `Z_N = { H·(n/2^(N-1) - 1) : n = 0..=2^N }`.
//!
//! The crate is split along the lines of the pipeline:
//!
//! - [`discrete`]: grids, ternary and multi-level quantizers, surrogate
//!   derivatives used in the backward pass.
//! - [`dst`]: the discrete state transition update. Adam turns a gradient into
//!   a real increment, which is then projected stochastically onto the weight
//!   grid. No full-precision copy of a weight is ever kept.
//! - [`net`]: a small layer-sequential reverse-mode engine (dense, conv, pool,
//!   batch norm, quantized activation, squared-hinge SVM head).
//! - [`gxnor`]: bit-plane packed ternary arithmetic (gated XNOR + popcount)
//!   and the operation-count model for the five reference architectures.
//! - [`data`]: MNIST IDX loading, synthetic blobs, mini-batching.
//! - [`experiment`]: run configuration, metrics files, `GXNR1` checkpoints,
//!   training/sweep/cost-model drivers used by the `gxnor` binary.

pub mod data;
pub mod discrete;
pub mod dst;
pub mod error;
pub mod experiment;
pub mod gxnor;
pub mod net;

pub use data::{Batch, Dataset};
pub use discrete::{DiscreteSpace, SurrogateShape, SurrogateSpec};
pub use dst::{DstHyper, DstState, TransitionEvent};
pub use error::{Error, Result};
pub use gxnor::{Architecture, OpReport, PackedTernary};
pub use net::{LayerSpec, Model, Tensor};
