//! Bit-plane packed ternary arithmetic and operation accounting.
//!
//! A ternary vector is stored as two planes of 64-bit little-endian words:
//! `mask` (lane is non-zero) and `sign` (lane is `+1`), with lane `i` at bit
//! `i % 64` of word `i / 64`. A dot product touches only lanes where both
//! masks are set; those lanes compare signs with XNOR and a popcount turns the
//! agreements into the sum.

mod cost;
mod packed;
mod packed_net;

pub use cost::{count_ops, Architecture, CostEstimate, OpCount, StateDistribution};
pub use packed::{gated_xnor_dot, pack, unpack, OpReport, PackedTernary};
pub use packed_net::{packed_dense_forward, PackedInference, PackedMatrix, PackedOutput};
