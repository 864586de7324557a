//! Discrete state spaces and the activation quantizers defined on them.

mod quantize;
mod space;
mod surrogate;

pub use quantize::{quantize_multilevel, quantize_ternary, sign};
pub use space::{DiscreteSpace, MAX_STATE_PARAM};
pub use surrogate::{
    jump_points, surrogate, surrogate_multilevel, surrogate_rect, surrogate_tri, SurrogateShape,
    SurrogateSpec,
};
