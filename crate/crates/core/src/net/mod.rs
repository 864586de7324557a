//! Layer-sequential reverse-mode network with grid-valued weights.

mod batchnorm;
mod conv;
mod dense;
mod loss;
mod model;
mod quantact;
mod tensor;

pub use batchnorm::{BatchNorm, BatchNormCache};
pub use conv::{conv2d_backward, conv2d_forward, maxpool2d_backward, maxpool2d_forward, ConvGeometry, PoolGeometry};
pub(crate) use conv::im2col;
pub use dense::{dense_backward, dense_forward};
pub use loss::{svm_hinge_loss, LossGrad};
pub use model::{
    ActivationStats, EvalReport, Layer, LayerSpec, Model, ModelHyper, Optimizer, StepMetrics,
};
pub use quantact::{quantact_backward, quantact_forward};
pub use tensor::Tensor;
