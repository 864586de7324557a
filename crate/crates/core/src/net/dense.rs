use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

/// `out[b, i] = Σ_j W[i, j] · x[b, j]` with `W` stored `[outputs, inputs]`.
/// Any trailing input dimensions are flattened. No bias term.
pub fn dense_forward(input: &Tensor, weights: &Tensor) -> Result<Tensor> {
    let (outputs, inputs) = weight_dims(weights)?;
    if input.row_len() != inputs {
        return Err(Error::dim(format!(
            "dense layer expects {inputs} inputs per sample, got {}",
            input.row_len()
        )));
    }
    let batch = input.rows();
    let mut out = vec![0.0; batch * outputs];
    gemm(batch, inputs, outputs, input.data(), false, weights.data(), true, &mut out, 0.0);
    Tensor::new(vec![batch, outputs], out)
}

/// Returns `(grad_input, grad_weights)`; `grad_input` has the shape of `input`.
pub fn dense_backward(input: &Tensor, weights: &Tensor, grad_out: &Tensor) -> Result<(Tensor, Tensor)> {
    let (outputs, inputs) = weight_dims(weights)?;
    let batch = input.rows();
    if grad_out.shape() != [batch, outputs] {
        return Err(Error::dim(format!(
            "dense gradient shape {:?} does not match [{batch}, {outputs}]",
            grad_out.shape()
        )));
    }
    let mut gin = vec![0.0; batch * inputs];
    gemm(batch, outputs, inputs, grad_out.data(), false, weights.data(), false, &mut gin, 0.0);
    let mut gw = vec![0.0; outputs * inputs];
    gemm(outputs, batch, inputs, grad_out.data(), true, input.data(), false, &mut gw, 0.0);
    Ok((
        Tensor::new(input.shape().to_vec(), gin)?,
        Tensor::new(vec![outputs, inputs], gw)?,
    ))
}

fn weight_dims(weights: &Tensor) -> Result<(usize, usize)> {
    match weights.shape() {
        [o, i] => Ok((*o, *i)),
        s => Err(Error::dim(format!("dense weights must be 2-D, got {s:?}"))),
    }
}
