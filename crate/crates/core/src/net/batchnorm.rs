use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Batch normalization over the feature axis (dense input `[B, F]`) or the
/// channel axis (conv input `[B, C, H, W]`).
///
/// `gamma`/`beta` and the running statistics are the only full-precision
/// learnables in a model.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub eps: f64,
    pub momentum: f64,
}

/// Values saved by the training forward pass.
#[derive(Clone, Debug)]
pub struct BatchNormCache {
    x_hat: Vec<f64>,
    inv_std: Vec<f64>,
    shape: Vec<usize>,
}

impl BatchNorm {
    pub fn new(features: usize, eps: f64, momentum: f64) -> Self {
        Self {
            gamma: vec![1.0; features],
            beta: vec![0.0; features],
            running_mean: vec![0.0; features],
            running_var: vec![1.0; features],
            eps,
            momentum,
        }
    }

    pub fn features(&self) -> usize {
        self.gamma.len()
    }

    /// `(batch, features, spatial)` view of `x`.
    fn layout(&self, x: &Tensor) -> Result<(usize, usize, usize)> {
        let (b, f, s) = match x.shape() {
            [b, f] => (*b, *f, 1),
            [b, c, h, w] => (*b, *c, h * w),
            s => return Err(Error::dim(format!("batch norm input must be 2-D or 4-D, got {s:?}"))),
        };
        if f != self.features() {
            return Err(Error::dim(format!("batch norm has {} features, input has {f}", self.features())));
        }
        Ok((b, f, s))
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Result<(Tensor, BatchNormCache)> {
        let (b, f, s) = self.layout(x)?;
        if b < 2 {
            return Err(Error::Input("batch norm needs at least 2 samples in training mode".into()));
        }
        let n = (b * s) as f64;
        let xd = x.data();
        let mut mean = vec![0.0; f];
        let mut var = vec![0.0; f];
        for bi in 0..b {
            for fi in 0..f {
                let base = (bi * f + fi) * s;
                mean[fi] += xd[base..base + s].iter().sum::<f64>();
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        for bi in 0..b {
            for fi in 0..f {
                let base = (bi * f + fi) * s;
                var[fi] += xd[base..base + s].iter().map(|v| (v - mean[fi]).powi(2)).sum::<f64>();
            }
        }
        var.iter_mut().for_each(|v| *v /= n);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();

        let mut x_hat = vec![0.0; xd.len()];
        let mut out = vec![0.0; xd.len()];
        for bi in 0..b {
            for fi in 0..f {
                let base = (bi * f + fi) * s;
                for k in base..base + s {
                    let xh = (xd[k] - mean[fi]) * inv_std[fi];
                    x_hat[k] = xh;
                    out[k] = self.gamma[fi] * xh + self.beta[fi];
                }
            }
        }
        let unbias = n / (n - 1.0);
        for fi in 0..f {
            self.running_mean[fi] = (1.0 - self.momentum) * self.running_mean[fi] + self.momentum * mean[fi];
            self.running_var[fi] = (1.0 - self.momentum) * self.running_var[fi] + self.momentum * var[fi] * unbias;
        }
        Ok((
            Tensor::new(x.shape().to_vec(), out)?,
            BatchNormCache {
                x_hat,
                inv_std,
                shape: x.shape().to_vec(),
            },
        ))
    }

    /// Inference with running statistics.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let (b, f, s) = self.layout(x)?;
        let xd = x.data();
        let mut out = vec![0.0; xd.len()];
        for fi in 0..f {
            let inv = 1.0 / (self.running_var[fi] + self.eps).sqrt();
            let (g, be, m) = (self.gamma[fi], self.beta[fi], self.running_mean[fi]);
            for bi in 0..b {
                let base = (bi * f + fi) * s;
                for k in base..base + s {
                    out[k] = g * ((xd[k] - m) * inv) + be;
                }
            }
        }
        Tensor::new(x.shape().to_vec(), out)
    }

    /// Returns `(grad_input, grad_gamma, grad_beta)`.
    pub fn backward(&self, cache: &BatchNormCache, grad_out: &Tensor) -> Result<(Tensor, Vec<f64>, Vec<f64>)> {
        if grad_out.shape() != cache.shape.as_slice() {
            return Err(Error::dim("batch norm gradient shape mismatch".to_string()));
        }
        let (b, f, s) = self.layout(grad_out)?;
        let n = (b * s) as f64;
        let dy = grad_out.data();
        let mut dgamma = vec![0.0; f];
        let mut dbeta = vec![0.0; f];
        for bi in 0..b {
            for fi in 0..f {
                let base = (bi * f + fi) * s;
                for k in base..base + s {
                    dgamma[fi] += dy[k] * cache.x_hat[k];
                    dbeta[fi] += dy[k];
                }
            }
        }
        let mut dx = vec![0.0; dy.len()];
        for bi in 0..b {
            for fi in 0..f {
                let scale = self.gamma[fi] * cache.inv_std[fi] / n;
                let base = (bi * f + fi) * s;
                for k in base..base + s {
                    dx[k] = scale * (n * dy[k] - dbeta[fi] - cache.x_hat[k] * dgamma[fi]);
                }
            }
        }
        Ok((Tensor::new(cache.shape.clone(), dx)?, dgamma, dbeta))
    }
}
