//! 2-D cross-correlation and max pooling on `[batch, channels, height, width]`.

use serde::{Deserialize, Serialize};

use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (ph, pw) = (h + 2 * self.padding, w + 2 * self.padding);
        if self.stride == 0 || self.kernel == 0 || ph < self.kernel || pw < self.kernel {
            return Err(Error::dim(format!(
                "{}x{} kernel (stride {}) does not fit a padded {ph}x{pw} input",
                self.kernel, self.kernel, self.stride
            )));
        }
        Ok(((ph - self.kernel) / self.stride + 1, (pw - self.kernel) / self.stride + 1))
    }

    pub fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }
}

fn chw(t: &Tensor) -> Result<(usize, usize, usize, usize)> {
    match t.shape() {
        [b, c, h, w] => Ok((*b, *c, *h, *w)),
        s => Err(Error::dim(format!("expected [batch, channels, height, width], got {s:?}"))),
    }
}

/// Unfold one sample `[C, H, W]` into `[C·k·k, OH·OW]` patch columns.
pub(crate) fn im2col(img: &[f64], h: usize, w: usize, g: &ConvGeometry, oh: usize, ow: usize, cols: &mut [f64]) {
    let k = g.kernel;
    let p = oh * ow;
    for c in 0..g.in_channels {
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let dst = &mut cols[row * p..(row + 1) * p];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                    for ox in 0..ow {
                        let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                        dst[oy * ow + ox] = if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                            img[(c * h + iy as usize) * w + ix as usize]
                        } else {
                            0.0
                        };
                    }
                }
            }
        }
    }
}

fn col2im(cols: &[f64], h: usize, w: usize, g: &ConvGeometry, oh: usize, ow: usize, img: &mut [f64]) {
    let k = g.kernel;
    let p = oh * ow;
    for c in 0..g.in_channels {
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let src = &cols[row * p..(row + 1) * p];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                    if iy < 0 || iy as usize >= h {
                        continue;
                    }
                    for ox in 0..ow {
                        let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                        if ix >= 0 && (ix as usize) < w {
                            img[(c * h + iy as usize) * w + ix as usize] += src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Kernels are `[out_channels, in_channels, k, k]`.
pub fn conv2d_forward(input: &Tensor, kernels: &Tensor, g: &ConvGeometry) -> Result<Tensor> {
    let (b, c, h, w) = chw(input)?;
    check_kernels(kernels, g, c)?;
    let (oh, ow) = g.output_hw(h, w)?;
    let p = oh * ow;
    let kk = g.patch_len();
    let mut out = vec![0.0; b * g.out_channels * p];
    let mut cols = vec![0.0; kk * p];
    for (s, o) in out.chunks_mut(g.out_channels * p).enumerate() {
        im2col(input.row(s), h, w, g, oh, ow, &mut cols);
        gemm(g.out_channels, kk, p, kernels.data(), false, &cols, false, o, 0.0);
    }
    Tensor::new(vec![b, g.out_channels, oh, ow], out)
}

/// Returns `(grad_input, grad_kernels)`. Per-sample kernel gradients are
/// summed in sample order.
pub fn conv2d_backward(input: &Tensor, kernels: &Tensor, g: &ConvGeometry, grad_out: &Tensor) -> Result<(Tensor, Tensor)> {
    let (b, c, h, w) = chw(input)?;
    check_kernels(kernels, g, c)?;
    let (oh, ow) = g.output_hw(h, w)?;
    if grad_out.shape() != [b, g.out_channels, oh, ow] {
        return Err(Error::dim(format!("conv gradient shape {:?} mismatch", grad_out.shape())));
    }
    let p = oh * ow;
    let kk = g.patch_len();
    let mut gk = vec![0.0; g.out_channels * kk];
    let mut gin = vec![0.0; input.len()];
    let mut cols = vec![0.0; kk * p];
    let mut dcols = vec![0.0; kk * p];
    for s in 0..b {
        im2col(input.row(s), h, w, g, oh, ow, &mut cols);
        let go = grad_out.row(s);
        gemm(g.out_channels, p, kk, go, false, &cols, true, &mut gk, 1.0);
        gemm(kk, g.out_channels, p, kernels.data(), true, go, false, &mut dcols, 0.0);
        col2im(&dcols, h, w, g, oh, ow, &mut gin[s * c * h * w..(s + 1) * c * h * w]);
    }
    Ok((
        Tensor::new(input.shape().to_vec(), gin)?,
        Tensor::new(kernels.shape().to_vec(), gk)?,
    ))
}

fn check_kernels(kernels: &Tensor, g: &ConvGeometry, c: usize) -> Result<()> {
    if c != g.in_channels {
        return Err(Error::dim(format!("conv expects {} input channels, got {c}", g.in_channels)));
    }
    if kernels.shape() != [g.out_channels, g.in_channels, g.kernel, g.kernel] {
        return Err(Error::dim(format!("kernel tensor shape {:?} mismatch", kernels.shape())));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolGeometry {
    pub window: usize,
    pub stride: usize,
}

impl PoolGeometry {
    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        if self.window == 0 || self.stride == 0 || h < self.window || w < self.window {
            return Err(Error::dim(format!(
                "pool window {} (stride {}) does not fit {h}x{w}",
                self.window, self.stride
            )));
        }
        Ok(((h - self.window) / self.stride + 1, (w - self.window) / self.stride + 1))
    }
}

/// Max pooling. The returned indices address the flat input buffer; ties
/// resolve to the first element in row-major window order.
pub fn maxpool2d_forward(input: &Tensor, g: &PoolGeometry) -> Result<(Tensor, Vec<usize>)> {
    let (b, c, h, w) = chw(input)?;
    let (oh, ow) = g.output_hw(h, w)?;
    let x = input.data();
    let mut out = Vec::with_capacity(b * c * oh * ow);
    let mut arg = Vec::with_capacity(out.capacity());
    for plane in 0..b * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + oy * g.stride * w + ox * g.stride;
                for ky in 0..g.window {
                    for kx in 0..g.window {
                        let i = base + (oy * g.stride + ky) * w + ox * g.stride + kx;
                        if x[i] > x[best] {
                            best = i;
                        }
                    }
                }
                out.push(x[best]);
                arg.push(best);
            }
        }
    }
    Ok((Tensor::new(vec![b, c, oh, ow], out)?, arg))
}

pub fn maxpool2d_backward(input_shape: &[usize], argmax: &[usize], grad_out: &Tensor) -> Result<Tensor> {
    if argmax.len() != grad_out.len() {
        return Err(Error::dim("pool gradient does not match stored argmax".to_string()));
    }
    let mut g = Tensor::zeros(input_shape.to_vec());
    let gd = g.data_mut();
    for (&i, &v) in argmax.iter().zip(grad_out.data()) {
        gd[i] += v;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn conv_oracle(x: &[f64], c: usize, h: usize, w: usize, k: &[f64], o: usize, ks: usize, stride: usize, pad: usize) -> Vec<f64> {
        let oh = (h + 2 * pad - ks) / stride + 1;
        let ow = (w + 2 * pad - ks) / stride + 1;
        let mut out = vec![0.0; o * oh * ow];
        for oc in 0..o {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0;
                    for ic in 0..c {
                        for ky in 0..ks {
                            for kx in 0..ks {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy as usize >= h || ix as usize >= w {
                                    continue;
                                }
                                acc += k[((oc * c + ic) * ks + ky) * ks + kx] * x[(ic * h + iy as usize) * w + ix as usize];
                            }
                        }
                    }
                    out[(oc * oh + oy) * ow + ox] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn unit_kernel_is_identity() {
        let g = ConvGeometry { in_channels: 1, out_channels: 1, kernel: 1, stride: 1, padding: 0 };
        let x = Tensor::new(vec![1, 1, 2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.0, 9.0]).unwrap();
        let k = Tensor::new(vec![1, 1, 1, 1], vec![1.0]).unwrap();
        assert_eq!(conv2d_forward(&x, &k, &g).unwrap().data(), x.data());
        let z = Tensor::zeros(vec![1, 1, 1, 1]);
        assert!(conv2d_forward(&x, &z, &g).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ternary_3x3_on_4x4() {
        let g = ConvGeometry { in_channels: 1, out_channels: 1, kernel: 3, stride: 1, padding: 0 };
        let x: Vec<f64> = (0..16).map(|i| (i as f64 * 0.7).sin()).collect();
        let k = vec![1.0, 0.0, -1.0, 0.0, 1.0, 1.0, -1.0, -1.0, 0.0];
        let out = conv2d_forward(
            &Tensor::new(vec![1, 1, 4, 4], x.clone()).unwrap(),
            &Tensor::new(vec![1, 1, 3, 3], k.clone()).unwrap(),
            &g,
        )
        .unwrap();
        assert_eq!(out.shape(), &[1, 1, 2, 2]);
        let want = conv_oracle(&x, 1, 4, 4, &k, 1, 3, 1, 0);
        for (a, b) in out.data().iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn random_conv_with_padding_and_stride() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for &(c, o, h, w, ks, stride, pad) in &[(2, 3, 7, 6, 3, 2, 1), (3, 2, 5, 5, 5, 1, 2), (1, 4, 9, 8, 2, 3, 0)] {
            let g = ConvGeometry { in_channels: c, out_channels: o, kernel: ks, stride, padding: pad };
            let b = 2;
            let x: Vec<f64> = (0..b * c * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
            let k: Vec<f64> = (0..o * c * ks * ks).map(|_| rng.random_range(-1..=1) as f64).collect();
            let out = conv2d_forward(
                &Tensor::new(vec![b, c, h, w], x.clone()).unwrap(),
                &Tensor::new(vec![o, c, ks, ks], k.clone()).unwrap(),
                &g,
            )
            .unwrap();
            for s in 0..b {
                let want = conv_oracle(&x[s * c * h * w..(s + 1) * c * h * w], c, h, w, &k, o, ks, stride, pad);
                for (a, b) in out.row(s).iter().zip(&want) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn conv_dimension_errors() {
        let g = ConvGeometry { in_channels: 1, out_channels: 1, kernel: 5, stride: 1, padding: 0 };
        let x = Tensor::zeros(vec![1, 1, 3, 3]);
        let k = Tensor::zeros(vec![1, 1, 5, 5]);
        assert!(conv2d_forward(&x, &k, &g).is_err());
        let x = Tensor::zeros(vec![1, 2, 8, 8]);
        assert!(conv2d_forward(&x, &k, &g).is_err());
    }

    #[test]
    fn pool_constant_and_peak() {
        let g = PoolGeometry { window: 2, stride: 2 };
        let x = Tensor::new(vec![1, 1, 4, 4], vec![3.0; 16]).unwrap();
        let (y, arg) = maxpool2d_forward(&x, &g).unwrap();
        assert!(y.data().iter().all(|&v| v == 3.0));
        // ties go to the first index in each window
        assert_eq!(arg, vec![0, 2, 8, 10]);

        let mut d = vec![0.0; 16];
        d[5] = 9.0;
        let x = Tensor::new(vec![1, 1, 4, 4], d).unwrap();
        let (y, _) = maxpool2d_forward(&x, &g).unwrap();
        assert_eq!(y.data()[0], 9.0);
    }

    #[test]
    fn pool_random_vs_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = PoolGeometry { window: 2, stride: 2 };
        let x: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (y, _) = maxpool2d_forward(&Tensor::new(vec![1, 1, 4, 4], x.clone()).unwrap(), &g).unwrap();
        for oy in 0..2 {
            for ox in 0..2 {
                let mut m = f64::NEG_INFINITY;
                for ky in 0..2 {
                    for kx in 0..2 {
                        m = m.max(x[(oy * 2 + ky) * 4 + ox * 2 + kx]);
                    }
                }
                assert_eq!(y.data()[oy * 2 + ox], m);
            }
        }
    }
}
