use super::tensor::Tensor;
use crate::discrete::{quantize_multilevel, surrogate_multilevel, DiscreteSpace, SurrogateSpec};
use crate::error::{Error, Result};

/// Elementwise quantization onto `space` with window `spec.r`.
pub fn quantact_forward(x: &Tensor, space: &DiscreteSpace, spec: &SurrogateSpec) -> Tensor {
    let data = x.data().iter().map(|&v| quantize_multilevel(v, space, spec.r)).collect();
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}

/// `grad_in = grad_out · surrogate(x)` using the pre-activation saved by the
/// forward pass.
pub fn quantact_backward(grad_out: &Tensor, saved_x: &Tensor, space: &DiscreteSpace, spec: &SurrogateSpec) -> Result<Tensor> {
    if grad_out.shape() != saved_x.shape() {
        return Err(Error::dim(format!(
            "activation gradient {:?} does not match saved input {:?}",
            grad_out.shape(),
            saved_x.shape()
        )));
    }
    let data = grad_out
        .data()
        .iter()
        .zip(saved_x.data())
        .map(|(&g, &x)| if g == 0.0 { 0.0 } else { g * surrogate_multilevel(x, space, spec) })
        .collect();
    Tensor::new(grad_out.shape().to_vec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::quantize_ternary;

    #[test]
    fn delegates_to_quantizer() {
        let s = DiscreteSpace::ternary();
        let spec = SurrogateSpec::rectangular(0.5, 0.5);
        let x = Tensor::new(vec![1, 5], vec![-2.0, -0.5, 0.0, 0.51, 3.0]).unwrap();
        let y = quantact_forward(&x, &s, &spec);
        let want: Vec<f64> = x.data().iter().map(|&v| quantize_ternary(v, 0.5) as f64).collect();
        assert_eq!(y.data(), want.as_slice());
    }

    #[test]
    fn zero_grad_and_dead_zone() {
        let s = DiscreteSpace::ternary();
        let spec = SurrogateSpec::rectangular(0.1, 0.5);
        let x = Tensor::new(vec![1, 3], vec![0.0, 0.55, 5.0]).unwrap();
        let g0 = quantact_backward(&Tensor::zeros(vec![1, 3]), &x, &s, &spec).unwrap();
        assert!(g0.data().iter().all(|&v| v == 0.0));
        let g = quantact_backward(&Tensor::new(vec![1, 3], vec![3.0, 1.0, 7.0]).unwrap(), &x, &s, &spec).unwrap();
        assert_eq!(g.data()[0], 0.0);
        assert_eq!(g.data()[2], 0.0);
        assert!((g.data()[1] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch() {
        let s = DiscreteSpace::ternary();
        let spec = SurrogateSpec::rectangular(0.5, 0.5);
        assert!(quantact_backward(&Tensor::zeros(vec![1, 2]), &Tensor::zeros(vec![1, 3]), &s, &spec).is_err());
    }
}
