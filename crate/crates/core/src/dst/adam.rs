use serde::{Deserialize, Serialize};

use super::{DstHyper, DstState};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

/// Bias-corrected Adam step for one scalar. `t` is the 1-based step count
/// after this update. Returns the increment `-lr·m̂/(√v̂ + eps)`.
#[inline]
pub fn adam_increment(grad: f64, m1: &mut f64, m2: &mut f64, t: u64, cfg: &AdamConfig) -> f64 {
    *m1 = cfg.beta1 * *m1 + (1.0 - cfg.beta1) * grad;
    *m2 = cfg.beta2 * *m2 + (1.0 - cfg.beta2) * grad * grad;
    let ti = t.min(i32::MAX as u64) as i32;
    let m_hat = *m1 / (1.0 - cfg.beta1.powi(ti));
    let v_hat = *m2 / (1.0 - cfg.beta2.powi(ti));
    -cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps)
}

/// Advance the Adam accumulators of `state` and return the real increment
/// that the projection step consumes.
pub fn adam_delta(grad: f64, state: &mut DstState, hyper: &DstHyper) -> f64 {
    state.step += 1;
    adam_increment(grad, &mut state.m1, &mut state.m2, state.step, &hyper.adam())
}

/// Per-epoch decay factor `α = (lr_fin/lr_start)^(1/epochs)`.
pub fn lr_schedule(lr_start: f64, lr_fin: f64, epochs: u32) -> Result<f64> {
    if !(lr_start > 0.0 && lr_fin > 0.0) || epochs == 0 {
        return Err(Error::Config(format!(
            "learning-rate schedule needs positive rates and epochs, got {lr_start} -> {lr_fin} over {epochs}"
        )));
    }
    Ok((lr_fin / lr_start).powf(1.0 / epochs as f64))
}

/// Plain Adam over a flat slice of full-precision parameters (batch-norm
/// scale and shift are the only such parameters in a model).
#[derive(Clone, Debug, Default)]
pub struct Adam {
    m1: Vec<f64>,
    m2: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(len: usize) -> Self {
        Self {
            m1: vec![0.0; len],
            m2: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], cfg: &AdamConfig) {
        assert_eq!(params.len(), grads.len());
        if self.m1.len() != params.len() {
            *self = Self::new(params.len());
        }
        self.t += 1;
        for ((p, g), (m1, m2)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m1.iter_mut().zip(self.m2.iter_mut()))
        {
            *p += adam_increment(*g, m1, m2, self.t, cfg);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::DiscreteSpace;

    #[test]
    fn zero_grad_gives_zero_step() {
        let hyper = DstHyper::new(DiscreteSpace::ternary(), 3.0, 0.01);
        let mut s = DstState::new(0.0);
        assert_eq!(adam_delta(0.0, &mut s, &hyper), 0.0);
    }

    #[test]
    fn degenerate_adam_is_sign_sgd() {
        let mut hyper = DstHyper::new(DiscreteSpace::ternary(), 3.0, 0.01);
        hyper.beta1 = 0.0;
        hyper.beta2 = 0.0;
        let mut s = DstState::new(0.0);
        let g = 0.37;
        let dw = adam_delta(g, &mut s, &hyper);
        assert!((dw - (-0.01 * g / (g + hyper.eps))).abs() < 1e-15);
        assert!((dw + 0.01).abs() < 1e-9);
    }

    #[test]
    fn matches_hand_stepped_oracle() {
        // Five steps of constant gradient 2.0, lr 0.1, b1 0.9, b2 0.999, eps 1e-8,
        // unrolled by hand: m_t = 2(1 - 0.9^t), v_t = 4(1 - 0.999^t), so both
        // bias-corrected moments are exactly the gradient and its square.
        let hyper = DstHyper {
            m: 3.0,
            lr: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            space: DiscreteSpace::ternary(),
        };
        let mut s = DstState::new(0.0);
        let mut m = 0.0f64;
        let mut v = 0.0f64;
        for t in 1..=5 {
            m = 0.9 * m + 0.1 * 2.0;
            v = 0.999 * v + 0.001 * 4.0;
            let expect = -0.1 * (m / (1.0 - 0.9f64.powi(t))) / ((v / (1.0 - 0.999f64.powi(t))).sqrt() + 1e-8);
            let dw = adam_delta(2.0, &mut s, &hyper);
            assert!((dw - expect).abs() < 1e-14);
            assert!((dw + 0.1).abs() < 1e-8, "magnitude approaches lr");
        }
        assert_eq!(s.step, 5);
        assert!(s.m2 >= 0.0);
    }

    #[test]
    fn schedule_examples() {
        assert!((lr_schedule(1e-2, 1e-4, 2).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(lr_schedule(3e-3, 3e-3, 7).unwrap(), 1.0);
        let alpha = lr_schedule(1e-3, 1e-5, 20).unwrap();
        assert!((alpha - 10f64.powf(-0.1)).abs() < 1e-15);
        let mut lr = 1e-3;
        for _ in 0..20 {
            lr *= alpha;
        }
        assert!(((lr - 1e-5) / 1e-5).abs() < 1e-9);
        assert!(lr_schedule(1e-3, 1e-2, 10).unwrap() > 1.0);
        assert!(lr_schedule(0.0, 1e-2, 10).is_err());
        assert!(lr_schedule(1e-3, 1e-2, 0).is_err());
    }

    #[test]
    fn adam_vector_step() {
        let cfg = AdamConfig {
            lr: 0.5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        };
        let mut adam = Adam::new(2);
        let mut p = vec![1.0, -1.0];
        adam.step(&mut p, &[1.0, -1.0], &cfg);
        assert!((p[0] - 0.5).abs() < 1e-6);
        assert!((p[1] + 0.5).abs() < 1e-6);
    }
}
