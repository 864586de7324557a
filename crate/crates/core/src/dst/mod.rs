//! Discrete state transition (DST) weight update.
//!
//! A weight is always a state of its [`DiscreteSpace`]. Each update takes the
//! real increment proposed by Adam, clips it so the weight cannot leave
//! `[-H, H]`, splits it into whole grid steps `κ` plus a remainder `ν`, takes
//! the `κ` steps and then one extra step in the direction of the increment
//! with probability `τ(ν) = tanh(m·|ν|/dz)`.

mod adam;
mod layer;
mod rng;

pub use adam::{adam_delta, adam_increment, lr_schedule, Adam, AdamConfig};
pub use layer::{DstLayer, LayerStepStats};
pub use rng::transition_rng;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::discrete::{sign, DiscreteSpace};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DstHyper {
    /// Nonlinear transition factor `m`.
    pub m: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub space: DiscreteSpace,
}

impl DstHyper {
    pub fn new(space: DiscreteSpace, m: f64, lr: f64) -> Self {
        Self {
            m,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            space,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

/// Per-weight optimizer state: the grid weight and its Adam moments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DstState {
    pub w: f64,
    pub m1: f64,
    pub m2: f64,
    pub step: u64,
}

impl DstState {
    pub fn new(w: f64) -> Self {
        Self {
            w,
            m1: 0.0,
            m2: 0.0,
            step: 0,
        }
    }

    /// One full update: Adam increment, then stochastic projection.
    pub fn update<R: Rng + ?Sized>(&mut self, grad: f64, hyper: &DstHyper, rng: &mut R) -> TransitionEvent {
        let dw = adam_delta(grad, self, hyper);
        let (w, event) = project_transition(self.w, dw, hyper, rng);
        self.w = w;
        event
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransitionEvent {
    pub kappa: i64,
    pub nu: f64,
    pub tau: f64,
    /// Whether the extra `sign(v)·dz` step was taken.
    pub moved_extra: bool,
}

/// Clip `dw` so that `w + dw` stays inside `[-H, H]`.
#[inline]
pub fn boundary_restrict(w: f64, dw: f64, space: &DiscreteSpace) -> f64 {
    let h = space.half_range();
    if dw >= 0.0 {
        (h - w).min(dw)
    } else {
        (-h - w).max(dw)
    }
}

/// Split `v` into `κ·dz + ν` with `κ` rounded toward zero and `ν` carrying the
/// sign of `v`, `|ν| < dz`.
#[inline]
pub fn decompose(v: f64, dz: f64) -> (i64, f64) {
    // fmod is exact, so v - nu is an exact multiple of dz up to the final division.
    let nu = v % dz;
    let kappa = ((v - nu) / dz).round() as i64;
    (kappa, nu)
}

#[inline]
pub fn transition_probability(nu: f64, dz: f64, m: f64) -> f64 {
    (m * nu.abs() / dz).tanh()
}

/// Move grid weight `w` by the real increment `dw`.
///
/// The arithmetic is carried out on grid indices, so the result is always an
/// exact state of `hyper.space`. Exactly one uniform draw is consumed from
/// `rng` per call, whatever the outcome.
pub fn project_transition<R: Rng + ?Sized>(
    w: f64,
    dw: f64,
    hyper: &DstHyper,
    rng: &mut R,
) -> (f64, TransitionEvent) {
    let space = &hyper.space;
    let dz = space.dz();
    let top = space.max_index() as i64;
    debug_assert!(space.contains(w), "weight {w} is not a grid state");
    let idx = space.nearest_index(w) as i64;

    // Distances to the bounds are whole numbers of steps; compute them in
    // index space so the clip is exact for any H.
    let v = if dw >= 0.0 {
        ((top - idx) as f64 * dz).min(dw)
    } else {
        (-(idx as f64) * dz).max(dw)
    };
    let (kappa, nu) = decompose(v, dz);
    let tau = transition_probability(nu, dz, hyper.m);
    let u: f64 = rng.random();
    let moved_extra = u < tau;
    let mut steps = kappa;
    if moved_extra {
        steps += sign(v) as i64;
    }
    let new_idx = (idx + steps).clamp(0, top) as usize;
    (
        space.state(new_idx),
        TransitionEvent {
            kappa,
            nu,
            tau,
            moved_extra,
        },
    )
}
