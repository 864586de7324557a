use rayon::prelude::*;

use super::{adam_increment, project_transition, transition_rng, DstHyper};

const CHUNK: usize = 4096;

/// Adam moments and DST bookkeeping for one weight tensor.
///
/// Only the grid weights themselves live in the model; this holds the
/// per-weight first/second moments and the shared Adam step counter.
#[derive(Clone, Debug)]
pub struct DstLayer {
    layer_index: u64,
    m1: Vec<f64>,
    m2: Vec<f64>,
    step: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LayerStepStats {
    /// Weights whose state changed.
    pub changed: usize,
    /// Extra `±dz` hops taken.
    pub extra_hops: usize,
}

impl DstLayer {
    pub fn new(layer_index: u64, len: usize) -> Self {
        Self {
            layer_index,
            m1: vec![0.0; len],
            m2: vec![0.0; len],
            step: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.m1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m1.is_empty()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Update every weight from its gradient. `iteration` is the global
    /// mini-batch counter used to position the random stream.
    pub fn step(&mut self, weights: &mut [f64], grads: &[f64], hyper: &DstHyper, seed: u64, iteration: u64) -> LayerStepStats {
        assert_eq!(weights.len(), self.len());
        assert_eq!(grads.len(), self.len());
        self.step += 1;
        let t = self.step;
        let adam = hyper.adam();
        let len = self.len();
        let layer = self.layer_index;

        let per_chunk: Vec<LayerStepStats> = weights
            .par_chunks_mut(CHUNK)
            .zip(grads.par_chunks(CHUNK))
            .zip(self.m1.par_chunks_mut(CHUNK).zip(self.m2.par_chunks_mut(CHUNK)))
            .enumerate()
            .map(|(ci, ((w, g), (m1, m2)))| {
                let mut rng = transition_rng(seed, layer, iteration, len, ci * CHUNK);
                let mut stats = LayerStepStats::default();
                for i in 0..w.len() {
                    let dw = adam_increment(g[i], &mut m1[i], &mut m2[i], t, &adam);
                    let (nw, ev) = project_transition(w[i], dw, hyper, &mut rng);
                    stats.changed += (nw != w[i]) as usize;
                    stats.extra_hops += ev.moved_extra as usize;
                    w[i] = nw;
                }
                stats
            })
            .collect();

        per_chunk.into_iter().fold(LayerStepStats::default(), |a, b| LayerStepStats {
            changed: a.changed + b.changed,
            extra_hops: a.extra_hops + b.extra_hops,
        })
    }
}
