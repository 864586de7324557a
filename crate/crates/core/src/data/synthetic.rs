use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::net::Tensor;

/// Gaussian blobs. Class `k` is centered on `±(separation·sigma/√2)·e_j`
/// (`+e_k` for `k < dim`, `-e_(k-dim)` after that), so every pair of centers
/// is at least `separation·sigma` apart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobsSpec {
    pub n: usize,
    pub classes: usize,
    pub dim: usize,
    /// Center distance in units of `sigma`.
    pub separation: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl BlobsSpec {
    pub fn new(n: usize, classes: usize, dim: usize, seed: u64) -> Self {
        Self {
            n,
            classes,
            dim,
            separation: 10.0,
            sigma: 0.05,
            seed,
        }
    }

    pub fn center(&self, class: usize) -> Vec<f64> {
        let scale = self.separation * self.sigma / std::f64::consts::SQRT_2;
        let mut c = vec![0.0; self.dim];
        if class < self.dim {
            c[class] = scale;
        } else {
            c[class - self.dim] = -scale;
        }
        c
    }
}

/// Samples are `[n, 1, 1, dim]`, clipped to `[-1, 1]`, labels cycle through
/// the classes. Fully determined by `spec.seed`.
pub fn synthetic_blobs(spec: &BlobsSpec) -> Result<Dataset> {
    if spec.classes < 2 || spec.classes > 2 * spec.dim {
        return Err(Error::Input(format!(
            "blobs need 2 <= classes <= 2·dim, got {} classes in {} dims",
            spec.classes, spec.dim
        )));
    }
    if !(spec.sigma > 0.0) || !(spec.separation >= 0.0) {
        return Err(Error::Input("blob sigma must be positive and separation non-negative".into()));
    }
    let normal = Normal::new(0.0, spec.sigma).map_err(|e| Error::Input(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers: Vec<Vec<f64>> = (0..spec.classes).map(|k| spec.center(k)).collect();
    let mut data = Vec::with_capacity(spec.n * spec.dim);
    let mut labels = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let k = i % spec.classes;
        labels.push(k);
        for c in &centers[k] {
            data.push((c + normal.sample(&mut rng)).clamp(-1.0, 1.0));
        }
    }
    Dataset::new(Tensor::new(vec![spec.n, 1, 1, spec.dim], data)?, labels, spec.classes)
}
