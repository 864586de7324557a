//! Datasets: MNIST IDX files, synthetic Gaussian blobs, mini-batch iteration.

mod batches;
mod idx;
mod synthetic;

pub use batches::{batches, Batches};
pub use idx::{load_idx, load_mnist, parse_idx_images, parse_idx_labels, MnistFiles, MNIST_FILES};
pub use synthetic::{synthetic_blobs, BlobsSpec};

use crate::error::{Error, Result};
use crate::net::Tensor;

/// Images `[n, channels, height, width]` with values in `[-1, 1]`, plus labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub images: Tensor,
    pub labels: Vec<usize>,
    pub classes: usize,
}

/// One mini-batch, in the same layout as [`Dataset`].
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub images: Tensor,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(images: Tensor, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if images.shape().len() != 4 {
            return Err(Error::Data(format!("images must be [n, c, h, w], got {:?}", images.shape())));
        }
        if images.rows() != labels.len() {
            return Err(Error::Data(format!("{} images but {} labels", images.rows(), labels.len())));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Data(format!("label {l} out of range for {classes} classes")));
        }
        if images.data().iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::Data("image values must lie in [-1, 1]".into()));
        }
        Ok(Self { images, labels, classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Per-sample shape `[c, h, w]`.
    pub fn sample_shape(&self) -> &[usize] {
        &self.images.shape()[1..]
    }

    /// First `n` samples (or all of them if fewer).
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            images: self.images.slice_rows(0, n),
            labels: self.labels[..n].to_vec(),
            classes: self.classes,
        }
    }
}
