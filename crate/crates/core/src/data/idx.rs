use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::net::Tensor;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// File names of the four MNIST IDX files, in the order
/// train images, train labels, test images, test labels.
pub const MNIST_FILES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];

#[derive(Clone, Debug)]
pub struct MnistFiles {
    pub train: Dataset,
    pub test: Dataset,
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Data("truncated IDX header".into()))
}

/// Parse an IDX3 image file; pixels map to `x/127.5 - 1`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Tensor> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Data(format!("bad IDX image magic {magic:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let need = n * rows * cols;
    let body = &bytes[16..];
    if body.len() < need {
        return Err(Error::Data(format!(
            "truncated IDX image file: {n} images of {rows}x{cols} need {need} bytes, found {}",
            body.len()
        )));
    }
    let data = body[..need].iter().map(|&b| b as f64 / 127.5 - 1.0).collect();
    Tensor::new(vec![n, 1, rows, cols], data)
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(Error::Data(format!("bad IDX label magic {magic:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() < n {
        return Err(Error::Data(format!("truncated IDX label file: {n} labels, {} bytes", body.len())));
    }
    Ok(body[..n].iter().map(|&b| b as usize).collect())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn load_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let x = parse_idx_images(&read(images)?)?;
    let y = parse_idx_labels(&read(labels)?)?;
    if x.rows() != y.len() {
        return Err(Error::Data(format!(
            "{} has {} images but {} has {} labels",
            images.display(),
            x.rows(),
            labels.display(),
            y.len()
        )));
    }
    let classes = y.iter().max().map_or(0, |m| m + 1).max(10);
    Dataset::new(x, y, classes)
}

/// Load the standard train/test split from `dir`.
pub fn load_mnist(dir: &Path) -> Result<MnistFiles> {
    let p = |name: &str| dir.join(name);
    for f in MNIST_FILES {
        if !p(f).is_file() {
            return Err(Error::Data(format!("MNIST file {} not found", p(f).display())));
        }
    }
    Ok(MnistFiles {
        train: load_idx(&p(MNIST_FILES[0]), &p(MNIST_FILES[1]))?,
        test: load_idx(&p(MNIST_FILES[2]), &p(MNIST_FILES[3]))?,
    })
}
