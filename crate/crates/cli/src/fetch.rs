use std::io::Read;
use std::path::Path;

use anyhow::{bail, Context, Result};
use flate2::read::GzDecoder;
use gxnor::data::MNIST_FILES;
use sha2::{Digest, Sha256};

pub const DEFAULT_MIRROR: &str = "https://storage.googleapis.com/cvdf-datasets/mnist/";

/// SHA-256 of each decompressed file, in `MNIST_FILES` order.
const SHA256: [&str; 4] = [
    "ba891046e6505d7aadcbbe25680a0738ad16aec93bde7f9b65e87a2fc25776db",
    "65a50cbbf4e906d70832878ad85ccda5333a97f0f4c3dd2ef09a8a9eef7101c5",
    "0fa7898d509279e482958e8ce81c8e77db3f2f8254e26661ceb7762c4d494ce7",
    "ff7bcfd416de33731a308c3f266cc351222c34898ecbeaf847f06e48f7ec33f2",
];

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Raw bytes of `name.gz` from an HTTP(S) base URL or a local directory.
fn obtain(mirror: &str, name: &str) -> Result<Vec<u8>> {
    let file = format!("{name}.gz");
    if mirror.starts_with("http://") || mirror.starts_with("https://") {
        let url = format!("{}/{file}", mirror.trim_end_matches('/'));
        let resp = reqwest::blocking::get(&url).with_context(|| format!("downloading {url}"))?;
        if !resp.status().is_success() {
            bail!("{url}: HTTP {}", resp.status());
        }
        Ok(resp.bytes().with_context(|| format!("reading {url}"))?.to_vec())
    } else {
        let path = Path::new(mirror).join(&file);
        std::fs::read(&path).with_context(|| format!("reading {}", path.display()))
    }
}

/// Fetch, decompress and verify the four IDX files into `dir`. Files that
/// are already present with the right checksum are left alone.
pub fn fetch_mnist(dir: &Path, mirror: &str) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, want) in MNIST_FILES.iter().zip(SHA256) {
        let target = dir.join(name);
        if let Ok(existing) = std::fs::read(&target) {
            if digest(&existing) == want {
                log::info!("{name}: present and verified");
                continue;
            }
            log::warn!("{name}: checksum mismatch, fetching again");
        }
        let gz = obtain(mirror, name)?;
        let mut raw = Vec::new();
        GzDecoder::new(gz.as_slice())
            .read_to_end(&mut raw)
            .with_context(|| format!("decompressing {name}.gz"))?;
        let got = digest(&raw);
        if got != want {
            bail!("{name}: checksum mismatch (expected {want}, got {got})");
        }
        gxnor::experiment::write_atomic(&target, &raw)?;
        log::info!("{name}: fetched and verified");
    }
    Ok(())
}
