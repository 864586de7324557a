use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use super::config::RunConfig;
use crate::error::{Error, Result};

pub const METRICS_VERSION: u32 = 1;
pub const METRICS_COLUMNS: &str = "epoch,lr,train_loss,train_accuracy,test_accuracy,sparsity,weight_changes";

/// One line of `metrics.csv`.
///
/// Wall-clock time is kept out of this record (it goes to `timing.csv`) so
/// that identical-seed runs produce byte-identical metrics files.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRecord {
    pub epoch: u32,
    /// Learning rate used during this epoch.
    pub lr: f64,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// Fraction of zero quantized activations over the test set.
    pub sparsity: f64,
    pub weight_changes: u64,
}

impl MetricsRecord {
    fn csv_row(&self) -> String {
        format!(
            "{},{:e},{:e},{},{},{},{}",
            self.epoch, self.lr, self.train_loss, self.train_accuracy, self.test_accuracy, self.sparsity, self.weight_changes
        )
    }

    fn parse(line: &str) -> Result<Self> {
        let bad = || Error::Data(format!("malformed metrics row `{line}`"));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        Ok(Self {
            epoch: f[0].parse().map_err(|_| bad())?,
            lr: num(f[1])?,
            train_loss: num(f[2])?,
            train_accuracy: num(f[3])?,
            test_accuracy: num(f[4])?,
            sparsity: num(f[5])?,
            weight_changes: f[6].parse().map_err(|_| bad())?,
        })
    }
}

/// Full text of a metrics file: version line, the complete configuration as
/// comments, the column header and one row per record.
pub fn render_metrics(config: &RunConfig, records: &[MetricsRecord]) -> String {
    let mut s = format!("# gxnor metrics v{METRICS_VERSION}\n");
    for line in config.to_toml().lines() {
        let _ = writeln!(s, "# config {line}");
    }
    s.push_str(METRICS_COLUMNS);
    s.push('\n');
    for r in records {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

pub fn parse_metrics(text: &str) -> Result<Vec<MetricsRecord>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    match lines.next() {
        Some(h) if h == METRICS_COLUMNS => {}
        _ => return Err(Error::Data("metrics file lacks the expected header".into())),
    }
    lines.map(MetricsRecord::parse).collect()
}

/// Write `contents` to a sibling temporary file, then rename it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(contents).and_then(|_| f.sync_all()).map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
