use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::discrete::{DiscreteSpace, SurrogateShape, SurrogateSpec, MAX_STATE_PARAM};
use crate::dst::lr_schedule;
use crate::error::{Error, Result};
use crate::net::ModelHyper;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetworkId {
    /// Fully connected, hidden widths from `hidden`.
    Mlp,
    /// `16C5-MP2-32C5-MP2-128FC-SVM` on 28×28 inputs.
    ConvSmall,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetId {
    Mnist,
    Blobs,
}

/// Flat, human-editable run configuration. Every field has a default, so a
/// config file only needs the keys it changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: u32,

    pub network: NetworkId,
    pub hidden: Vec<usize>,

    pub dataset: DatasetId,
    /// MNIST directory; falls back to the CLI's environment/default lookup.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    /// Use only the first `n` training / test samples.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_limit: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_limit: Option<usize>,
    pub blobs_train: usize,
    pub blobs_test: usize,
    pub blobs_classes: usize,
    pub blobs_dim: usize,
    pub blobs_separation: f64,
    pub blobs_sigma: f64,

    /// Weight state parameter.
    pub n1: u32,
    /// Activation state parameter.
    pub n2: u32,
    pub h: f64,
    pub r: f64,
    pub surrogate: SurrogateShape,
    pub a: f64,
    pub m: f64,

    pub lr_start: f64,
    pub lr_fin: f64,
    pub epochs: u32,
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub bn_eps: f64,
    pub bn_momentum: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            format_version: CONFIG_VERSION,
            network: NetworkId::Mlp,
            hidden: vec![200, 200],
            dataset: DatasetId::Mnist,
            data_dir: None,
            train_limit: None,
            test_limit: None,
            blobs_train: 2000,
            blobs_test: 500,
            blobs_classes: 4,
            blobs_dim: 16,
            blobs_separation: 10.0,
            blobs_sigma: 0.05,
            n1: 1,
            n2: 1,
            h: 1.0,
            r: 0.5,
            surrogate: SurrogateShape::Rectangular,
            a: 0.5,
            m: 3.0,
            lr_start: 0.01,
            lr_fin: 0.0001,
            epochs: 20,
            batch_size: 100,
            seed: 1,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            bn_eps: 1e-5,
            bn_momentum: 0.1,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.format_version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config format_version {} is not supported (expected {CONFIG_VERSION})",
                cfg.format_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn weight_space(&self) -> Result<DiscreteSpace> {
        DiscreteSpace::new(self.n1, self.h).map_err(config_err)
    }

    pub fn activation_space(&self) -> Result<DiscreteSpace> {
        DiscreteSpace::new(self.n2, self.h).map_err(config_err)
    }

    pub fn surrogate_spec(&self) -> Result<SurrogateSpec> {
        SurrogateSpec::new(self.surrogate, self.a, self.r).map_err(config_err)
    }

    /// Per-epoch learning-rate multiplier.
    pub fn lr_decay(&self) -> Result<f64> {
        lr_schedule(self.lr_start, self.lr_fin, self.epochs)
    }

    pub fn hyper(&self) -> ModelHyper {
        ModelHyper {
            m: self.m,
            lr: self.lr_start,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    /// Check every constraint; returns warnings for settings that are legal
    /// but unusual.
    pub fn validate(&self) -> Result<Vec<String>> {
        let fail = |msg: String| Err(Error::Config(msg));
        let mut warnings = Vec::new();
        if self.n1 > MAX_STATE_PARAM || self.n2 > MAX_STATE_PARAM {
            return fail(format!("state parameters must be at most {MAX_STATE_PARAM}"));
        }
        let act = self.activation_space()?;
        self.weight_space()?;
        self.surrogate_spec()?;
        if !(self.r >= 0.0) {
            return fail(format!("r must be non-negative, got {}", self.r));
        }
        if act.state_param() >= 2 && self.r >= self.h {
            return fail(format!("multi-level activations need r < H, got r={} H={}", self.r, self.h));
        }
        if act.state_param() >= 1 && self.r + self.a > self.h {
            warnings.push(format!(
                "r + a = {} exceeds H = {}: the surrogate pulse extends past the activation range",
                self.r + self.a,
                self.h
            ));
        }
        if !(self.m > 0.0 && self.m.is_finite()) {
            return fail(format!("m must be positive, got {}", self.m));
        }
        if !(0.0 < self.beta1 && self.beta1 < 1.0 && 0.0 < self.beta2 && self.beta2 < 1.0) {
            return fail("beta1 and beta2 must lie in (0, 1)".into());
        }
        if !(self.eps > 0.0 && self.bn_eps > 0.0) {
            return fail("eps and bn_eps must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.bn_momentum) {
            return fail("bn_momentum must lie in [0, 1]".into());
        }
        if self.batch_size < 2 {
            return fail("batch_size must be at least 2 (batch norm needs a batch)".into());
        }
        if self.epochs == 0 {
            return fail("epochs must be positive".into());
        }
        let alpha = self.lr_decay().map_err(config_err)?;
        if alpha > 1.0 {
            warnings.push(format!("lr_fin > lr_start: the learning rate grows by {alpha} per epoch"));
        }
        if self.network == NetworkId::Mlp && self.hidden.contains(&0) {
            return fail("hidden widths must be positive".into());
        }
        if self.network == NetworkId::ConvSmall && self.dataset != DatasetId::Mnist {
            return fail("conv-small expects 28×28 MNIST inputs".into());
        }
        if self.dataset == DatasetId::Blobs {
            if self.blobs_classes < 2 || self.blobs_classes > 2 * self.blobs_dim {
                return fail("blobs need 2 <= blobs_classes <= 2·blobs_dim".into());
            }
            if !(self.blobs_sigma > 0.0 && self.blobs_separation >= 0.0) {
                return fail("blobs_sigma must be positive and blobs_separation non-negative".into());
            }
        }
        Ok(warnings)
    }

    /// Set a sweepable parameter.
    pub fn set_param(&mut self, param: SweepParam, value: f64) -> Result<()> {
        let as_state = |v: f64| {
            if v >= 0.0 && v.fract() == 0.0 && v <= MAX_STATE_PARAM as f64 {
                Ok(v as u32)
            } else {
                Err(Error::Config(format!("{param} takes integers in 0..={MAX_STATE_PARAM}, got {v}")))
            }
        };
        match param {
            SweepParam::M => self.m = value,
            SweepParam::A => self.a = value,
            SweepParam::R => self.r = value,
            SweepParam::N1 => self.n1 = as_state(value)?,
            SweepParam::N2 => self.n2 = as_state(value)?,
        }
        Ok(())
    }
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    M,
    A,
    R,
    N1,
    N2,
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::M => "m",
            SweepParam::A => "a",
            SweepParam::R => "r",
            SweepParam::N1 => "n1",
            SweepParam::N2 => "n2",
        })
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m" => Ok(SweepParam::M),
            "a" => Ok(SweepParam::A),
            "r" => Ok(SweepParam::R),
            "n1" => Ok(SweepParam::N1),
            "n2" => Ok(SweepParam::N2),
            other => Err(Error::Config(format!("unknown sweep parameter `{other}` (expected m, a, r, n1 or n2)"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = RunConfig::default();
        assert!(cfg.validate().unwrap().is_empty());
        assert_eq!(cfg.hidden, vec![200, 200]);
        assert_eq!((cfg.n1, cfg.n2, cfg.r, cfg.a, cfg.m, cfg.batch_size, cfg.epochs), (1, 1, 0.5, 0.5, 3.0, 100, 20));
    }

    #[test]
    fn toml_roundtrip() {
        let mut cfg = RunConfig::default();
        cfg.data_dir = Some("/tmp/mnist".into());
        cfg.train_limit = Some(1000);
        cfg.eps = 1e-8;
        cfg.lr_start = 0.1 + 0.2;
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = RunConfig::from_toml("format_version = 1\nm = 0.5\nnetwork = \"conv-small\"\n").unwrap();
        assert_eq!(cfg.m, 0.5);
        assert_eq!(cfg.network, NetworkId::ConvSmall);
        assert_eq!(cfg.batch_size, 100);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(RunConfig::from_toml("bogus = 1").is_err());
        assert!(RunConfig::from_toml("format_version = 2").is_err());
        assert!(RunConfig::from_toml("m = \"three\"").is_err());
    }

    #[test]
    fn growing_lr_warns() {
        let cfg = RunConfig { lr_start: 1e-4, lr_fin: 1e-2, ..RunConfig::default() };
        let warnings = cfg.validate().unwrap();
        assert!(warnings.iter().any(|w| w.contains("grows")));
        let alpha = cfg.lr_decay().unwrap();
        let mut lr = cfg.lr_start;
        for _ in 0..cfg.epochs {
            lr *= alpha;
        }
        assert!((lr - 1e-2).abs() / 1e-2 < 1e-9);
    }

    #[test]
    fn invalid_values() {
        let bad = [
            RunConfig { m: 0.0, ..RunConfig::default() },
            RunConfig { a: -1.0, ..RunConfig::default() },
            RunConfig { batch_size: 1, ..RunConfig::default() },
            RunConfig { n2: 2, r: 1.0, ..RunConfig::default() },
            RunConfig { h: 0.0, ..RunConfig::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn sweep_params() {
        let mut cfg = RunConfig::default();
        cfg.set_param("N1".parse().unwrap(), 6.0).unwrap();
        assert_eq!(cfg.n1, 6);
        assert!(cfg.set_param(SweepParam::N2, 1.5).is_err());
        assert!("q".parse::<SweepParam>().is_err());
    }
}
