//! Run configuration, read from and written to TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::activations::{ActivationKind, ActivationSpec};
use crate::dct::AugmentPolicy;
use crate::error::{Error, Result};
use crate::network::{Preset, Widths};
use crate::optim::Schedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    #[default]
    Mnist,
    Cifar10,
}

impl std::str::FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "mnist" => Ok(DatasetKind::Mnist),
            "cifar10" | "cifar" => Ok(DatasetKind::Cifar10),
            _ => Err(Error::Unknown {
                what: "dataset",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub dataset: DatasetKind,
    /// Dataset directory; empty means `$LPRELU_DATA/<dataset>`.
    pub root: String,
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    /// Share of the training split held out for validation; 0 disables it.
    pub val_fraction: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetKind::Mnist,
            root: String::new(),
            train_limit: None,
            test_limit: None,
            val_fraction: crate::data::VALIDATION_FRACTION,
        }
    }
}

impl DataConfig {
    pub fn dir(&self) -> PathBuf {
        if self.root.is_empty() {
            let sub = match self.dataset {
                DatasetKind::Mnist => "mnist",
                DatasetKind::Cifar10 => "cifar10",
            };
            crate::data::data_root().join(sub)
        } else {
            PathBuf::from(&self.root)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    /// `conv3`, `conv3_fc2` or `mlp`.
    pub preset: String,
    pub conv: [usize; 3],
    pub hidden: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        let w = Widths::default();
        Self {
            preset: Preset::Conv3.name().into(),
            conv: w.conv,
            hidden: w.hidden,
        }
    }
}

impl NetConfig {
    pub fn preset(&self) -> Result<Preset> {
        self.preset.parse()
    }

    pub fn widths(&self) -> Widths {
        Widths {
            conv: self.conv,
            hidden: self.hidden,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActivationConfig {
    pub kind: ActivationKind,
    /// Overrides such as `A=5,B=8.1,learn=A+B`.
    pub params: String,
}

impl Default for ActivationConfig {
    fn default() -> Self {
        Self {
            kind: ActivationKind::Relu,
            params: String::new(),
        }
    }
}

impl ActivationConfig {
    pub fn spec(&self) -> Result<ActivationSpec> {
        let spec = ActivationSpec::init(self.kind).with_overrides(&self.params)?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub lr: f64,
    pub momentum: f64,
    pub l2: f64,
    pub epochs: usize,
    pub batch: usize,
    /// `(epoch, multiplier)` pairs.
    pub schedule: Vec<(usize, f64)>,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            lr: 0.1,
            momentum: 0.9,
            l2: 5e-4,
            epochs: 160,
            batch: 128,
            schedule: Schedule::long_run().milestones,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub dct: bool,
    pub t_min: f64,
    pub t_max: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        let p = AugmentPolicy::default();
        Self {
            dct: false,
            t_min: p.t_min,
            t_max: p.t_max,
        }
    }
}

/// Everything needed to reproduce a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: String,
    pub data: DataConfig,
    pub net: NetConfig,
    pub activation: ActivationConfig,
    pub optim: OptimConfig,
    pub augment: AugmentConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.net.preset()?;
        self.activation.spec()?;
        if self.optim.batch == 0 || self.optim.epochs == 0 {
            return Err(Error::Config("batch and epochs must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.data.val_fraction) {
            return Err(Error::Config(format!("val_fraction {} outside [0, 1)", self.data.val_fraction)));
        }
        self.augment_policy().validate()?;
        crate::optim::Sgd::new(self.optim.lr, self.optim.momentum, self.optim.l2, Schedule::default())?;
        Ok(())
    }

    pub fn augment_policy(&self) -> AugmentPolicy {
        AugmentPolicy {
            t_min: self.augment.t_min,
            t_max: self.augment.t_max,
            seed: self.seed ^ 0xa5a5_0000,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.activation.kind = ActivationKind::LpRelu2;
        cfg.activation.params = "A=4".into();
        cfg.data.train_limit = Some(1000);
        let text = cfg.to_toml();
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = RunConfig::parse("seed = 3\n[optim]\nepochs = 2\n").unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.optim.epochs, 2);
        assert_eq!(cfg.optim.batch, 128);
    }

    #[test]
    fn bad_values_rejected() {
        assert!(RunConfig::parse("[activation]\nkind = \"foo\"\n").is_err());
        assert!(RunConfig::parse("[net]\npreset = \"resnet\"\n").is_err());
        assert!(RunConfig::parse("[optim]\nmomentum = 1.5\n").is_err());
        assert!(RunConfig::parse("typo = 1\n").is_err());
    }
}
