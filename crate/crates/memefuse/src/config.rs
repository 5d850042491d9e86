//! TOML run configuration.
//!
//! ```toml
//! [dataset]
//! dir = "data/synth"          # standard layout; or list files explicitly:
//! # manifest = "x/manifest.jsonl"
//! # [dataset.channels]
//! # mm = "x/mm.mfe"
//!
//! [fusion]
//! mode = "cap_bilinear"
//! bilinear_dim = 768
//!
//! [train]
//! learning_rate = 5e-5
//! hidden = [768]
//!
//! [output]
//! dir = "runs/cap_bilinear"
//!
//! [metrics]
//! threshold = 0.5
//!
//! [synth]                     # only read by gen-synth
//! n = 1000
//! seed = 7
//! ```
//!
//! Relative paths resolve against the config file's directory. Channel
//! dimensions come from the channel file headers, not from the config.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use memefuse_core::fusion::FusionMode;
use memefuse_core::{ChannelKind, SynthConfig, TrainConfig};
use serde::Deserialize;
use thiserror::Error;

use crate::store::DatasetPaths;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("config field `{field}`: {reason}")]
    Field { field: String, reason: String },
}

impl ConfigError {
    fn field(field: &str, reason: impl Into<String>) -> Self {
        ConfigError::Field {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub dir: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    #[serde(default)]
    pub channels: BTreeMap<ChannelKind, PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSection {
    pub mode: FusionMode,
    pub bilinear_dim: usize,
}

impl Default for FusionSection {
    fn default() -> Self {
        Self {
            mode: FusionMode::MmOnly,
            bilinear_dim: 768,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub threshold: f64,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self { threshold: 0.5 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSection,
    pub fusion: FusionSection,
    pub train: TrainConfig,
    pub output: OutputSection,
    pub metrics: MetricsSection,
    pub synth: Option<SynthConfig>,
    #[serde(skip)]
    base: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base).map_err(|e| match e {
            ConfigError::Parse { source, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                source,
            },
            other => other,
        })
    }

    /// Parses config text; relative paths will resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let raw: toml::Table = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: PathBuf::new(),
            source,
        })?;
        // The decision threshold has one home so train logs and reports agree.
        if raw
            .get("train")
            .and_then(|t| t.as_table())
            .is_some_and(|t| t.contains_key("threshold"))
        {
            return Err(ConfigError::field(
                "train.threshold",
                "set the threshold under [metrics]",
            ));
        }
        let mut cfg: RunConfig = raw.try_into().map_err(|source| ConfigError::Parse {
            path: PathBuf::new(),
            source,
        })?;
        cfg.base = base.to_path_buf();
        cfg.train.threshold = cfg.metrics.threshold;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if !(self.metrics.threshold.is_finite() && (0.0..=1.0).contains(&self.metrics.threshold)) {
            return Err(ConfigError::field("metrics.threshold", "must lie in [0, 1]"));
        }
        if self.fusion.bilinear_dim == 0 {
            return Err(ConfigError::field("fusion.bilinear_dim", "must be positive"));
        }
        if let Err(memefuse_core::TrainError::Config(field)) = self.train.validate() {
            return Err(ConfigError::field(&format!("train.{field}"), "invalid value"));
        }
        if let Some(s) = &self.synth {
            if let Err(memefuse_core::SynthError::Config { field, reason }) = s.validate() {
                return Err(ConfigError::field(&format!("synth.{field}"), reason));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn dataset_dir(&self) -> Option<PathBuf> {
        self.dataset.dir.as_deref().map(|d| self.resolve(d))
    }

    /// Dataset file locations. Explicit entries override the directory layout.
    pub fn dataset_paths(&self) -> Result<DatasetPaths, ConfigError> {
        let mut paths = match self.dataset_dir() {
            Some(dir) => DatasetPaths::in_dir(&dir),
            None => DatasetPaths {
                manifest: PathBuf::new(),
                channels: BTreeMap::new(),
                tags: None,
            },
        };
        if let Some(m) = &self.dataset.manifest {
            paths.manifest = self.resolve(m);
        }
        for (&kind, p) in &self.dataset.channels {
            paths.channels.insert(kind, self.resolve(p));
        }
        if paths.manifest.as_os_str().is_empty() {
            return Err(ConfigError::field("dataset", "needs `dir` or `manifest`"));
        }
        if !paths.manifest.is_file() {
            return Err(ConfigError::field(
                "dataset.manifest",
                format!("{} does not exist", paths.manifest.display()),
            ));
        }
        for (kind, p) in &self.dataset.channels {
            let resolved = self.resolve(p);
            if !resolved.is_file() {
                return Err(ConfigError::field(
                    &format!("dataset.channels.{kind}"),
                    format!("{} does not exist", resolved.display()),
                ));
            }
        }
        Ok(paths)
    }

    pub fn output_dir(&self) -> Option<PathBuf> {
        self.output.dir.as_deref().map(|d| self.resolve(d))
    }
}
