use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::instruction::SegmentationStyle;
use crate::metrics::MetricParams;
use crate::planner::EavConfig;
use crate::world::SceneSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    /// Generated tours, one fresh scene each.
    pub tours: usize,
    pub episodes_per_tour: usize,
    pub subtasks: usize,
    pub scene: SceneSpec,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { tours: 10, episodes_per_tour: 2, subtasks: 4, scene: SceneSpec::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProviderConfig {
    Oracle {
        #[serde(default = "default_noise")]
        noise_sigma: f64,
    },
    /// Embedding service named by the endpoint environment variable.
    Remote {
        #[serde(default = "default_timeout")]
        timeout_secs: f64,
    },
}

fn default_noise() -> f64 {
    0.02
}

fn default_timeout() -> f64 {
    10.0
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig::Oracle { noise_sigma: default_noise() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyConfig {
    Scripted {
        #[serde(default)]
        error_rate: f64,
    },
    /// Neural action head; seeded weights unless a manifest is given.
    Neural {
        #[serde(default)]
        weights: Option<PathBuf>,
    },
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig::Scripted { error_rate: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub suite: SuiteConfig,
    /// Stitched tours to run instead of a generated suite; needs `scene_file`.
    pub tour_file: Option<PathBuf>,
    pub scene_file: Option<PathBuf>,
    pub segmentation: SegmentationStyle,
    pub phi_lambda: f64,
    pub logit_scale: f64,
    pub eav: EavConfig,
    pub provider: ProviderConfig,
    pub encoder_dim: usize,
    /// Map-encoder tensor manifest; seeded weights when absent.
    pub map_weights: Option<PathBuf>,
    pub policy: PolicyConfig,
    pub metrics: MetricParams,
    pub step_cap: usize,
    pub repeats: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            suite: SuiteConfig::default(),
            tour_file: None,
            scene_file: None,
            segmentation: SegmentationStyle::TypeIVPeriods,
            phi_lambda: 0.65,
            logit_scale: 100.0,
            eav: EavConfig::default(),
            provider: ProviderConfig::default(),
            encoder_dim: 128,
            map_weights: None,
            policy: PolicyConfig::default(),
            metrics: MetricParams::default(),
            step_cap: 200,
            repeats: 3,
        }
    }
}

impl RunConfig {
    /// Parses a config document; errors name the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phi_lambda > 0.0 && self.phi_lambda < 1.0) {
            return Err(Error::config("phi_lambda", "must lie in (0, 1)"));
        }
        if !(self.logit_scale > 0.0 && self.logit_scale.is_finite()) {
            return Err(Error::config("logit_scale", "must be positive"));
        }
        self.eav.validate()?;
        self.metrics.validate()?;
        if let PolicyConfig::Scripted { error_rate } = self.policy {
            if !(0.0..=1.0).contains(&error_rate) {
                return Err(Error::config("policy.error_rate", "must lie in [0, 1]"));
            }
        }
        if let ProviderConfig::Oracle { noise_sigma } = self.provider {
            if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
                return Err(Error::config("provider.noise_sigma", "must be non-negative"));
            }
        }
        if self.encoder_dim == 0 {
            return Err(Error::config("encoder_dim", "must be positive"));
        }
        if self.repeats == 0 {
            return Err(Error::config("repeats", "must be at least 1"));
        }
        if self.tour_file.is_some() != self.scene_file.is_some() {
            return Err(Error::config("tour_file", "tour_file and scene_file go together"));
        }
        if self.tour_file.is_none() && (self.suite.tours == 0 || self.suite.episodes_per_tour == 0 || self.suite.subtasks == 0)
        {
            return Err(Error::config("suite", "tours, episodes_per_tour and subtasks must be positive"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// sha256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canon.as_bytes()))
    }
}
