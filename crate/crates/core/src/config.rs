//! Run configuration file (TOML). Every section is optional; command-line
//! flags override whatever the file sets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::MatchParams;
use crate::motion::MotionBank;
use crate::template::TemplateSpec;

/// Band and strength of the template. The seed is the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemplateSection {
    pub amplitude: f64,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
}

impl Default for TemplateSection {
    fn default() -> Self {
        let d = TemplateSpec::default();
        TemplateSection { amplitude: d.amplitude, sigma_lo: d.sigma_lo, sigma_hi: d.sigma_hi }
    }
}

impl TemplateSection {
    pub fn spec(&self, seed: u64) -> TemplateSpec {
        TemplateSpec { seed, amplitude: self.amplitude, sigma_lo: self.sigma_lo, sigma_hi: self.sigma_hi }
    }
}

/// Loss weights. Nothing is trained here; they are carried into run
/// metadata only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Lambdas {
    pub l1: f64,
    pub l2: f64,
    pub lm: f64,
}

impl Default for Lambdas {
    fn default() -> Self {
        Lambdas { l1: 1.0, l2: 1.0, lm: 0.1 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    #[serde(rename = "in", skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(rename = "out", skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub template: TemplateSection,
    pub bank: MotionBank,
    #[serde(rename = "match")]
    pub matching: MatchParams,
    pub lambdas: Lambdas,
    pub paths: Paths,
}

impl RunConfig {
    /// Parses and validates; parse errors carry the line and column.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.template.spec(0).validate()?;
        self.bank.validate()?;
        self.matching.validate()
    }
}
