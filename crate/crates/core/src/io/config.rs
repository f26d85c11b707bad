//! Run configuration from a TOML file, overridden field by field by flags.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    Desk,
    Paper,
}

/// Every field is optional so that file and flag layers can be merged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub scale: Option<Scale>,
    pub replicates: Option<usize>,
    pub sigma: Option<Vec<f64>>,
    pub snr: Option<Vec<f64>>,
    pub d: Option<Vec<f64>>,
    pub kappa_percentile: Option<f64>,
    pub kappa_abs: Option<f64>,
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub max_rejections: Option<usize>,
    pub n: Option<usize>,
    pub data: Option<PathBuf>,
    pub columns: Option<String>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| e.context(format!("config {}", path.display())))
    }

    /// Fields set in `over` win; the rest come from `self`.
    pub fn overridden_by(self, over: RunConfig) -> RunConfig {
        RunConfig {
            seed: over.seed.or(self.seed),
            scale: over.scale.or(self.scale),
            replicates: over.replicates.or(self.replicates),
            sigma: over.sigma.or(self.sigma),
            snr: over.snr.or(self.snr),
            d: over.d.or(self.d),
            kappa_percentile: over.kappa_percentile.or(self.kappa_percentile),
            kappa_abs: over.kappa_abs.or(self.kappa_abs),
            iterations: over.iterations.or(self.iterations),
            burn_in: over.burn_in.or(self.burn_in),
            max_rejections: over.max_rejections.or(self.max_rejections),
            n: over.n.or(self.n),
            data: over.data.or(self.data),
            columns: over.columns.or(self.columns),
            out: over.out.or(self.out),
        }
    }

    pub fn scale_or_desk(&self) -> Scale {
        self.scale.unwrap_or(Scale::Desk)
    }
}
