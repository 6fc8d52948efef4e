//! Run configuration: a TOML file merged with command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spectraforge::{EncodingConfig, TrainConfig};

use crate::CliError;

/// Settings shared by the subcommands. Paths in a config file are relative
/// to the file's directory; flags given on the command line win.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub encodings: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub loss_csv: Option<PathBuf>,
    /// Hidden layer widths of the decoder.
    pub hidden: Option<Vec<usize>>,
    pub metric_samples: Option<usize>,
    pub encoding: EncodingConfig,
    pub train: TrainConfig,
}

pub const DEFAULT_HIDDEN: [usize; 3] = [258, 1024, 2048];

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.dataset,
            &mut cfg.encodings,
            &mut cfg.model,
            &mut cfg.out,
            &mut cfg.loss_csv,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn hidden(&self) -> Vec<usize> {
        self.hidden.clone().unwrap_or_else(|| DEFAULT_HIDDEN.to_vec())
    }
}

pub fn require<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    value
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("missing --{flag} (flag or config key)")))
}
