use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

/// Optional TOML configuration. Command-line flags win over the file, and
/// `D123_DATA_ROOT` wins over `data_root`.
///
/// ```toml
/// data_root = "/data/d123"
/// json = false
///
/// [convert]
/// mode = "self-contained"
/// interpolate_boxes = 10.0
///
/// [stats]
/// splits = ["train", "val"]
/// taxonomy = "taxonomy.json"
/// strict = false
/// ```
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub data_root: Option<PathBuf>,
    pub json: bool,
    pub convert: ConvertSection,
    pub stats: StatsSection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvertSection {
    pub mode: Option<String>,
    pub interpolate_boxes: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsSection {
    pub splits: Vec<String>,
    pub taxonomy: Option<PathBuf>,
    pub strict: bool,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: Config = toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        // relative paths in the file are relative to the file
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(root) = &cfg.data_root {
            cfg.data_root = Some(base.join(root));
        }
        if let Some(t) = &cfg.stats.taxonomy {
            cfg.stats.taxonomy = Some(base.join(t));
        }
        Ok(cfg)
    }
}
