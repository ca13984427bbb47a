use std::fs;
use std::path::Path;

use anyhow::Context;
use formbench_core::bench::RunConfig;
use serde::Deserialize;

/// Settings read from `--config`. Every key is optional.
///
/// ```toml
/// seed = 7
/// tau = 0.5
/// resamples = 10000
/// level = 0.95
///
/// [run]
/// endpoint = "http://localhost:8000/v1/chat/completions"
/// model = "my-model"
/// parallelism = 8
/// ```
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub tau: Option<f64>,
    pub resamples: Option<usize>,
    pub level: Option<f64>,
    pub run: RunConfig,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
