//! Flat TOML run configuration. Every key is optional; command-line flags
//! override file values, which override built-in defaults.
//!
//! ```toml
//! variant = "mrnn"        # or "baseline"
//! embed1_dim = 128
//! embed2_dim = 128
//! recurrent_dim = 256
//! multimodal_dim = 512
//! init = "xavier"         # "zeros", "uniform:0.1", "normal:0.01"
//! learning_rate = 0.05
//! lambda_reg = 1e-5
//! batch_size = 16
//! epochs = 10
//! clip_norm = 5.0         # 0 disables clipping
//! seed = 0
//! eval_every = 1
//! min_count = 1
//! mode = "greedy"         # generation: "greedy" or "sample"
//! max_length = 50
//! ```

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub variant: Option<String>,
    pub embed1_dim: Option<usize>,
    pub embed2_dim: Option<usize>,
    pub recurrent_dim: Option<usize>,
    pub multimodal_dim: Option<usize>,
    pub init: Option<String>,
    pub learning_rate: Option<f64>,
    pub lambda_reg: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub clip_norm: Option<f64>,
    pub seed: Option<u64>,
    pub eval_every: Option<usize>,
    pub min_count: Option<usize>,
    pub mode: Option<String>,
    pub max_length: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}
