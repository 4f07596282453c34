//! Experiment config files. Every field is optional; command-line flags
//! take precedence over the file, and the file over built-in defaults.

use std::path::Path;

use anyhow::Context;
use gridknot::learner::{InputEncoding, Normalization};
use gridknot::MoveSet;
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub generator: GeneratorSection,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub sweep: SweepSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSection {
    /// `all`, `first:K` or a comma-separated list of names.
    pub classes: Option<String>,
    pub batch_size: Option<usize>,
    pub complexity_min: Option<usize>,
    pub complexity_max: Option<usize>,
    pub switch_moves: Option<usize>,
    pub move_set: Option<MoveSet>,
    pub validation_complexity: Option<usize>,
    pub validation_count: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub hidden_dim: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    /// `adam` or `sgd`.
    pub optimizer: Option<String>,
    pub steps: Option<usize>,
    pub epoch_size: Option<usize>,
    pub encoding: Option<InputEncoding>,
    pub normalization: Option<Normalization>,
    pub init_scale: Option<f64>,
    /// `f64` or `f32`.
    pub dtype: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub tta_steps: Option<usize>,
    pub binarize_threshold: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub complexities: Option<Vec<usize>>,
    pub samples: Option<usize>,
    pub warmup: Option<usize>,
    pub step: Option<usize>,
    pub probes: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}
