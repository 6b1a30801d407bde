//! Run configuration: one JSON document per run, with every field
//! overridable on the command line as `--section.key value`.

use std::path::Path;

use hyperscore_core::adam::AdamConfig;
use hyperscore_core::feature::{FeatureDims, DEFAULT_DIMENSION_NAMES};
use hyperscore_core::model::ModelConfig;
use hyperscore_core::rng::fnv1a64;
use hyperscore_core::stats::TrappingConfig;
use hyperscore_core::train::{LossMode, TrainConfig};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: PathsSection,
    pub dims: DimsSection,
    pub train: TrainSection,
    pub synth: SynthSection,
    pub mos: MosSection,
    pub stats: StatsSection,
    pub score: ScoreSection,
    pub gradcheck: GradcheckSection,
    /// Worker cap for per-sample parallelism; `HS_THREADS` overrides it.
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            paths: PathsSection::default(),
            dims: DimsSection::default(),
            train: TrainSection::default(),
            synth: SynthSection::default(),
            mos: MosSection::default(),
            stats: StatsSection::default(),
            score: ScoreSection::default(),
            gradcheck: GradcheckSection::default(),
            threads: None,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub out_dir: String,
    pub manifest: String,
    pub feature_dir: String,
    pub annotations: String,
    pub labels: String,
    pub checkpoint: String,
    pub predictions: String,
}

impl Default for PathsSection {
    fn default() -> Self {
        Self {
            out_dir: "out".into(),
            manifest: "out/manifest.json".into(),
            feature_dir: "out/features".into(),
            annotations: "annotations.csv".into(),
            labels: "out/labels.csv".into(),
            checkpoint: "out/model.ckpt".into(),
            predictions: "out/scores.csv".into(),
        }
    }
}

/// Architecture and feature dimensions. Defaults are the desk-scale
/// configuration; the full-scale values are D=512, D_q=224, L=12,
/// 112x7x7 grid, head `[224,112,56,28,1]`, M=6, N_v=196, N_t=77.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimsSection {
    pub views: usize,
    pub patches: usize,
    pub text_len: usize,
    pub feat_dim: usize,
    pub quality_dim: usize,
    pub prompt_len: usize,
    pub mlp_hidden: usize,
    pub channels: usize,
    pub grid: usize,
    pub head_dims: Vec<usize>,
    pub encoder_rank: usize,
    pub dimension_names: Vec<String>,
}

impl Default for DimsSection {
    fn default() -> Self {
        Self {
            views: 2,
            patches: 4,
            text_len: 3,
            feat_dim: 16,
            quality_dim: 8,
            prompt_len: 2,
            mlp_hidden: 16,
            channels: 2,
            grid: 2,
            head_dims: vec![8, 4, 2, 1],
            encoder_rank: 8,
            dimension_names: DEFAULT_DIMENSION_NAMES
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

impl DimsSection {
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            feat_dim: self.feat_dim,
            quality_dim: self.quality_dim,
            dimension_names: self.dimension_names.clone(),
            prompt_len: self.prompt_len,
            mlp_hidden: self.mlp_hidden,
            channels: self.channels,
            grid: self.grid,
            head_dims: self.head_dims.clone(),
            encoder_rank: self.encoder_rank,
        }
    }

    pub fn feature_dims(&self) -> FeatureDims {
        FeatureDims {
            views: self.views,
            patches: self.patches,
            text_len: self.text_len,
            feat_dim: self.feat_dim,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_main: f64,
    pub lr_encoder: f64,
    pub lr_decay: f64,
    pub decay_every: usize,
    pub lambda: f64,
    pub epsilon: f64,
    pub folds: usize,
    pub weight_decay: f64,
    pub loss_mode: LossMode,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            batch_size: 8,
            epochs: 30,
            lr_main: 2e-4,
            lr_encoder: 2e-6,
            lr_decay: 0.9,
            decay_every: 5,
            lambda: 1.0,
            epsilon: 0.0,
            folds: 5,
            weight_decay: 1e-4,
            loss_mode: LossMode::Full,
        }
    }
}

impl TrainSection {
    pub fn train_config(&self, seed: u64) -> TrainConfig<f32> {
        TrainConfig {
            batch_size: self.batch_size,
            epochs: self.epochs,
            lr_main: self.lr_main as f32,
            lr_encoder: self.lr_encoder as f32,
            lr_decay: self.lr_decay as f32,
            decay_every: self.decay_every,
            lambda: self.lambda as f32,
            epsilon: self.epsilon as f32,
            folds: self.folds,
            seed,
            loss_mode: self.loss_mode,
            adam: AdamConfig {
                weight_decay: self.weight_decay as f32,
                ..AdamConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub prompts: usize,
    pub methods: Vec<String>,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            prompts: 16,
            methods: vec!["m0".into(), "m1".into()],
        }
    }
}

#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MosSection {
    /// Sample id of the extremely low-quality sentinel; trapping screening
    /// is skipped when absent.
    pub sentinel_id: Option<String>,
    /// The duplicated pair (original, repeat).
    pub duplicate_pair: Option<(String, String)>,
    pub t_low: u8,
    pub t_dup: u8,
}

impl MosSection {
    pub fn trapping_config(&self) -> TrappingConfig {
        TrappingConfig {
            low_threshold: if self.t_low == 0 { 3 } else { self.t_low },
            dup_threshold: if self.t_dup == 0 { 3 } else { self.t_dup },
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsSection {
    /// `"file"` correlates the predictions file; `"baseline"` computes the
    /// view-averaged cosine baseline from the feature containers.
    pub source: String,
    /// Map predictions through the 5-parameter logistic before PLCC.
    pub logistic: bool,
}

impl Default for StatsSection {
    fn default() -> Self {
        Self {
            source: "file".into(),
            logistic: false,
        }
    }
}

#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreSection {
    /// Also write each sample's raw per-dimension fusion-weight vectors to
    /// `out_dir/weights/<sample_id>.csv`.
    pub dump_weights: bool,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckSection {
    /// `"f64"` (tolerance 1e-4) or `"f32"` (tolerance 1e-2).
    pub precision: String,
}

impl Default for GradcheckSection {
    fn default() -> Self {
        Self {
            precision: "f64".into(),
        }
    }
}

/// Load the config file (or defaults), apply `--key value` overrides, and
/// return the config together with its canonical JSON and hash.
pub fn load_config(
    path: Option<&Path>,
    overrides: &[(String, String)],
) -> Result<(RunConfig, u64)> {
    let mut value: serde_json::Value = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| {
                CliError::Config(format!("cannot read config {}: {e}", p.display()))
            })?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("config {}: {e}", p.display())))?
        }
        None => serde_json::to_value(RunConfig::default())
            .map_err(|e| CliError::Config(e.to_string()))?,
    };
    for (key, raw) in overrides {
        apply_override(&mut value, key, raw)?;
    }
    let config: RunConfig = serde_json::from_value(value)
        .map_err(|e| CliError::Config(format!("invalid configuration: {e}")))?;
    let hash = config_hash(&config)?;
    Ok((config, hash))
}

/// Hash of the canonical (sorted-key) JSON form.
pub fn config_hash(config: &RunConfig) -> Result<u64> {
    let canonical = serde_json::to_string(
        &serde_json::to_value(config).map_err(|e| CliError::Config(e.to_string()))?,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(fnv1a64(canonical.as_bytes()))
}

fn apply_override(value: &mut serde_json::Value, key: &str, raw: &str) -> Result<()> {
    let parsed: serde_json::Value = match serde_json::from_str(raw) {
        Ok(v) => v,
        Err(_) => serde_json::Value::String(raw.to_string()),
    };
    let mut cursor = value;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let map = cursor.as_object_mut().ok_or_else(|| {
            CliError::Usage(format!(
                "--{key}: '{}' is not a config object",
                parts[..i].join(".")
            ))
        })?;
        if i + 1 == parts.len() {
            map.insert(part.to_string(), parsed);
            return Ok(());
        }
        cursor = map
            .entry(part.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    Err(CliError::Usage(format!("--{key}: empty key")))
}
