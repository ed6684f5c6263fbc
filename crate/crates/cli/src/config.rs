//! Run configuration: TOML file, flag overrides (flags win), and a
//! content hash that stamps every artifact directory.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use xling_core::corpus::FilterConfig;
use xling_core::encoder::{EncoderSpec, PoolingStrategy};
use xling_core::objectives::MnrlConfig;
use xling_core::trainer::{Recipe, TrainConfig, TrainStep};
use xling_core::CoreError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub mnrl_scale: f64,
}

impl StageConfig {
    fn nli() -> StageConfig {
        StageConfig {
            epochs: 1,
            batch_size: 4,
            learning_rate: 2e-5,
            weight_decay: 0.01,
            mnrl_scale: 20.0,
        }
    }

    fn sts() -> StageConfig {
        StageConfig {
            epochs: 4,
            ..StageConfig::nli()
        }
    }
}

impl Default for StageConfig {
    fn default() -> Self {
        StageConfig::nli()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub max_len: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            dim: 64,
            layers: 2,
            heads: 4,
            ffn_dim: 128,
            max_len: 128,
        }
    }
}

impl EncoderConfig {
    pub fn to_spec(&self) -> EncoderSpec {
        EncoderSpec {
            vocab_size: 0,
            dim: self.dim,
            layers: self.layers,
            heads: self.heads,
            ffn_dim: self.ffn_dim,
            max_len: self.max_len,
        }
    }
}

fn default_filters() -> FilterConfig {
    FilterConfig {
        strip_punctuation: true,
        strip_urls: true,
        strip_hashtags: true,
        strip_roman: false,
        collapse_whitespace: true,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: PathBuf,
    /// Language tags to use; empty means every manifest language,
    /// in manifest (sorted) order.
    pub languages: Vec<String>,
    pub recipe: String,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub pooling: String,
    /// Also evaluate the full language × language similarity grid.
    pub crosslingual: bool,
    pub filters: FilterConfig,
    pub encoder: EncoderConfig,
    pub nli: StageConfig,
    pub sts: StageConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifest: PathBuf::from("manifest.toml"),
            languages: Vec::new(),
            recipe: "two_step".to_string(),
            seed: 42,
            output_dir: PathBuf::from("runs"),
            pooling: "mean".to_string(),
            crosslingual: false,
            filters: default_filters(),
            encoder: EncoderConfig::default(),
            nli: StageConfig::nli(),
            sts: StageConfig::sts(),
        }
    }
}

/// Flag-level overrides; every field beats the config file when set.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub manifest: Option<PathBuf>,
    pub languages: Option<Vec<String>>,
    pub recipe: Option<String>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub pooling: Option<String>,
    pub crosslingual: Option<bool>,
}

impl RunConfig {
    pub fn load(file: Option<&Path>, overrides: &Overrides) -> xling_core::error::Result<RunConfig> {
        let mut config = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CoreError::io(path.display().to_string(), e))?;
                toml::from_str(&text)
                    .map_err(|e| CoreError::Config(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = &overrides.manifest {
            config.manifest = v.clone();
        }
        if let Some(v) = &overrides.languages {
            config.languages = v.clone();
        }
        if let Some(v) = &overrides.recipe {
            config.recipe = v.clone();
        }
        if let Some(v) = overrides.seed {
            config.seed = v;
        }
        if let Some(v) = &overrides.output_dir {
            config.output_dir = v.clone();
        }
        if let Some(v) = &overrides.pooling {
            config.pooling = v.clone();
        }
        if let Some(v) = overrides.crosslingual {
            config.crosslingual = v;
        }
        if let Ok(dir) = std::env::var("XLING_OUTPUT_DIR") {
            if !dir.is_empty() {
                config.output_dir = PathBuf::from(dir);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> xling_core::error::Result<()> {
        self.recipe()?;
        self.pooling()?;
        self.encoder.to_spec().validate()?;
        Ok(())
    }

    pub fn recipe(&self) -> xling_core::error::Result<Recipe> {
        self.recipe.parse().map_err(CoreError::Config)
    }

    pub fn pooling(&self) -> xling_core::error::Result<PoolingStrategy> {
        match self.pooling.as_str() {
            "mean" => Ok(PoolingStrategy::Mean),
            "cls" => Ok(PoolingStrategy::Cls),
            other => Err(CoreError::Config(format!("unknown pooling {other:?}"))),
        }
    }

    pub fn nli_train_config(&self) -> xling_core::error::Result<TrainConfig> {
        Ok(TrainConfig {
            step: TrainStep::Nli,
            epochs: self.nli.epochs,
            batch_size: self.nli.batch_size,
            learning_rate: self.nli.learning_rate,
            weight_decay: self.nli.weight_decay,
            seed: self.seed,
            pooling: self.pooling()?,
            mnrl: MnrlConfig {
                scale: self.nli.mnrl_scale,
            },
        })
    }

    pub fn sts_train_config(&self) -> xling_core::error::Result<TrainConfig> {
        Ok(TrainConfig {
            step: TrainStep::Sts,
            epochs: self.sts.epochs,
            batch_size: self.sts.batch_size,
            learning_rate: self.sts.learning_rate,
            weight_decay: self.sts.weight_decay,
            seed: self.seed,
            pooling: self.pooling()?,
            mnrl: MnrlConfig {
                scale: self.sts.mnrl_scale,
            },
        })
    }

    /// Stable hash of the resolved configuration. Artifact directories
    /// and embedded provenance use this, so equal configs land in the
    /// same place and different configs never collide.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut hex = String::with_capacity(24);
        for byte in digest.iter().take(12) {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }

    /// Per-run artifact directory, stamped by config hash and seed
    /// (never by wall time, so reruns are byte-reproducible).
    pub fn run_dir(&self) -> PathBuf {
        self.output_dir
            .join(format!("run-{}-s{}", self.hash(), self.seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn flag_overrides_beat_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "seed = 7\nrecipe = \"one_step\"\n").unwrap();
        let overrides = Overrides {
            seed: Some(9),
            ..Default::default()
        };
        let config = RunConfig::load(Some(&path), &overrides).unwrap();
        assert_eq!(config.seed, 9);
        assert_eq!(config.recipe, "one_step");
    }

    #[test]
    fn unknown_key_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "sede = 7\n").unwrap();
        let err = RunConfig::load(Some(&path), &Overrides::default()).unwrap_err();
        assert!(matches!(err, CoreError::Config(_)));
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        assert_eq!(a.hash(), b.hash());
        b.seed = 43;
        assert_ne!(a.hash(), b.hash());
    }
}
