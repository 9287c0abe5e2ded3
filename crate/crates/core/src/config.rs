//! Experiment configuration in TOML. Every section rejects unknown keys.
//!
//! ```toml
//! seed = 3                  # optional; overrides both model seeds
//! out_dir = "runs/demo"
//!
//! [data]
//! train = "data/train.jsonl"
//! dev = "data/dev.jsonl"
//! test = "data/test.jsonl"
//!
//! [classifier]
//! epochs = 10
//!
//! [sacg]
//! learning_rate = 0.001
//! lambda = 1.0
//!
//! [eval]
//! lm_order = 3
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::ClassifierConfig;
use crate::error::{Error, Result};
use crate::eval::{EvalOptions, Pooling};
use crate::sacg::SacgConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub refs: Option<PathBuf>,
    pub trees: Option<PathBuf>,
    pub max_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub lm_order: usize,
    pub pooling: Pooling,
    pub stopwords: Vec<String>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            lm_order: 3,
            pooling: Pooling::Mean,
            stopwords: Vec::new(),
        }
    }
}

impl EvalConfig {
    pub fn options(&self) -> EvalOptions {
        EvalOptions {
            pooling: self.pooling,
            stopwords: self.stopwords.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub data: DataConfig,
    pub classifier: ClassifierConfig,
    pub sacg: SacgConfig,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: None,
            out_dir: PathBuf::from("runs/default"),
            data: DataConfig {
                max_len: crate::syntax::DEFAULT_MAX_LEN,
                ..Default::default()
            },
            classifier: ClassifierConfig::default(),
            sacg: SacgConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses TOML text, applies the top-level seed, and validates.
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(seed) = cfg.seed {
            cfg.classifier.seed = seed;
            cfg.sacg.seed = seed;
        }
        if cfg.data.max_len == 0 {
            cfg.data.max_len = crate::syntax::DEFAULT_MAX_LEN;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative data paths and `out_dir` resolve
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.out_dir);
        for p in [
            &mut cfg.data.train,
            &mut cfg.data.dev,
            &mut cfg.data.test,
            &mut cfg.data.refs,
            &mut cfg.data.trees,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.classifier.validate()?;
        self.sacg.validate()?;
        if self.eval.lm_order == 0 || self.eval.lm_order > 3 {
            return Err(Error::Config("eval.lm_order must be 1, 2 or 3".into()));
        }
        Ok(())
    }

    pub fn require(path: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
        path.clone().ok_or_else(|| Error::Config(format!("missing `{key}`")))
    }
}
