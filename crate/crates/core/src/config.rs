//! Resolved run configuration: defaults, overridden by a config file,
//! overridden by command-line flags. The resolved settings are echoed into
//! every artifact together with their fingerprint.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::SplitPlan;
use crate::embeddings;
use crate::error::{Error, Result};
use crate::models::{MergeKind, ModelDims, ModelKind, TrainConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelKind,
    /// Seeds used by experiment protocols: `seed, seed+1, ..`.
    pub seed_count: usize,

    // [embeddings]
    pub embedding_dim: usize,
    pub bucket_count: u64,
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub hash_seed: u64,
    pub train_buckets: bool,
    pub train_words: bool,
    pub vectors_path: Option<String>,
    pub contextual_path: Option<String>,

    // [encoder]
    pub hidden_dim: usize,
    pub attn_dim: usize,
    pub share_encoders: bool,

    // [models]
    pub dropout_p: f32,
    pub merge: MergeKind,

    // [train]
    pub batch_size: usize,
    pub learning_rate: f32,
    pub max_epochs: usize,
    pub patience: usize,
    pub topic_cap: usize,
    pub body_cap: usize,
    pub dropout_enabled: bool,

    // [corpus]
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub test_fraction: f64,
    pub preserve_case: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        RunConfig {
            seed: 1,
            model: ModelKind::Model1,
            seed_count: 5,
            embedding_dim: embeddings::DEFAULT_DIM,
            bucket_count: embeddings::DEFAULT_BUCKET_COUNT,
            ngram_min: embeddings::DEFAULT_NGRAM_MIN,
            ngram_max: embeddings::DEFAULT_NGRAM_MAX,
            hash_seed: 0,
            train_buckets: true,
            train_words: false,
            vectors_path: None,
            contextual_path: None,
            hidden_dim: 100,
            attn_dim: 100,
            share_encoders: false,
            dropout_p: 0.2,
            merge: MergeKind::Concat,
            batch_size: train.batch_size,
            learning_rate: train.learning_rate,
            max_epochs: train.max_epochs,
            patience: train.patience,
            topic_cap: train.topic_cap,
            body_cap: train.body_cap,
            dropout_enabled: train.dropout_enabled,
            train_fraction: 0.7,
            validation_fraction: 0.1,
            test_fraction: 0.2,
            preserve_case: false,
        }
    }
}

impl RunConfig {
    pub fn model_dims(&self) -> ModelDims {
        ModelDims {
            embedding_dim: self.embedding_dim,
            hidden_dim: self.hidden_dim,
            attn_dim: self.attn_dim,
            share_encoders: self.share_encoders,
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            max_epochs: self.max_epochs,
            patience: self.patience,
            topic_cap: self.topic_cap,
            body_cap: self.body_cap,
            dropout_enabled: self.dropout_enabled,
            stop_at_val_accuracy: None,
        }
    }

    pub fn split_plan(&self, seed: u64) -> SplitPlan {
        SplitPlan {
            seed,
            fractions: [
                self.train_fraction,
                self.validation_fraction,
                self.test_fraction,
            ],
            stratify_by_domain: true,
        }
    }

    pub fn protocol_seeds(&self) -> Vec<u64> {
        (0..self.seed_count as u64).map(|i| self.seed + i).collect()
    }

    /// Canonical `section.key = value` lines, sorted; the basis of the
    /// fingerprint and of the echo embedded in artifacts.
    pub fn canonical_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("corpus.preserve_case = {}", self.preserve_case),
            format!("corpus.test_fraction = {}", self.test_fraction),
            format!("corpus.train_fraction = {}", self.train_fraction),
            format!("corpus.validation_fraction = {}", self.validation_fraction),
            format!("embeddings.bucket_count = {}", self.bucket_count),
            format!("embeddings.dim = {}", self.embedding_dim),
            format!("embeddings.hash_seed = {}", self.hash_seed),
            format!("embeddings.ngram_max = {}", self.ngram_max),
            format!("embeddings.ngram_min = {}", self.ngram_min),
            format!("embeddings.train_buckets = {}", self.train_buckets),
            format!("embeddings.train_words = {}", self.train_words),
            format!("encoder.attn_dim = {}", self.attn_dim),
            format!("encoder.hidden_dim = {}", self.hidden_dim),
            format!("encoder.share_encoders = {}", self.share_encoders),
            format!("models.dropout = {}", self.dropout_p),
            format!("models.merge = {}", self.merge.as_str()),
            format!("run.model = {}", self.model.as_str()),
            format!("run.seed = {}", self.seed),
            format!("run.seed_count = {}", self.seed_count),
            format!("train.batch_size = {}", self.batch_size),
            format!("train.body_cap = {}", self.body_cap),
            format!("train.dropout_enabled = {}", self.dropout_enabled),
            format!("train.learning_rate = {}", self.learning_rate),
            format!("train.max_epochs = {}", self.max_epochs),
            format!("train.patience = {}", self.patience),
            format!("train.topic_cap = {}", self.topic_cap),
        ];
        if let Some(p) = &self.vectors_path {
            lines.push(format!("embeddings.vectors_path = {p}"));
        }
        if let Some(p) = &self.contextual_path {
            lines.push(format!("embeddings.contextual_path = {p}"));
        }
        lines.sort();
        lines
    }

    /// Stable hash of the resolved settings.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for line in self.canonical_lines() {
            for b in line.bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
            h ^= b'\n' as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }

    pub fn echo_json(&self) -> serde_json::Value {
        serde_json::json!({
            "fingerprint": self.fingerprint(),
            "settings": self.canonical_lines(),
        })
    }

    /// Applies one `section.key = value` setting.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| {
            Error::Config(format!("bad value {value:?} for [{section}] {key} ({what})"))
        };
        macro_rules! parse {
            ($what:expr) => {
                value.parse().map_err(|_| bad($what))?
            };
        }
        match (section, key) {
            ("run", "seed") => self.seed = parse!("integer"),
            ("run", "model") => {
                self.model = ModelKind::parse(value).ok_or_else(|| bad("model1|model2"))?
            }
            ("run", "seed_count") => self.seed_count = parse!("integer"),
            ("embeddings", "dim") => self.embedding_dim = parse!("integer"),
            ("embeddings", "bucket_count") => self.bucket_count = parse!("integer"),
            ("embeddings", "ngram_min") => self.ngram_min = parse!("integer"),
            ("embeddings", "ngram_max") => self.ngram_max = parse!("integer"),
            ("embeddings", "hash_seed") => self.hash_seed = parse!("integer"),
            ("embeddings", "train_buckets") => self.train_buckets = parse!("bool"),
            ("embeddings", "train_words") => self.train_words = parse!("bool"),
            ("embeddings", "vectors_path") => self.vectors_path = Some(value.to_string()),
            ("embeddings", "contextual_path") => self.contextual_path = Some(value.to_string()),
            ("encoder", "hidden_dim") => self.hidden_dim = parse!("integer"),
            ("encoder", "attn_dim") => self.attn_dim = parse!("integer"),
            ("encoder", "share_encoders") => self.share_encoders = parse!("bool"),
            ("models", "dropout") => self.dropout_p = parse!("float"),
            ("models", "merge") => {
                self.merge = MergeKind::parse(value).ok_or_else(|| bad("concat|sum"))?
            }
            ("train", "batch_size") => self.batch_size = parse!("integer"),
            ("train", "learning_rate") => self.learning_rate = parse!("float"),
            ("train", "max_epochs") => self.max_epochs = parse!("integer"),
            ("train", "patience") => self.patience = parse!("integer"),
            ("train", "topic_cap") => self.topic_cap = parse!("integer"),
            ("train", "body_cap") => self.body_cap = parse!("integer"),
            ("train", "dropout_enabled") => self.dropout_enabled = parse!("bool"),
            ("corpus", "train_fraction") => self.train_fraction = parse!("float"),
            ("corpus", "validation_fraction") => self.validation_fraction = parse!("float"),
            ("corpus", "test_fraction") => self.test_fraction = parse!("float"),
            ("corpus", "preserve_case") => self.preserve_case = parse!("bool"),
            _ => {
                return Err(Error::Config(format!(
                    "unknown setting [{section}] {key}"
                )))
            }
        }
        Ok(())
    }

    /// Merges a flat key-value config file with `[section]` headers on top
    /// of the current values.
    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)?;
        let mut section = String::from("run");
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("expected `key = value`, got {line:?}"),
                });
            };
            self.set(&section, key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("{} (line {})", e, idx + 1)))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config(self.seed).validate()?;
        if self.seed_count == 0 {
            return Err(Error::Config("seed_count must be positive".into()));
        }
        if self.embedding_dim == 0 || self.hidden_dim == 0 || self.attn_dim == 0 {
            return Err(Error::Config("dimensions must be positive".into()));
        }
        Ok(())
    }

    /// Rendering used by `--help` and reports.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for l in self.canonical_lines() {
            let _ = writeln!(out, "{l}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fingerprint_is_stable_and_sensitive() {
        let a = RunConfig::default();
        let b = RunConfig::default();
        assert_eq!(a.fingerprint(), b.fingerprint());
        let mut c = RunConfig::default();
        c.seed = 2;
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn config_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fnd.conf");
        fs::write(
            &path,
            "# comment\n[train]\nbatch_size = 4\nlearning_rate = 0.01\n[encoder]\nhidden_dim = 32\n",
        )
        .unwrap();
        let mut cfg = RunConfig::default();
        cfg.merge_file(&path).unwrap();
        assert_eq!(cfg.batch_size, 4);
        assert_eq!(cfg.hidden_dim, 32);
        assert!((cfg.learning_rate - 0.01).abs() < 1e-9);
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let mut cfg = RunConfig::default();
        let err = cfg.set("train", "bogus", "1").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(cfg.set("train", "batch_size", "not-a-number").is_err());
    }
}
