//! Pipeline configuration and its `key=value` file form.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use taskcorpus_core::corpus::DEFAULT_SCALE_LIMIT;
use taskcorpus_core::CyclePolicy;
use taskcorpus_nlg::{DecodeStrategy, LogitsFrom, ModelConfig, TrainConfig};

use crate::error::PipelineError;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// `None` selects the bundled lexicon (base categories plus modifiers).
    pub lexicon_path: Option<PathBuf>,
    /// Empty selects the bundled template set.
    pub template_paths: Vec<PathBuf>,
    /// `None` selects the bundled rules when `augment` is on.
    pub augmentation_rules_path: Option<PathBuf>,
    pub augment: bool,
    pub cycle_policy: CyclePolicy,
    pub scale_limit: usize,
    /// Scale gate: minimum lexicon coverage of the seed corpus.
    pub min_seed_coverage: f64,
    /// Scale gate: how many times the scale may be doubled.
    pub max_scale_retries: usize,

    pub embed_dim: usize,
    pub hidden: usize,
    pub decoder_hidden: usize,
    pub logits_from: LogitsFrom,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub rng_seed: u64,

    pub decoding: DecodeStrategy,
    pub max_len: usize,
    /// Unseen MR combinations added to the seed MRs for generation.
    pub fresh_mrs: usize,

    pub min_novelty: f64,
    pub min_validity: f64,
    pub min_distinct_2: f64,
    pub max_outer_iterations: usize,
    /// Added to the sampling temperature on each metric-gate retry.
    pub temperature_delta: f64,
    /// Extra training epochs on each metric-gate retry.
    pub epoch_increment: usize,

    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            lexicon_path: None,
            template_paths: Vec::new(),
            augmentation_rules_path: None,
            augment: true,
            cycle_policy: CyclePolicy::FullProduct,
            scale_limit: DEFAULT_SCALE_LIMIT,
            min_seed_coverage: 0.0,
            max_scale_retries: 3,
            embed_dim: 32,
            hidden: 32,
            decoder_hidden: 32,
            logits_from: LogitsFrom::Context,
            learning_rate: 1.0,
            epochs: 200,
            batch_size: 8,
            clip_norm: 5.0,
            rng_seed: 0,
            decoding: DecodeStrategy::Sample {
                temperature: 0.8,
                rng_seed: 0,
            },
            max_len: 20,
            fresh_mrs: 100,
            min_novelty: 0.1,
            min_validity: 0.8,
            min_distinct_2: 0.0,
            max_outer_iterations: 3,
            temperature_delta: 0.2,
            epoch_increment: 20,
            output_dir: PathBuf::from("taskcorpus-out"),
        }
    }
}

/// Keys accepted by [`PipelineConfig::set`], in file order.
pub const KEYS: &[&str] = &[
    "lexicon",
    "templates",
    "augmentation_rules",
    "augment",
    "cycle_policy",
    "scale_limit",
    "min_seed_coverage",
    "max_scale_retries",
    "embed_dim",
    "hidden",
    "decoder_hidden",
    "logits_from",
    "learning_rate",
    "epochs",
    "batch_size",
    "clip_norm",
    "rng_seed",
    "decoding",
    "max_len",
    "fresh_mrs",
    "min_novelty",
    "min_validity",
    "min_distinct_2",
    "max_outer_iterations",
    "temperature_delta",
    "epoch_increment",
    "output_dir",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, PipelineError> {
    value
        .parse()
        .map_err(|_| PipelineError::Config(format!("{key}: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, PipelineError> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(PipelineError::Config(format!(
            "{key}: expected true or false, got `{value}`"
        ))),
    }
}

fn optional_path(value: &str) -> Option<PathBuf> {
    match value {
        "" | "bundled" => None,
        p => Some(PathBuf::from(p)),
    }
}

impl PipelineConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), PipelineError> {
        let value = value.trim();
        match key {
            "lexicon" => self.lexicon_path = optional_path(value),
            "templates" => {
                self.template_paths = value
                    .split(',')
                    .map(str::trim)
                    .filter(|p| !p.is_empty() && *p != "bundled")
                    .map(PathBuf::from)
                    .collect()
            }
            "augmentation_rules" => self.augmentation_rules_path = optional_path(value),
            "augment" => self.augment = parse_bool(key, value)?,
            "cycle_policy" => self.cycle_policy = value.parse().map_err(|e| PipelineError::Config(format!("{e}")))?,
            "scale_limit" => self.scale_limit = parse(key, value)?,
            "min_seed_coverage" => self.min_seed_coverage = parse(key, value)?,
            "max_scale_retries" => self.max_scale_retries = parse(key, value)?,
            "embed_dim" => self.embed_dim = parse(key, value)?,
            "hidden" => self.hidden = parse(key, value)?,
            "decoder_hidden" => self.decoder_hidden = parse(key, value)?,
            "logits_from" => self.logits_from = value.parse().map_err(|e| PipelineError::Config(format!("{e}")))?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "clip_norm" => self.clip_norm = parse(key, value)?,
            "rng_seed" => self.rng_seed = parse(key, value)?,
            "decoding" => self.decoding = value.parse().map_err(|e| PipelineError::Config(format!("{e}")))?,
            "max_len" => self.max_len = parse(key, value)?,
            "fresh_mrs" => self.fresh_mrs = parse(key, value)?,
            "min_novelty" => self.min_novelty = parse(key, value)?,
            "min_validity" => self.min_validity = parse(key, value)?,
            "min_distinct_2" => self.min_distinct_2 = parse(key, value)?,
            "max_outer_iterations" => self.max_outer_iterations = parse(key, value)?,
            "temperature_delta" => self.temperature_delta = parse(key, value)?,
            "epoch_increment" => self.epoch_increment = parse(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            other => return Err(PipelineError::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines over the current values. `#` starts a comment line.
    pub fn apply_text(&mut self, text: &str) -> Result<(), PipelineError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| PipelineError::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k.trim(), v)
                .map_err(|e| PipelineError::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Canonical `key = value` text; [`apply_text`](Self::apply_text) reads it back.
    pub fn to_text(&self) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map_or("bundled".to_owned(), |p| p.display().to_string());
        let templates = if self.template_paths.is_empty() {
            "bundled".to_owned()
        } else {
            self.template_paths
                .iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let values: Vec<String> = vec![
            path(&self.lexicon_path),
            templates,
            path(&self.augmentation_rules_path),
            self.augment.to_string(),
            self.cycle_policy.to_string(),
            self.scale_limit.to_string(),
            self.min_seed_coverage.to_string(),
            self.max_scale_retries.to_string(),
            self.embed_dim.to_string(),
            self.hidden.to_string(),
            self.decoder_hidden.to_string(),
            self.logits_from.to_string(),
            self.learning_rate.to_string(),
            self.epochs.to_string(),
            self.batch_size.to_string(),
            self.clip_norm.to_string(),
            self.rng_seed.to_string(),
            self.decoding.to_string(),
            self.max_len.to_string(),
            self.fresh_mrs.to_string(),
            self.min_novelty.to_string(),
            self.min_validity.to_string(),
            self.min_distinct_2.to_string(),
            self.max_outer_iterations.to_string(),
            self.temperature_delta.to_string(),
            self.epoch_increment.to_string(),
            self.output_dir.display().to_string(),
        ];
        let mut out = String::new();
        for (k, v) in KEYS.iter().zip(values) {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Hex SHA-256 of everything except the output directory.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        hex::encode(Sha256::digest(c.to_text().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        for (name, v) in [
            ("min_novelty", self.min_novelty),
            ("min_validity", self.min_validity),
            ("min_distinct_2", self.min_distinct_2),
            ("min_seed_coverage", self.min_seed_coverage),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(PipelineError::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.scale_limit == 0 {
            return Err(PipelineError::Config("scale_limit must be at least 1".into()));
        }
        if self.max_len == 0 {
            return Err(PipelineError::Config("max_len must be at least 1".into()));
        }
        if !(self.temperature_delta.is_finite() && self.temperature_delta >= 0.0) {
            return Err(PipelineError::Config("temperature_delta must be non-negative".into()));
        }
        self.model_config().validate()?;
        self.train_config(self.epochs, 0).validate()?;
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            embed_dim: self.embed_dim,
            hidden: self.hidden,
            decoder_hidden: self.decoder_hidden,
            logits_from: self.logits_from,
            ..ModelConfig::default()
        }
    }

    pub fn train_config(&self, epochs: usize, rng_seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs,
            batch_size: self.batch_size,
            rng_seed,
            clip_norm: self.clip_norm,
        }
    }
}
