//! Flat `key = value` experiment configuration.

use std::path::{Path, PathBuf};

use hitnet_core::decoders::{DecoderKind, Hyper};
use hitnet_core::train::TrainConfig;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("bad value for `{key}`: {value}")]
    BadValue { key: String, value: String },
    #[error("`seeds` must not be empty")]
    NoSeeds,
    #[error("`archs` must not be empty")]
    NoArchs,
    #[error("test length {0} overlaps the training lengths (<= {1})")]
    TestOverlapsTrain(usize, usize),
    #[error("no spec file given")]
    NoSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub spec: Option<PathBuf>,
    pub archs: Vec<DecoderKind>,
    pub seeds: Vec<u64>,
    pub train_max_len: usize,
    /// Whether training and test words use inverse letters.
    pub inverses: bool,
    pub test_lengths: Vec<usize>,
    pub samples_per_word: usize,
    pub epochs: usize,
    pub patience: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub warmup: usize,
    /// Samples per optimizer step; 0 uses every sample of the word.
    pub batch_size: usize,
    pub desk: f64,
    pub test_cap: usize,
    pub threads: usize,
    pub out: PathBuf,
    pub hyper: Hyper,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        ExperimentConfig {
            spec: None,
            archs: vec![
                DecoderKind::Transport,
                DecoderKind::Homotopy,
                DecoderKind::Cover,
                DecoderKind::TransformerWC,
                DecoderKind::TransportAttention,
            ],
            seeds: vec![42, 179, 316],
            train_max_len: 2,
            inverses: false,
            test_lengths: vec![3, 4, 6, 8, 10],
            samples_per_word: t.samples_per_word,
            epochs: t.epochs,
            patience: t.patience,
            lr: t.lr,
            weight_decay: t.weight_decay,
            warmup: t.warmup,
            batch_size: 0,
            desk: 0.1,
            test_cap: 64,
            threads: 0,
            out: PathBuf::from("out"),
            hyper: Hyper::default(),
        }
    }
}

fn list<T, F: Fn(&str) -> Option<T>>(key: &str, v: &str, f: F) -> Result<Vec<T>, ConfigError> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| f(s).ok_or_else(|| ConfigError::BadValue { key: key.into(), value: s.into() }))
        .collect()
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| ConfigError::BadValue { key: key.into(), value: v.into() })
}

impl ExperimentConfig {
    /// Apply one `key = value` setting. Relative paths resolve against `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "spec" => self.spec = Some(base.join(v)),
            "archs" => self.archs = list(key, v, DecoderKind::parse)?,
            "seeds" => self.seeds = list(key, v, |s| s.parse().ok())?,
            "train_max_len" => self.train_max_len = num(key, v)?,
            "inverses" => self.inverses = num(key, v)?,
            "test_lengths" => self.test_lengths = list(key, v, |s| s.parse().ok())?,
            "samples_per_word" => self.samples_per_word = num(key, v)?,
            "epochs" => self.epochs = num(key, v)?,
            "patience" => self.patience = num(key, v)?,
            "lr" => self.lr = num(key, v)?,
            "weight_decay" => self.weight_decay = num(key, v)?,
            "warmup" => self.warmup = num(key, v)?,
            "batch_size" => self.batch_size = num(key, v)?,
            "desk" => self.desk = num(key, v)?,
            "test_cap" => self.test_cap = num(key, v)?,
            "threads" => self.threads = num(key, v)?,
            "out" => self.out = base.join(v),
            "gen_hidden" => self.hyper.gen_hidden = num(key, v)?,
            "gen_layers" => self.hyper.gen_layers = num(key, v)?,
            "homotopy_hidden" => self.hyper.homotopy_hidden = num(key, v)?,
            "width" => self.hyper.width = num(key, v)?,
            "heads" => self.hyper.heads = num(key, v)?,
            "layers" => self.hyper.layers = num(key, v)?,
            "ff" => self.hyper.ff = num(key, v)?,
            "max_positions" => self.hyper.max_positions = num(key, v)?,
            "cover_hidden" => self.hyper.cover_hidden = num(key, v)?,
            "gru_hidden" => self.hyper.gru_hidden = num(key, v)?,
            _ => return Err(ConfigError::UnknownKey { line: 0, key: key.into() }),
        }
        Ok(())
    }

    pub fn parse(text: &str, base: &Path) -> Result<ExperimentConfig, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            cfg.set(k.trim(), v, base).map_err(|e| match e {
                ConfigError::UnknownKey { key, .. } => ConfigError::UnknownKey { line: i + 1, key },
                e => e,
            })?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.spec.is_none() {
            return Err(ConfigError::NoSpec);
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::NoSeeds);
        }
        if self.archs.is_empty() {
            return Err(ConfigError::NoArchs);
        }
        if let Some(&l) = self.test_lengths.iter().find(|&&l| l <= self.train_max_len) {
            return Err(ConfigError::TestOverlapsTrain(l, self.train_max_len));
        }
        if !(self.desk > 0.0) {
            return Err(ConfigError::BadValue { key: "desk".into(), value: self.desk.to_string() });
        }
        if self.hyper.max_positions < self.test_lengths.iter().copied().max().unwrap_or(0) {
            return Err(ConfigError::BadValue { key: "max_positions".into(), value: self.hyper.max_positions.to_string() });
        }
        Ok(())
    }

    /// Training settings after the desk factor.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            samples_per_word: self.samples_per_word,
            epochs: self.epochs,
            patience: self.patience,
            lr: self.lr,
            weight_decay: self.weight_decay,
            warmup: self.warmup,
            batch_size: self.batch_size,
            ..TrainConfig::default()
        }
        .desk(self.desk)
    }
}
