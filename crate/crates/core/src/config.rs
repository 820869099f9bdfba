//! Model and training configuration with a flat `key=value` text form.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected key=value")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`")]
    BadValue { key: String, value: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Softmax,
    Sigmoid,
}

impl ScoreKind {
    pub fn name(self) -> &'static str {
        match self {
            ScoreKind::Softmax => "softmax",
            ScoreKind::Sigmoid => "sigmoid",
        }
    }
}

impl FromStr for ScoreKind {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "softmax" => Ok(ScoreKind::Softmax),
            "sigmoid" => Ok(ScoreKind::Sigmoid),
            _ => Err(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    pub fn bits(self) -> u8 {
        match self {
            Precision::F32 => 32,
            Precision::F64 => 64,
        }
    }

    pub fn from_bits(bits: u8) -> Option<Self> {
        match bits {
            32 => Some(Precision::F32),
            64 => Some(Precision::F64),
            _ => None,
        }
    }
}

/// The three code modalities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Tok,
    Ast,
    Cfg,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Tok, Modality::Ast, Modality::Cfg];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Tok => "tok",
            Modality::Ast => "ast",
            Modality::Cfg => "cfg",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for Modality {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "tok" => Ok(Modality::Tok),
            "ast" => Ok(Modality::Ast),
            "cfg" => Ok(Modality::Cfg),
            _ => Err(()),
        }
    }
}

/// Training hyperparameters and network sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub margin: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub epochs: usize,
    pub seed: u64,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub common_dim: usize,
    pub ggnn_rounds: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            margin: 0.05,
            batch_size: 32,
            learning_rate: 1e-4,
            dropout: 0.1,
            epochs: 100,
            seed: 42,
            embed_dim: 32,
            hidden_dim: 64,
            common_dim: 64,
            ggnn_rounds: 5,
        }
    }
}

/// Upper bounds on vocabulary sizes, reserved entries included.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabCaps {
    pub code_vocab_size: usize,
    pub ast_vocab_size: usize,
    pub desc_vocab_size: usize,
}

impl Default for VocabCaps {
    fn default() -> Self {
        Self {
            code_vocab_size: 10_000,
            ast_vocab_size: 10_000,
            desc_vocab_size: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub modalities: Vec<Modality>,
    pub attention: bool,
    pub scores: [ScoreKind; 3],
    pub precision: Precision,
    pub hyper: Hyperparams,
    pub vocab: VocabCaps,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            modalities: Modality::ALL.to_vec(),
            attention: true,
            scores: [ScoreKind::Softmax, ScoreKind::Softmax, ScoreKind::Sigmoid],
            precision: Precision::F32,
            hyper: Hyperparams::default(),
            vocab: VocabCaps::default(),
        }
    }
}

const KEYS: &[&str] = &[
    "margin",
    "batch_size",
    "learning_rate",
    "dropout",
    "epochs",
    "seed",
    "embed_dim",
    "hidden_dim",
    "common_dim",
    "ggnn_rounds",
    "modalities",
    "attention",
    "tok_score",
    "ast_score",
    "cfg_score",
    "precision",
    "code_vocab_size",
    "ast_vocab_size",
    "desc_vocab_size",
];

impl ModelConfig {
    pub fn enabled(&self, m: Modality) -> bool {
        self.modalities.contains(&m)
    }

    pub fn score(&self, m: Modality) -> ScoreKind {
        self.scores[m.index()]
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
        };
        fn num<T: FromStr>(v: &str, bad: impl Fn() -> ConfigError) -> Result<T, ConfigError> {
            v.parse().map_err(|_| bad())
        }
        let h = &mut self.hyper;
        match key {
            "margin" => h.margin = num(value, bad)?,
            "batch_size" => h.batch_size = num(value, bad)?,
            "learning_rate" => h.learning_rate = num(value, bad)?,
            "dropout" => h.dropout = num(value, bad)?,
            "epochs" => h.epochs = num(value, bad)?,
            "seed" => h.seed = num(value, bad)?,
            "embed_dim" => h.embed_dim = num(value, bad)?,
            "hidden_dim" => h.hidden_dim = num(value, bad)?,
            "common_dim" => h.common_dim = num(value, bad)?,
            "ggnn_rounds" => h.ggnn_rounds = num(value, bad)?,
            "modalities" => {
                let mut ms = Vec::new();
                for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                    let m: Modality = part.parse().map_err(|_| bad())?;
                    if !ms.contains(&m) {
                        ms.push(m);
                    }
                }
                ms.sort();
                self.modalities = ms;
            }
            "attention" => self.attention = num(value, bad)?,
            "tok_score" => self.scores[0] = value.parse().map_err(|_| bad())?,
            "ast_score" => self.scores[1] = value.parse().map_err(|_| bad())?,
            "cfg_score" => self.scores[2] = value.parse().map_err(|_| bad())?,
            "precision" => {
                self.precision = Precision::from_bits(num(value, bad)?).ok_or_else(bad)?
            }
            "code_vocab_size" => self.vocab.code_vocab_size = num(value, bad)?,
            "ast_vocab_size" => self.vocab.ast_vocab_size = num(value, bad)?,
            "desc_vocab_size" => self.vocab.desc_vocab_size = num(value, bad)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Text value of one key.
    pub fn get(&self, key: &str) -> Option<String> {
        let h = &self.hyper;
        Some(match key {
            "margin" => h.margin.to_string(),
            "batch_size" => h.batch_size.to_string(),
            "learning_rate" => h.learning_rate.to_string(),
            "dropout" => h.dropout.to_string(),
            "epochs" => h.epochs.to_string(),
            "seed" => h.seed.to_string(),
            "embed_dim" => h.embed_dim.to_string(),
            "hidden_dim" => h.hidden_dim.to_string(),
            "common_dim" => h.common_dim.to_string(),
            "ggnn_rounds" => h.ggnn_rounds.to_string(),
            "modalities" => self
                .modalities
                .iter()
                .map(|m| m.name())
                .collect::<Vec<_>>()
                .join(","),
            "attention" => self.attention.to_string(),
            "tok_score" => self.scores[0].name().to_string(),
            "ast_score" => self.scores[1].name().to_string(),
            "cfg_score" => self.scores[2].name().to_string(),
            "precision" => self.precision.bits().to_string(),
            "code_vocab_size" => self.vocab.code_vocab_size.to_string(),
            "ast_vocab_size" => self.vocab.ast_vocab_size.to_string(),
            "desc_vocab_size" => self.vocab.desc_vocab_size.to_string(),
            _ => return None,
        })
    }

    /// Parses `key=value` lines over the defaults. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key}={}", self.get(key).expect("known key"));
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let h = &self.hyper;
        let fail = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !(h.margin > 0.0 && h.margin.is_finite()) {
            return fail("margin must be positive");
        }
        if h.batch_size == 0 {
            return fail("batch_size must be at least 1");
        }
        if !(0.0..1.0).contains(&h.dropout) {
            return fail("dropout must lie in [0, 1)");
        }
        if !(h.learning_rate > 0.0 && h.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if h.embed_dim == 0 || h.hidden_dim == 0 || h.common_dim == 0 {
            return fail("dimensions must be positive");
        }
        if self.modalities.is_empty() {
            return fail("at least one modality must be enabled");
        }
        let caps = &self.vocab;
        if caps.code_vocab_size < 2 || caps.ast_vocab_size < 2 || caps.desc_vocab_size < 2 {
            return fail("vocabulary caps must leave room for the reserved entries");
        }
        Ok(())
    }
}
