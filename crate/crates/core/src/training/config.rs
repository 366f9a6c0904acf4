use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::parser::ParserOptions;
use crate::treelstm::{BridgeMode, Feed, ModelConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Adam,
    RmsProp,
}

impl OptimizerKind {
    pub fn default_learning_rate(self) -> f64 {
        match self {
            OptimizerKind::Adam => 1e-5,
            OptimizerKind::RmsProp => 5e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    Direct,
    AutoencoderPretrain,
}

pub const LR_RANGE: (f64, f64) = (1e-6, 1e-4);

/// Training hyperparameters, read from a flat `key = value` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    /// `None` picks the optimizer's default.
    pub learning_rate: Option<f64>,
    /// Accept learning rates outside [`LR_RANGE`] (smoke tests).
    pub allow_any_lr: bool,
    pub alpha: f64,
    pub beta: f64,
    pub dropout: f64,
    pub layers: usize,
    pub state: usize,
    /// Embedding width; `None` means `state`.
    pub embed: Option<usize>,
    /// Output projection width; `None` means `state`.
    pub proj: Option<usize>,
    pub bridge: BridgeMode,
    pub epochs: usize,
    /// Epochs per autoencoder in pretraining mode.
    pub pretrain_epochs: usize,
    /// After pretraining, train only the bridge.
    pub freeze_pretrained: bool,
    pub seed: u64,
    pub mode: TrainMode,
    pub teacher_forcing: bool,
    /// Evaluate with the decoder fed its own predictions.
    pub eval_free_running: bool,
    pub clip_norm: f64,
    pub val_fraction: f64,
    pub cluster_steps: usize,
    /// Rows per parallel work unit inside a minibatch.
    pub chunk_rows: usize,
    pub min_count: usize,
    pub parser: ParserOptions,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: OptimizerKind::Adam,
            learning_rate: None,
            allow_any_lr: false,
            alpha: 1.0,
            beta: 0.5,
            dropout: 0.05,
            layers: 1,
            state: 256,
            embed: None,
            proj: None,
            bridge: BridgeMode::Tanh,
            epochs: 10,
            pretrain_epochs: 10,
            freeze_pretrained: true,
            seed: 0,
            mode: TrainMode::Direct,
            teacher_forcing: true,
            eval_free_running: true,
            clip_norm: 5.0,
            val_fraction: 0.1,
            cluster_steps: 20,
            chunk_rows: 32,
            min_count: 1,
            parser: ParserOptions::default(),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T, TrainError> {
    v.parse().map_err(|_| TrainError::InvalidValue {
        key: key.to_string(),
        value: v.to_string(),
    })
}

fn parse_bool(key: &str, v: &str) -> Result<bool, TrainError> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(TrainError::InvalidValue {
            key: key.to_string(),
            value: v.to_string(),
        }),
    }
}

impl TrainConfig {
    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
            .unwrap_or_else(|| self.optimizer.default_learning_rate())
    }

    /// Sets one key; unknown keys are errors.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), TrainError> {
        let bad = || TrainError::InvalidValue {
            key: key.to_string(),
            value: v.to_string(),
        };
        match key {
            "optimizer" => {
                self.optimizer = match v {
                    "adam" => OptimizerKind::Adam,
                    "rmsprop" => OptimizerKind::RmsProp,
                    _ => return Err(bad()),
                }
            }
            "learning_rate" => self.learning_rate = Some(parse_value(key, v)?),
            "allow_any_lr" => self.allow_any_lr = parse_bool(key, v)?,
            "alpha" => self.alpha = parse_value(key, v)?,
            "beta" => self.beta = parse_value(key, v)?,
            "dropout" => self.dropout = parse_value(key, v)?,
            "layers" => self.layers = parse_value(key, v)?,
            "state" => self.state = parse_value(key, v)?,
            "embed" => self.embed = Some(parse_value(key, v)?),
            "proj" => self.proj = Some(parse_value(key, v)?),
            "bridge" => {
                self.bridge = match v {
                    "none" => BridgeMode::None,
                    "tanh" => BridgeMode::Tanh,
                    "linear" => BridgeMode::Linear,
                    _ => return Err(bad()),
                }
            }
            "epochs" => self.epochs = parse_value(key, v)?,
            "pretrain_epochs" => self.pretrain_epochs = parse_value(key, v)?,
            "freeze_pretrained" => self.freeze_pretrained = parse_bool(key, v)?,
            "seed" => self.seed = parse_value(key, v)?,
            "mode" => {
                self.mode = match v {
                    "direct" => TrainMode::Direct,
                    "autoencoder-pretrain" => TrainMode::AutoencoderPretrain,
                    _ => return Err(bad()),
                }
            }
            "teacher_forcing" => self.teacher_forcing = parse_bool(key, v)?,
            "eval_free_running" => self.eval_free_running = parse_bool(key, v)?,
            "clip_norm" => self.clip_norm = parse_value(key, v)?,
            "val_fraction" => self.val_fraction = parse_value(key, v)?,
            "cluster_steps" => self.cluster_steps = parse_value(key, v)?,
            "chunk_rows" => self.chunk_rows = parse_value(key, v)?,
            "min_count" => self.min_count = parse_value(key, v)?,
            "command_end" => self.parser.command_end = parse_bool(key, v)?,
            "concat_end" => self.parser.concat_end = parse_bool(key, v)?,
            "infix_to_prefix" => self.parser.infix_to_prefix = parse_bool(key, v)?,
            "right_biggest" => self.parser.right_biggest = parse_bool(key, v)?,
            _ => return Err(TrainError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn from_kv(text: &str) -> Result<Self, TrainError> {
        let mut c = TrainConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or(TrainError::MalformedConfigLine(i + 1))?;
            c.set(k.trim(), v.trim())?;
        }
        c.validate()?;
        Ok(c)
    }

    /// Canonical `key = value` rendering; parsing it back gives the same config.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let b = |x: bool| if x { "true" } else { "false" };
        let opt = match self.optimizer {
            OptimizerKind::Adam => "adam",
            OptimizerKind::RmsProp => "rmsprop",
        };
        let bridge = match self.bridge {
            BridgeMode::None => "none",
            BridgeMode::Tanh => "tanh",
            BridgeMode::Linear => "linear",
        };
        let mode = match self.mode {
            TrainMode::Direct => "direct",
            TrainMode::AutoencoderPretrain => "autoencoder-pretrain",
        };
        let _ = writeln!(s, "optimizer = {opt}");
        if let Some(lr) = self.learning_rate {
            let _ = writeln!(s, "learning_rate = {lr:e}");
        }
        let _ = writeln!(s, "allow_any_lr = {}", b(self.allow_any_lr));
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "beta = {}", self.beta);
        let _ = writeln!(s, "dropout = {}", self.dropout);
        let _ = writeln!(s, "layers = {}", self.layers);
        let _ = writeln!(s, "state = {}", self.state);
        if let Some(e) = self.embed {
            let _ = writeln!(s, "embed = {e}");
        }
        if let Some(p) = self.proj {
            let _ = writeln!(s, "proj = {p}");
        }
        let _ = writeln!(s, "bridge = {bridge}");
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "pretrain_epochs = {}", self.pretrain_epochs);
        let _ = writeln!(s, "freeze_pretrained = {}", b(self.freeze_pretrained));
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "mode = {mode}");
        let _ = writeln!(s, "teacher_forcing = {}", b(self.teacher_forcing));
        let _ = writeln!(s, "eval_free_running = {}", b(self.eval_free_running));
        let _ = writeln!(s, "clip_norm = {}", self.clip_norm);
        let _ = writeln!(s, "val_fraction = {}", self.val_fraction);
        let _ = writeln!(s, "cluster_steps = {}", self.cluster_steps);
        let _ = writeln!(s, "chunk_rows = {}", self.chunk_rows);
        let _ = writeln!(s, "min_count = {}", self.min_count);
        let _ = writeln!(s, "command_end = {}", b(self.parser.command_end));
        let _ = writeln!(s, "concat_end = {}", b(self.parser.concat_end));
        let _ = writeln!(s, "infix_to_prefix = {}", b(self.parser.infix_to_prefix));
        let _ = writeln!(s, "right_biggest = {}", b(self.parser.right_biggest));
        s
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let err = |m: String| Err(TrainError::InvalidConfig(m));
        let lr = self.learning_rate();
        if !(lr.is_finite() && lr >= 0.0) {
            return err(format!(
                "learning_rate {lr} must be finite and non-negative"
            ));
        }
        if !self.allow_any_lr && lr != 0.0 && !(LR_RANGE.0..=LR_RANGE.1).contains(&lr) {
            return err(format!(
                "learning_rate {lr} outside [{:e}, {:e}]; set allow_any_lr to override",
                LR_RANGE.0, LR_RANGE.1
            ));
        }
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..=1.0).contains(&self.beta) {
            return err("alpha and beta must lie in [0, 1]".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return err("dropout must lie in [0, 1)".into());
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return err("val_fraction must lie in [0, 1)".into());
        }
        if self.layers == 0 || self.state == 0 || self.chunk_rows == 0 || self.min_count == 0 {
            return err("layers, state, chunk_rows and min_count must be positive".into());
        }
        if self.cluster_steps < 2 {
            return err("cluster_steps must be at least 2".into());
        }
        if !(self.clip_norm > 0.0) {
            return err("clip_norm must be positive".into());
        }
        if self.mode == TrainMode::AutoencoderPretrain && self.bridge == BridgeMode::None {
            return err("autoencoder pretraining needs a bridge to train".into());
        }
        Ok(())
    }

    pub fn model_config(&self, vocab_in: usize, vocab_out: usize) -> ModelConfig {
        ModelConfig {
            vocab_in,
            vocab_out,
            embed: self.embed.unwrap_or(self.state),
            enc_state: self.state,
            dec_state: self.state,
            layers: self.layers,
            proj: self.proj.unwrap_or(self.state),
            bridge: self.bridge,
        }
    }

    pub fn train_feed(&self) -> Feed {
        if self.teacher_forcing {
            Feed::Teacher
        } else {
            Feed::Free
        }
    }

    pub fn eval_feed(&self) -> Feed {
        if self.eval_free_running {
            Feed::Free
        } else {
            Feed::Teacher
        }
    }
}
