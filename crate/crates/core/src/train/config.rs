use std::fmt;
use std::str::FromStr;

use super::TrainError;
use crate::model::{AspectPooling, DropoutConfig, ModelDims};
use crate::nn::RmsProp;
use crate::position::PositionKind;

/// How many conflict instances to train on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Upsample {
    /// Size of the median non-conflict class.
    #[default]
    Auto,
    None,
    Target(usize),
}

impl fmt::Display for Upsample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Upsample::Auto => f.write_str("auto"),
            Upsample::None => f.write_str("none"),
            Upsample::Target(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for Upsample {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Upsample::Auto),
            "none" => Ok(Upsample::None),
            n => n
                .parse()
                .map(Upsample::Target)
                .map_err(|_| format!("expected auto, none or a count, got {n:?}")),
        }
    }
}

/// Every knob of a training run. Written verbatim into checkpoints.
///
/// The text form is one `key = value` per line; `#` starts a comment and
/// keys that are not given keep their defaults.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub d_e: usize,
    pub d_h: usize,
    pub d_p: usize,
    pub d_w: usize,
    pub d_max: usize,
    /// Padded sentence length; 0 picks the longest sentence seen.
    pub max_len: usize,
    pub lr: f64,
    pub lr_factor: f64,
    pub lr_patience: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub recurrent_dropout: bool,
    pub epochs: usize,
    pub seed: u64,
    pub upsample: Upsample,
    pub aspect_pooling: AspectPooling,
    pub freeze_embeddings: bool,
    pub rms_decay: f64,
    pub rms_eps: f64,
    pub init_scale: f64,
    /// Share of the training file held out for model selection when no dev file is given.
    pub dev_fraction: f64,
    pub position: PositionKind,
    pub lowercase: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            d_e: 100,
            d_h: 150,
            d_p: 50,
            d_w: 100,
            d_max: crate::position::DEFAULT_CLAMP,
            max_len: 0,
            lr: 0.001,
            lr_factor: 0.5,
            lr_patience: 5,
            batch_size: 128,
            dropout: 0.5,
            recurrent_dropout: true,
            epochs: 30,
            seed: 42,
            upsample: Upsample::Auto,
            aspect_pooling: AspectPooling::Mean,
            freeze_embeddings: false,
            rms_decay: 0.9,
            rms_eps: 1e-8,
            init_scale: 0.08,
            dev_fraction: 0.1,
            position: PositionKind::Tree,
            lowercase: true,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T, TrainError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| TrainError::Config {
        line,
        reason: format!("{key}: {e}"),
    })
}

impl TrainConfig {
    pub fn dims(&self) -> ModelDims {
        ModelDims {
            d_e: self.d_e,
            d_h: self.d_h,
            d_p: self.d_p,
            d_w: self.d_w,
            clamp: self.d_max,
        }
    }

    pub fn dropout_config(&self) -> DropoutConfig {
        DropoutConfig {
            rate: self.dropout,
            recurrent: self.recurrent_dropout,
        }
    }

    pub fn optimizer(&self, lr: f64) -> RmsProp {
        RmsProp {
            lr,
            decay: self.rms_decay,
            eps: self.rms_eps,
        }
    }

    /// `(key, value)` pairs in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("d_e", self.d_e.to_string()),
            ("d_h", self.d_h.to_string()),
            ("d_p", self.d_p.to_string()),
            ("d_w", self.d_w.to_string()),
            ("d_max", self.d_max.to_string()),
            ("max_len", self.max_len.to_string()),
            ("lr", self.lr.to_string()),
            ("lr_factor", self.lr_factor.to_string()),
            ("lr_patience", self.lr_patience.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("dropout", self.dropout.to_string()),
            ("recurrent_dropout", self.recurrent_dropout.to_string()),
            ("epochs", self.epochs.to_string()),
            ("seed", self.seed.to_string()),
            ("upsample", self.upsample.to_string()),
            ("aspect_pooling", self.aspect_pooling.as_str().to_string()),
            ("freeze_embeddings", self.freeze_embeddings.to_string()),
            ("rms_decay", self.rms_decay.to_string()),
            ("rms_eps", self.rms_eps.to_string()),
            ("init_scale", self.init_scale.to_string()),
            ("dev_fraction", self.dev_fraction.to_string()),
            ("position", self.position.as_str().to_string()),
            ("lowercase", self.lowercase.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Overrides one key. `line` is only used for error messages.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), TrainError> {
        match key {
            "d_e" => self.d_e = parse_value(key, value, line)?,
            "d_h" => self.d_h = parse_value(key, value, line)?,
            "d_p" => self.d_p = parse_value(key, value, line)?,
            "d_w" => self.d_w = parse_value(key, value, line)?,
            "d_max" => self.d_max = parse_value(key, value, line)?,
            "max_len" => self.max_len = parse_value(key, value, line)?,
            "lr" => self.lr = parse_value(key, value, line)?,
            "lr_factor" => self.lr_factor = parse_value(key, value, line)?,
            "lr_patience" => self.lr_patience = parse_value(key, value, line)?,
            "batch_size" => self.batch_size = parse_value(key, value, line)?,
            "dropout" => self.dropout = parse_value(key, value, line)?,
            "recurrent_dropout" => self.recurrent_dropout = parse_value(key, value, line)?,
            "epochs" => self.epochs = parse_value(key, value, line)?,
            "seed" => self.seed = parse_value(key, value, line)?,
            "upsample" => self.upsample = parse_value(key, value, line)?,
            "aspect_pooling" => self.aspect_pooling = parse_value(key, value, line)?,
            "freeze_embeddings" => self.freeze_embeddings = parse_value(key, value, line)?,
            "rms_decay" => self.rms_decay = parse_value(key, value, line)?,
            "rms_eps" => self.rms_eps = parse_value(key, value, line)?,
            "init_scale" => self.init_scale = parse_value(key, value, line)?,
            "dev_fraction" => self.dev_fraction = parse_value(key, value, line)?,
            "position" => self.position = parse_value(key, value, line)?,
            "lowercase" => self.lowercase = parse_value(key, value, line)?,
            other => {
                return Err(TrainError::Config {
                    line,
                    reason: format!("unknown key {other:?}"),
                })
            }
        }
        Ok(())
    }

    /// Parses the `key = value` text form on top of the defaults and validates.
    pub fn parse(text: &str) -> Result<Self, TrainError> {
        let mut cfg = TrainConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| TrainError::Config {
                line: i + 1,
                reason: "expected key = value".into(),
            })?;
            cfg.set(k.trim(), v.trim(), i + 1)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |reason: &str| Err(TrainError::Config {
            line: 0,
            reason: reason.to_string(),
        });
        if [self.d_e, self.d_h, self.d_p, self.d_w, self.d_max, self.batch_size, self.lr_patience]
            .contains(&0)
        {
            return bad("dimensions, d_max, batch_size and lr_patience must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(self.lr_factor > 0.0 && self.lr_factor <= 1.0) {
            return bad("lr_factor must be in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.rms_decay) {
            return bad("rms_decay must be in [0, 1)");
        }
        if !(self.rms_eps > 0.0) {
            return bad("rms_eps must be positive");
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return bad("init_scale must be positive");
        }
        if !(0.0..1.0).contains(&self.dev_fraction) {
            return bad("dev_fraction must be in [0, 1)");
        }
        Ok(())
    }
}
