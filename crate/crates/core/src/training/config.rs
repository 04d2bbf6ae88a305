//! Training hyperparameters and their flat `key=value` text form.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::propensity::DEFAULT_CLIP_MIN;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelKind {
    Mf,
    Uae,
    Iae,
    Biser,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Weighting {
    /// Plain cross-entropy, every label weighted 1.
    None,
    /// Per-item popularity propensity `(n_i / max n)^eta`.
    RelIpw,
    /// Clipped predictions of a fully pretrained unweighted model, frozen.
    PreSipw,
    /// Clipped predictions of the model itself, refreshed every epoch.
    Sipw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EarlyStopMetric {
    NdcgAt3,
    NdcgAt30,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum XavierVariant {
    Uniform,
    Normal,
}

macro_rules! named_enum {
    ($ty:ident { $($var:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($ty::$var => $name),+ }
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($name => Ok($ty::$var),)+
                    other => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($ty), " `{}` (expected one of: {})"),
                        other,
                        [$($name),+].join(", ")
                    ))),
                }
            }
        }
    };
}

named_enum!(ModelKind { Mf => "mf", Uae => "uae", Iae => "iae", Biser => "biser" });
named_enum!(Weighting { None => "none", RelIpw => "rel_ipw", PreSipw => "pre_sipw", Sipw => "sipw" });
named_enum!(EarlyStopMetric { NdcgAt3 => "ndcg@3", NdcgAt30 => "ndcg@30" });
named_enum!(XavierVariant { Uniform => "uniform", Normal => "normal" });

impl EarlyStopMetric {
    pub fn cutoff(self) -> usize {
        match self {
            EarlyStopMetric::NdcgAt3 => 3,
            EarlyStopMetric::NdcgAt30 => 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model_kind: ModelKind,
    pub weighting: Weighting,
    /// Autoencoder hidden width, or the factor dimension for MF.
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub lambda_u: f64,
    pub lambda_i: f64,
    pub clip_min: f64,
    pub eta: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub early_stop_metric: EarlyStopMetric,
    pub seed: u64,
    /// Cells per MF mini-batch.
    pub batch_size: usize,
    pub xavier: XavierVariant,
    pub adagrad_epsilon: f64,
    /// Starting value of every Adagrad accumulator.
    pub adagrad_init_accum: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model_kind: ModelKind::Biser,
            weighting: Weighting::Sipw,
            hidden_dim: 100,
            learning_rate: 0.1,
            l2: 1e-6,
            lambda_u: 0.5,
            lambda_i: 0.5,
            clip_min: DEFAULT_CLIP_MIN,
            eta: 0.5,
            max_epochs: 500,
            patience: 5,
            early_stop_metric: EarlyStopMetric::NdcgAt3,
            seed: 0,
            batch_size: 1024,
            xavier: XavierVariant::Uniform,
            adagrad_epsilon: 1e-8,
            adagrad_init_accum: 0.1,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("`{value}` is not a valid value for `{key}`")))
}

impl TrainConfig {
    pub const KEYS: [&'static str; 17] = [
        "model_kind",
        "weighting",
        "hidden_dim",
        "learning_rate",
        "l2",
        "lambda_u",
        "lambda_i",
        "clip_min",
        "eta",
        "max_epochs",
        "patience",
        "early_stop_metric",
        "seed",
        "batch_size",
        "xavier",
        "adagrad_epsilon",
        "adagrad_init_accum",
    ];

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.lambda_u >= 0.0 && self.lambda_i >= 0.0) {
            return fail(format!(
                "lambda_u and lambda_i must be non-negative, got {} and {}",
                self.lambda_u, self.lambda_i
            ));
        }
        if !(self.l2 >= 0.0) {
            return fail(format!("l2 must be non-negative, got {}", self.l2));
        }
        if self.patience == 0 {
            return fail("patience must be at least 1".into());
        }
        if self.hidden_dim == 0 || self.batch_size == 0 {
            return fail("hidden_dim and batch_size must be positive".into());
        }
        let needs_clip = matches!(self.weighting, Weighting::Sipw | Weighting::PreSipw);
        if needs_clip && !(self.clip_min > 0.0 && self.clip_min < 1.0) {
            return fail(format!(
                "self-propensity weighting needs clip_min in (0, 1), got {}",
                self.clip_min
            ));
        }
        if !(0.0..1.0).contains(&self.clip_min) {
            return fail(format!("clip_min must lie in [0, 1), got {}", self.clip_min));
        }
        if self.weighting == Weighting::RelIpw && !(self.eta > 0.0) {
            return fail(format!("eta must be positive, got {}", self.eta));
        }
        if self.model_kind == ModelKind::Biser && self.weighting == Weighting::PreSipw {
            return fail("the bilateral model refreshes its own propensities; pre_sipw is not supported".into());
        }
        if !(self.adagrad_epsilon > 0.0 && self.adagrad_init_accum >= 0.0) {
            return fail("adagrad_epsilon must be positive and adagrad_init_accum non-negative".into());
        }
        Ok(())
    }

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.trim() {
            "model_kind" | "model" => self.model_kind = value.parse()?,
            "weighting" => self.weighting = value.parse()?,
            "hidden_dim" => self.hidden_dim = parse_value(key, value)?,
            "learning_rate" => self.learning_rate = parse_value(key, value)?,
            "l2" => self.l2 = parse_value(key, value)?,
            "lambda_u" => self.lambda_u = parse_value(key, value)?,
            "lambda_i" => self.lambda_i = parse_value(key, value)?,
            "clip_min" => self.clip_min = parse_value(key, value)?,
            "eta" => self.eta = parse_value(key, value)?,
            "max_epochs" => self.max_epochs = parse_value(key, value)?,
            "patience" => self.patience = parse_value(key, value)?,
            "early_stop_metric" => self.early_stop_metric = value.parse()?,
            "seed" => self.seed = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "xavier" => self.xavier = value.parse()?,
            "adagrad_epsilon" => self.adagrad_epsilon = parse_value(key, value)?,
            "adagrad_init_accum" => self.adagrad_init_accum = parse_value(key, value)?,
            other => return Err(Error::Config(format!("unknown training key `{other}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Result<String> {
        Ok(match key {
            "model_kind" => self.model_kind.as_str().to_string(),
            "weighting" => self.weighting.as_str().to_string(),
            "hidden_dim" => self.hidden_dim.to_string(),
            "learning_rate" => self.learning_rate.to_string(),
            "l2" => self.l2.to_string(),
            "lambda_u" => self.lambda_u.to_string(),
            "lambda_i" => self.lambda_i.to_string(),
            "clip_min" => self.clip_min.to_string(),
            "eta" => self.eta.to_string(),
            "max_epochs" => self.max_epochs.to_string(),
            "patience" => self.patience.to_string(),
            "early_stop_metric" => self.early_stop_metric.as_str().to_string(),
            "seed" => self.seed.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "xavier" => self.xavier.as_str().to_string(),
            "adagrad_epsilon" => self.adagrad_epsilon.to_string(),
            "adagrad_init_accum" => self.adagrad_init_accum.to_string(),
            other => return Err(Error::Config(format!("unknown training key `{other}`"))),
        })
    }

    /// Parses `key=value` lines over the defaults. Blank lines and `#`
    /// comments are skipped; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (key, value) in parse_key_values(text)? {
            cfg.set(&key, &value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in Self::KEYS {
            let _ = writeln!(out, "{key}={}", self.get(key).expect("listed key"));
        }
        out
    }
}

/// Splits flat `key=value` text into pairs, in order.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected key=value, got `{line}`", n + 1)));
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}
