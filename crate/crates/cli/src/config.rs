//! Run configuration as plain `key = value` text.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use kge::encoder::DEFAULT_DIM;
use kge::model::{ModelConfig, ModelTag};
use kge::train::TrainConfig;

/// A malformed invocation or configuration; exits with the usage status.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Every key accepted in a configuration file, in the order they are
/// written back.
pub const KEYS: &[&str] = &[
    "data",
    "out",
    "model",
    "dim",
    "layers",
    "comp",
    "reduction",
    "bases",
    "activation",
    "aggregation",
    "encoder_dropout",
    "transe_norm",
    "kernel",
    "filters",
    "permutations",
    "reshape",
    "feature_dropout",
    "lr",
    "batch_size",
    "epochs",
    "label_smoothing",
    "loss",
    "negatives",
    "beta1",
    "beta2",
    "adam_eps",
    "eval_every",
    "patience",
    "seed",
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub out: PathBuf,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let tag: ModelTag = "distmult".parse().expect("valid tag");
        RunConfig {
            data: None,
            out: PathBuf::from("run"),
            model: ModelConfig::new(tag, DEFAULT_DIM),
            train: TrainConfig::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, UsageError>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| UsageError(format!("bad value '{value}' for '{key}': {e}")))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), UsageError> {
        let m = &mut self.model;
        let t = &mut self.train;
        match key {
            "data" => self.data = Some(PathBuf::from(value)),
            "out" => self.out = PathBuf::from(value),
            "model" => m.tag = parse(key, value)?,
            "dim" => m.dim = parse(key, value)?,
            "layers" => m.layers = parse(key, value)?,
            "comp" => m.comp = parse(key, value)?,
            "reduction" => m.reduction = parse(key, value)?,
            "bases" => m.bases = parse(key, value)?,
            "activation" => m.activation = parse(key, value)?,
            "aggregation" => m.aggregation = parse(key, value)?,
            "encoder_dropout" => m.encoder_dropout = parse(key, value)?,
            "transe_norm" => m.transe_norm = parse(key, value)?,
            "kernel" => m.kernel_size = parse(key, value)?,
            "filters" => m.filters = parse(key, value)?,
            "permutations" => m.permutations = parse(key, value)?,
            "reshape" => m.reshape = parse(key, value)?,
            "feature_dropout" => m.feature_dropout = parse(key, value)?,
            "lr" => t.lr = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "epochs" => t.epochs = parse(key, value)?,
            "label_smoothing" => t.label_smoothing = parse(key, value)?,
            "loss" => t.loss = parse(key, value)?,
            "negatives" => t.negatives = parse(key, value)?,
            "beta1" => t.beta1 = parse(key, value)?,
            "beta2" => t.beta2 = parse(key, value)?,
            "adam_eps" => t.adam_eps = parse(key, value)?,
            "eval_every" => t.eval_every = parse(key, value)?,
            "patience" => t.patience = parse(key, value)?,
            "seed" => t.seed = parse(key, value)?,
            other => return Err(UsageError(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let m = &self.model;
        let t = &self.train;
        Some(match key {
            "data" => self.data.as_ref()?.display().to_string(),
            "out" => self.out.display().to_string(),
            "model" => m.tag.to_string(),
            "dim" => m.dim.to_string(),
            "layers" => m.layers.to_string(),
            "comp" => m.comp.to_string(),
            "reduction" => m.reduction.to_string(),
            "bases" => m.bases.to_string(),
            "activation" => m.activation.to_string(),
            "aggregation" => m.aggregation.to_string(),
            "encoder_dropout" => m.encoder_dropout.to_string(),
            "transe_norm" => m.transe_norm.to_string(),
            "kernel" => m.kernel_size.to_string(),
            "filters" => m.filters.to_string(),
            "permutations" => m.permutations.to_string(),
            "reshape" => m.reshape.to_string(),
            "feature_dropout" => m.feature_dropout.to_string(),
            "lr" => t.lr.to_string(),
            "batch_size" => t.batch_size.to_string(),
            "epochs" => t.epochs.to_string(),
            "label_smoothing" => t.label_smoothing.to_string(),
            "loss" => t.loss.to_string(),
            "negatives" => t.negatives.to_string(),
            "beta1" => t.beta1.to_string(),
            "beta2" => t.beta2.to_string(),
            "adam_eps" => t.adam_eps.to_string(),
            "eval_every" => t.eval_every.to_string(),
            "patience" => t.patience.to_string(),
            "seed" => t.seed.to_string(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<(), UsageError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(UsageError(format!(
                    "{}:{}: expected 'key = value'",
                    origin.display(),
                    i + 1
                )));
            };
            self.set(key.trim(), value.trim())
                .map_err(|e| UsageError(format!("{}:{}: {e}", origin.display(), i + 1)))?;
        }
        Ok(())
    }

    /// The fully resolved configuration, one key per line.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# resolved run configuration\n");
        for key in KEYS {
            if let Some(v) = self.get(key) {
                out.push_str(&format!("{key} = {v}\n"));
            }
        }
        out
    }
}
