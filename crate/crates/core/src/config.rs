//! Flat `key = value` run configuration. Keys follow the hyperparameter
//! table's names in snake_case; `#` starts a comment.
//!
//! Precedence: command-line flag, then config file, then built-in default.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::model::ModelConfig;
use crate::train::TrainConfig;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value {value:?} for {key}: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub expansion_factor: usize,
    pub train_fraction: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            expansion_factor: 10,
            train_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Paths {
    pub data_dir: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

/// Merged model, training, loss, data and path settings plus ablation flags.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
    pub paths: Paths,
}

/// Every recognized key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("hidden_dimension", "model width d"),
    ("encoder_layers", "encoder depth"),
    ("decoder_layers", "decoder depth"),
    ("frozen_layers", "leading encoder and decoder layers kept frozen"),
    ("attention_heads", "heads in sequence attention"),
    ("hormone_attention_heads", "query heads per hormone"),
    ("ff_width", "feed-forward inner width"),
    ("temperature", "hormone attention temperature tau"),
    ("max_sequence_length", "token budget per sequence"),
    ("epochs", "maximum training epochs"),
    ("batch_size", "examples per step"),
    ("learning_rate", "peak learning rate"),
    ("weight_decay", "decoupled AdamW decay"),
    ("t_0", "first restart period in epochs"),
    ("t_mult", "restart period multiplier"),
    ("eta_min", "learning-rate floor"),
    ("gradient_clipping", "global gradient-norm cap"),
    ("early_stopping_patience", "epochs without improvement before stopping"),
    ("min_epoch_for_stop", "no early stop at or before this epoch"),
    ("random_seed", "seed for all random streams"),
    ("sequence_weight", "weight of the sequence loss"),
    ("hormone_weight", "weight of the hormone loss"),
    ("diversity_weight", "weight of the diversity loss"),
    ("margin_loss_coefficient", "weight of the margin term in the hormone loss"),
    ("high_threshold", "targets above this count as high"),
    ("low_threshold", "targets below this count as low"),
    ("high_target_cut", "high predictions are pushed above this"),
    ("low_target_cut", "low predictions are pushed below this"),
    ("data_expansion_factor", "copies of each seed pair"),
    ("train_val_split", "training fraction of the dataset"),
    ("detach_hormone_gradients", "cut the sequence-loss path into the hormone heads"),
    ("random_kv_init", "skip copying encoder key/value weights into hormone heads"),
    ("random_query_init", "Gaussian instead of orthogonal hormone queries"),
    ("disable_diversity_loss", "drop the diversity term"),
    ("disable_margin_loss", "drop the margin term"),
    ("three_hormone_mode", "predict only dopamine, cortisol and oxytocin"),
    ("fixed_alpha", "non-learnable modulation gate value (or `none`)"),
    ("data_dir", "directory with train.jsonl, val.jsonl and vocab.txt"),
    ("checkpoint", "checkpoint path"),
    ("out_dir", "output directory"),
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

impl RunConfig {
    /// Desk-scale model, the reference training schedule.
    pub fn desk() -> Self {
        Self::default()
    }

    /// Sets one key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let (m, t) = (&mut self.model, &mut self.train);
        let a = &mut m.ablation;
        let w = &mut t.weights;
        match key {
            "hidden_dimension" => m.d_model = parse(key, value)?,
            "encoder_layers" => m.n_enc_layers = parse(key, value)?,
            "decoder_layers" => m.n_dec_layers = parse(key, value)?,
            "frozen_layers" => m.frozen_layers = parse(key, value)?,
            "attention_heads" => m.n_seq_heads = parse(key, value)?,
            "hormone_attention_heads" => m.n_hormone_heads = parse(key, value)?,
            "ff_width" => m.ff_width = parse(key, value)?,
            "temperature" => m.tau = parse(key, value)?,
            "max_sequence_length" => m.max_len = parse(key, value)?,
            "detach_hormone_gradients" => a.detach_hormone_gradients = parse(key, value)?,
            "random_kv_init" => a.random_kv_init = parse(key, value)?,
            "random_query_init" => a.random_query_init = parse(key, value)?,
            "disable_diversity_loss" => a.disable_diversity_loss = parse(key, value)?,
            "disable_margin_loss" => a.disable_margin_loss = parse(key, value)?,
            "three_hormone_mode" => a.three_hormone_mode = parse(key, value)?,
            "fixed_alpha" => a.fixed_alpha = if value == "none" { None } else { Some(parse(key, value)?) },
            "epochs" => t.epochs = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "learning_rate" => t.lr = parse(key, value)?,
            "weight_decay" => t.weight_decay = parse(key, value)?,
            "t_0" => t.t0 = parse(key, value)?,
            "t_mult" => t.t_mult = parse(key, value)?,
            "eta_min" => t.eta_min = parse(key, value)?,
            "gradient_clipping" => t.clip_norm = parse(key, value)?,
            "early_stopping_patience" => t.patience = parse(key, value)?,
            "min_epoch_for_stop" => t.min_epoch_for_stop = parse(key, value)?,
            "random_seed" => t.seed = parse(key, value)?,
            "sequence_weight" => w.alpha_seq = parse(key, value)?,
            "hormone_weight" => w.beta_hormone = parse(key, value)?,
            "diversity_weight" => w.gamma_diversity = parse(key, value)?,
            "margin_loss_coefficient" => w.margin_coeff = parse(key, value)?,
            "high_threshold" => w.high_threshold = parse(key, value)?,
            "low_threshold" => w.low_threshold = parse(key, value)?,
            "high_target_cut" => w.high_target_cut = parse(key, value)?,
            "low_target_cut" => w.low_target_cut = parse(key, value)?,
            "data_expansion_factor" => self.data.expansion_factor = parse(key, value)?,
            "train_val_split" => self.data.train_fraction = parse(key, value)?,
            "data_dir" => self.paths.data_dir = Some(value.into()),
            "checkpoint" => self.paths.checkpoint = Some(value.into()),
            "out_dir" => self.paths.out_dir = Some(value.into()),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`.
    pub fn apply_str(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        self.apply_str(&text)
    }

    /// Current value of `key` as it would be written to a file.
    pub fn get(&self, key: &str) -> Option<String> {
        let (m, t, w, a) = (&self.model, &self.train, &self.train.weights, &self.model.ablation);
        let p = |x: &Option<PathBuf>| x.as_ref().map_or(String::new(), |p| p.display().to_string());
        Some(match key {
            "hidden_dimension" => m.d_model.to_string(),
            "encoder_layers" => m.n_enc_layers.to_string(),
            "decoder_layers" => m.n_dec_layers.to_string(),
            "frozen_layers" => m.frozen_layers.to_string(),
            "attention_heads" => m.n_seq_heads.to_string(),
            "hormone_attention_heads" => m.n_hormone_heads.to_string(),
            "ff_width" => m.ff_width.to_string(),
            "temperature" => m.tau.to_string(),
            "max_sequence_length" => m.max_len.to_string(),
            "detach_hormone_gradients" => a.detach_hormone_gradients.to_string(),
            "random_kv_init" => a.random_kv_init.to_string(),
            "random_query_init" => a.random_query_init.to_string(),
            "disable_diversity_loss" => a.disable_diversity_loss.to_string(),
            "disable_margin_loss" => a.disable_margin_loss.to_string(),
            "three_hormone_mode" => a.three_hormone_mode.to_string(),
            "fixed_alpha" => a.fixed_alpha.map_or("none".into(), |v| v.to_string()),
            "epochs" => t.epochs.to_string(),
            "batch_size" => t.batch_size.to_string(),
            "learning_rate" => t.lr.to_string(),
            "weight_decay" => t.weight_decay.to_string(),
            "t_0" => t.t0.to_string(),
            "t_mult" => t.t_mult.to_string(),
            "eta_min" => t.eta_min.to_string(),
            "gradient_clipping" => t.clip_norm.to_string(),
            "early_stopping_patience" => t.patience.to_string(),
            "min_epoch_for_stop" => t.min_epoch_for_stop.to_string(),
            "random_seed" => t.seed.to_string(),
            "sequence_weight" => w.alpha_seq.to_string(),
            "hormone_weight" => w.beta_hormone.to_string(),
            "diversity_weight" => w.gamma_diversity.to_string(),
            "margin_loss_coefficient" => w.margin_coeff.to_string(),
            "high_threshold" => w.high_threshold.to_string(),
            "low_threshold" => w.low_threshold.to_string(),
            "high_target_cut" => w.high_target_cut.to_string(),
            "low_target_cut" => w.low_target_cut.to_string(),
            "data_expansion_factor" => self.data.expansion_factor.to_string(),
            "train_val_split" => self.data.train_fraction.to_string(),
            "data_dir" => p(&self.paths.data_dir),
            "checkpoint" => p(&self.paths.checkpoint),
            "out_dir" => p(&self.paths.out_dir),
            _ => return None,
        })
    }

    /// Serializes every key, one per line, readable by [`RunConfig::apply_str`].
    pub fn to_kv(&self) -> String {
        KEYS.iter()
            .filter_map(|(k, doc)| {
                let v = self.get(k)?;
                Some(if v.is_empty() { format!("# {k} = ({doc})\n") } else { format!("{k} = {v}  # {doc}\n") })
            })
            .collect()
    }

    /// Checks everything except the vocabulary size, which comes from data.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let probe = ModelConfig { vocab_size: self.model.vocab_size.max(8), ..self.model.clone() };
        probe.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.train.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.data.expansion_factor == 0 || !(self.data.train_fraction > 0.0 && self.data.train_fraction < 1.0) {
            return Err(ConfigError::Invalid("data_expansion_factor must be >= 1 and train_val_split in (0, 1)".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_mirror_reference_values() {
        let c = RunConfig::default();
        assert_eq!((c.train.epochs, c.train.batch_size, c.train.seed), (50, 8, 42));
        assert_eq!((c.train.lr, c.train.weight_decay, c.train.clip_norm), (1e-4, 0.02, 1.0));
        assert_eq!((c.train.t0, c.train.t_mult, c.train.patience, c.train.min_epoch_for_stop), (10, 2, 10, 30));
        assert_eq!((c.model.d_model, c.model.n_enc_layers, c.model.frozen_layers, c.model.tau), (64, 3, 1, 0.5));
        assert_eq!((c.data.expansion_factor, c.data.train_fraction), (10, 0.8));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn parses_file_text() {
        let mut c = RunConfig::default();
        c.apply_str("# desk run\nepochs = 30\nlearning_rate=3e-4  # faster\n\nfixed_alpha = 0.3\nthree_hormone_mode = true\n")
            .unwrap();
        assert_eq!(c.train.epochs, 30);
        assert_eq!(c.train.lr, 3e-4);
        assert_eq!(c.model.ablation.fixed_alpha, Some(0.3));
        assert!(c.model.ablation.three_hormone_mode);
    }

    #[test]
    fn errors() {
        let mut c = RunConfig::default();
        assert_eq!(c.apply_str("nonsense"), Err(ConfigError::Syntax { line: 1, text: "nonsense".into() }));
        assert_eq!(c.set("warp_factor", "9"), Err(ConfigError::UnknownKey("warp_factor".into())));
        assert!(matches!(c.set("epochs", "many"), Err(ConfigError::BadValue { .. })));
    }

    #[test]
    fn kv_round_trip_covers_every_key() {
        let mut c = RunConfig::default();
        c.set("out_dir", "runs/a").unwrap();
        c.set("fixed_alpha", "0.5").unwrap();
        let mut back = RunConfig::default();
        back.apply_str(&c.to_kv()).unwrap();
        assert_eq!(back, c);
        for (k, _) in KEYS {
            assert!(c.get(k).is_some(), "{k}");
        }
    }
}
