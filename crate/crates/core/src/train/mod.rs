//! Training loop: AdamW, per-epoch cosine warm restarts, global-norm
//! clipping, best-by-validation checkpointing and patience-based stopping.

mod optim;
mod schedule;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{make_batches, DialoguePair, TokenBatch, Vocab};
use crate::losses::{compute_losses, LossError, LossReport, LossWeights};
use crate::model::{save_checkpoint, Ablation, CheckpointError, Seq2SeqModel};
use crate::tensor::{no_grad, Rng, Tensor, TensorError};

pub use optim::{adamw_update, clip_gradients, AdamW, ADAM_EPS, BETA1, BETA2};
pub use schedule::cosine_warm_restart_lr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub clip_norm: f64,
    pub t0: usize,
    pub t_mult: usize,
    pub patience: usize,
    /// No early stop at or before this (1-based) epoch.
    pub min_epoch_for_stop: usize,
    pub seed: u64,
    pub eta_min: f64,
    pub weights: LossWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 8,
            lr: 1e-4,
            weight_decay: 0.02,
            clip_norm: 1.0,
            t0: 10,
            t_mult: 2,
            patience: 10,
            min_epoch_for_stop: 30,
            seed: 42,
            eta_min: 0.0,
            weights: LossWeights::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 || self.batch_size == 0 || self.t0 == 0 || self.t_mult == 0 || self.patience == 0 {
            return Err(TrainError::Config("epochs, batch_size, t0, t_mult and patience must be at least 1".into()));
        }
        if !(self.lr > 0.0) || !(self.clip_norm > 0.0) || !(self.weight_decay >= 0.0) || !(self.eta_min >= 0.0) {
            return Err(TrainError::Config("lr and clip_norm must be positive, weight_decay and eta_min nonnegative".into()));
        }
        self.weights.validate().map_err(|e| TrainError::Config(e.to_string()))
    }

    /// Loss weights with the ablation switches folded in.
    pub fn effective_weights(&self, ablation: &Ablation) -> LossWeights {
        let mut w = self.weights.clone();
        if ablation.disable_diversity_loss {
            w.gamma_diversity = 0.0;
        }
        if ablation.disable_margin_loss {
            w.margin_coeff = 0.0;
        }
        w
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("epoch {epoch}, batch {batch}: {source}")]
    NonFinite {
        epoch: usize,
        batch: usize,
        #[source]
        source: LossError,
    },
    #[error("non-finite gradient for parameter {0}")]
    NonFiniteGradient(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl TrainError {
    /// True for failures caused by the numbers rather than the setup.
    pub fn is_numerical(&self) -> bool {
        matches!(self, TrainError::NonFinite { .. } | TrainError::NonFiniteGradient(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train: LossReport,
    pub val: LossReport,
    pub lr: f64,
    pub alpha_eff: f64,
    pub grad_norm_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
    pub wall_seconds: f64,
    pub trainable_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    pub summary: RunSummary,
    /// Parameter values at the best validation epoch, in
    /// [`Seq2SeqModel::parameters`] order.
    pub best_params: Vec<Vec<f64>>,
}

impl TrainOutcome {
    /// Copies the best-epoch weights back into `model`.
    pub fn restore_best(&self, model: &Seq2SeqModel) {
        for ((_, t), v) in model.parameters().iter().zip(&self.best_params) {
            t.data_mut().copy_from_slice(v);
        }
    }
}

pub const METRICS_HEADER: &str = "epoch,split,total,seq,hormone,mse,margin,diversity,lr,alpha_eff";

fn metrics_rows(r: &EpochRecord) -> String {
    let row = |split: &str, l: &LossReport| {
        format!(
            "{},{split},{},{},{},{},{},{},{},{}\n",
            r.epoch, l.total, l.seq, l.hormone, l.hormone_mse, l.margin, l.diversity, r.lr, r.alpha_eff
        )
    };
    row("train", &r.train) + &row("val", &r.val)
}

/// Where [`train`] writes its artifacts.
#[derive(Debug, Clone)]
pub struct TrainOutputs {
    pub dir: PathBuf,
}

impl TrainOutputs {
    pub fn best(&self) -> PathBuf {
        self.dir.join("best.ckpt")
    }
    pub fn last(&self) -> PathBuf {
        self.dir.join("last.ckpt")
    }
    pub fn metrics(&self) -> PathBuf {
        self.dir.join("metrics.csv")
    }
    pub fn summary(&self) -> PathBuf {
        self.dir.join("summary.json")
    }
}

/// Fixed-order validation batches.
pub fn eval_batches(pairs: &[DialoguePair], batch_size: usize, max_len: usize, vocab: &Vocab) -> Vec<TokenBatch> {
    pairs
        .chunks(batch_size)
        .map(|chunk| TokenBatch::from_pairs(&chunk.iter().collect::<Vec<_>>(), vocab, max_len))
        .collect()
}

/// Mean loss over `batches` without recording a graph.
pub fn evaluate_loss(
    model: &Seq2SeqModel,
    batches: &[TokenBatch],
    weights: &LossWeights,
    epoch: usize,
) -> Result<LossReport, TrainError> {
    no_grad(|| {
        let mut parts = Vec::with_capacity(batches.len());
        for (i, b) in batches.iter().enumerate() {
            let out = model.forward(b)?;
            let (_, report) = compute_losses(model, &out, b, weights).map_err(|source| loss_err(epoch, i, source))?;
            parts.push((report, b.batch_size as f64));
        }
        Ok(LossReport::weighted_mean(&parts))
    })
}

fn loss_err(epoch: usize, batch: usize, source: LossError) -> TrainError {
    match source {
        LossError::Tensor(e) => TrainError::Tensor(e),
        source => TrainError::NonFinite { epoch, batch, source },
    }
}

/// One optimizer step on `batch`; returns the loss report and the pre-clip
/// gradient norm.
pub fn train_step(
    model: &Seq2SeqModel,
    opt: &mut AdamW,
    params: &[Tensor],
    batch: &TokenBatch,
    weights: &LossWeights,
    lr: f64,
    clip_norm: f64,
) -> Result<(LossReport, f64), TrainError> {
    opt.zero_grad();
    let out = model.forward(batch)?;
    let (total, report) = compute_losses(model, &out, batch, weights).map_err(|s| loss_err(0, 0, s))?;
    total.backward()?;
    let norm = clip_gradients(params, clip_norm);
    opt.step(lr)?;
    Ok((report, norm))
}

/// Trains `model` in place. With `outputs`, writes `best.ckpt` on every
/// validation improvement, `last.ckpt` at the end, a metrics CSV row pair
/// per epoch and a `summary.json`.
pub fn train(
    model: &Seq2SeqModel,
    vocab: &Vocab,
    train_set: &[DialoguePair],
    val_set: &[DialoguePair],
    cfg: &TrainConfig,
    outputs: Option<&TrainOutputs>,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(TrainError::Config("training and validation sets must be non-empty".into()));
    }
    let started = Instant::now();
    let weights = cfg.effective_weights(&model.config.ablation);
    let max_len = model.config.max_len;
    let mut shuffle = Rng::stream(cfg.seed, "shuffle");
    let val_batches = eval_batches(val_set, cfg.batch_size, max_len, vocab);
    let params: Vec<Tensor> = model.trainable_parameters().into_iter().map(|(_, t)| t).collect();
    let mut opt = AdamW::new(model.parameters(), cfg.weight_decay);

    if let Some(o) = outputs {
        fs::create_dir_all(&o.dir)?;
        fs::write(o.metrics(), format!("{METRICS_HEADER}\n"))?;
    }

    let mut history = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut best_params = snapshot(model);
    let mut since_best = 0;
    let mut stopped_early = false;
    for epoch in 1..=cfg.epochs {
        let lr = cosine_warm_restart_lr(epoch - 1, cfg.t0, cfg.t_mult, cfg.lr, cfg.eta_min);
        let batches = make_batches(train_set, cfg.batch_size, max_len, vocab, &mut shuffle);
        let mut parts = Vec::with_capacity(batches.len());
        let mut grad_norm_max: f64 = 0.0;
        for (i, b) in batches.iter().enumerate() {
            let (report, norm) = train_step(model, &mut opt, &params, b, &weights, lr, cfg.clip_norm).map_err(|e| match e {
                TrainError::NonFinite { source, .. } => TrainError::NonFinite { epoch, batch: i, source },
                e => e,
            })?;
            grad_norm_max = grad_norm_max.max(norm);
            parts.push((report, b.batch_size as f64));
        }
        opt.zero_grad();
        let val = evaluate_loss(model, &val_batches, &weights, epoch)?;
        let record = EpochRecord {
            epoch,
            train: LossReport::weighted_mean(&parts),
            val,
            lr,
            alpha_eff: model.hormone.alpha_eff().item(),
            grad_norm_max,
        };
        if let Some(o) = outputs {
            fs::OpenOptions::new().append(true).open(o.metrics())?.write_all(metrics_rows(&record).as_bytes())?;
        }
        on_epoch(&record);
        history.push(record);

        if val.total < best_val {
            best_val = val.total;
            best_epoch = epoch;
            best_params = snapshot(model);
            since_best = 0;
            if let Some(o) = outputs {
                save_checkpoint(model, vocab, &o.best())?;
            }
        } else {
            since_best += 1;
        }
        if since_best >= cfg.patience && epoch > cfg.min_epoch_for_stop {
            stopped_early = true;
            break;
        }
    }

    let summary = RunSummary {
        best_epoch,
        best_val_loss: best_val,
        stopped_early,
        wall_seconds: started.elapsed().as_secs_f64(),
        trainable_fraction: model.trainable_fraction(),
    };
    if let Some(o) = outputs {
        save_checkpoint(model, vocab, &o.last())?;
        fs::write(o.summary(), serde_json::to_string_pretty(&summary).expect("summary serializes"))?;
    }
    Ok(TrainOutcome {
        history,
        summary,
        best_params,
    })
}

fn snapshot(model: &Seq2SeqModel) -> Vec<Vec<f64>> {
    model.parameters().iter().map(|(_, t)| t.to_vec()).collect()
}

/// Reads a metrics CSV back into `(epoch, split, total)` triples.
pub fn read_metrics_totals(path: &Path) -> Result<Vec<(usize, String, f64)>, TrainError> {
    let text = fs::read_to_string(path)?;
    Ok(text
        .lines()
        .skip(1)
        .filter_map(|l| {
            let mut f = l.split(',');
            Some((f.next()?.parse().ok()?, f.next()?.to_string(), f.next()?.parse().ok()?))
        })
        .collect())
}
