//! Encoder-decoder transformer with the hormone block between the encoder
//! output and the decoder's cross-attention.

mod checkpoint;
mod hormone;
mod layers;

use serde::{Deserialize, Serialize};

use crate::data::{Hormone, TokenBatch, BOS_ID};
use crate::tensor::{gaussian, Result, Rng, Tensor, TensorError};

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError, CHECKPOINT_VERSION};
pub use hormone::{AttentionMap, HormoneBlock, HormoneHead, HormoneOutput, ALPHA_INIT, ALPHA_MAX, ALPHA_MIN};
pub use layers::{attention_bias, Attention, DecoderLayer, EncoderLayer, FeedForward, LayerNorm, Linear};

/// Switches for re-running the component ablations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablation {
    /// Hormone heads read detached encoder states and the projection reads a
    /// detached `h_hat`, so the sequence loss cannot reach the hormone heads.
    pub detach_hormone_gradients: bool,
    /// Keep Gaussian key/value projections instead of copying the encoder's.
    pub random_kv_init: bool,
    /// Gaussian instead of orthogonal query initialization.
    pub random_query_init: bool,
    pub disable_diversity_loss: bool,
    pub disable_margin_loss: bool,
    /// Only dopamine, cortisol and oxytocin.
    pub three_hormone_mode: bool,
    /// Non-learnable gate at this value.
    pub fixed_alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_enc_layers: usize,
    pub n_dec_layers: usize,
    pub n_seq_heads: usize,
    pub n_hormone_heads: usize,
    pub ff_width: usize,
    pub vocab_size: usize,
    pub max_len: usize,
    pub frozen_layers: usize,
    pub tau: f64,
    #[serde(default)]
    pub ablation: Ablation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            n_enc_layers: 3,
            n_dec_layers: 3,
            n_seq_heads: 4,
            n_hormone_heads: 4,
            ff_width: 256,
            vocab_size: 0,
            max_len: 32,
            frozen_layers: 1,
            tau: 0.5,
            ablation: Ablation::default(),
        }
    }
}

const THREE_HORMONES: [Hormone; 3] = [Hormone::Dopamine, Hormone::Cortisol, Hormone::Oxytocin];

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(TensorError::Contract(m));
        let d = self.d_model;
        if d == 0 || self.n_seq_heads == 0 || !d.is_multiple_of(self.n_seq_heads) {
            return fail(format!("d_model {d} must be divisible by n_seq_heads {}", self.n_seq_heads));
        }
        if self.n_hormone_heads == 0 || !d.is_multiple_of(self.n_hormone_heads) {
            return fail(format!("d_model {d} must be divisible by n_hormone_heads {}", self.n_hormone_heads));
        }
        if !d.is_multiple_of(4) {
            return fail(format!("d_model {d} must be divisible by 4 for the hormone MLP"));
        }
        if self.frozen_layers >= self.n_enc_layers || self.frozen_layers >= self.n_dec_layers {
            return fail(format!(
                "frozen_layers {} must be below both layer counts ({}, {})",
                self.frozen_layers, self.n_enc_layers, self.n_dec_layers
            ));
        }
        if self.vocab_size <= BOS_ID {
            return fail(format!("vocab_size {} too small", self.vocab_size));
        }
        if self.max_len < 2 || self.ff_width == 0 {
            return fail("max_len must be at least 2 and ff_width positive".into());
        }
        if !(self.tau > 0.0) {
            return fail(format!("tau must be positive, got {}", self.tau));
        }
        if let Some(a) = self.ablation.fixed_alpha {
            if !(ALPHA_MIN..=ALPHA_MAX).contains(&a) {
                return fail(format!("fixed_alpha {a} outside [{ALPHA_MIN}, {ALPHA_MAX}]"));
            }
        }
        Ok(())
    }

    /// Hormones the block predicts, canonical order.
    pub fn hormones(&self) -> Vec<Hormone> {
        if self.ablation.three_hormone_mode {
            THREE_HORMONES.to_vec()
        } else {
            Hormone::ALL.to_vec()
        }
    }
}

/// Everything a teacher-forced forward pass produces.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// `[B, T, V]`
    pub logits: Tensor,
    /// `[B, k]`
    pub h_hat: Tensor,
    /// `[B, d]` emotional embedding.
    pub emotion: Tensor,
    pub attn_maps: Vec<AttentionMap>,
}

#[derive(Debug, Clone)]
pub struct Seq2SeqModel {
    pub config: ModelConfig,
    /// `[V, d]`, shared by both embeddings and the output layer.
    pub tok_emb: Tensor,
    pub enc_pos: Tensor,
    pub dec_pos: Tensor,
    pub encoder: Vec<EncoderLayer>,
    pub enc_norm: LayerNorm,
    pub decoder: Vec<DecoderLayer>,
    pub dec_norm: LayerNorm,
    pub hormone: HormoneBlock,
}

/// `[rows, len] -> [rows * len]` position ids.
fn positions(rows: usize, len: usize) -> Vec<usize> {
    (0..rows).flat_map(|_| 0..len).collect()
}

impl Seq2SeqModel {
    /// Fresh model from the "init" stream of `seed`, with key/value transfer,
    /// freezing and gate settings applied per the config.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::stream(seed, "init");
        let c = &config;
        let d = c.d_model;
        let gain = 1.0 / ((2 * c.n_enc_layers.max(c.n_dec_layers)) as f64).sqrt();
        let emb_std = 1.0 / (d as f64).sqrt();
        let tok_emb = gaussian(c.vocab_size, d, emb_std, &mut rng);
        let enc_pos = gaussian(c.max_len, d, emb_std, &mut rng);
        let dec_pos = gaussian(c.max_len, d, emb_std, &mut rng);
        let encoder = (0..c.n_enc_layers)
            .map(|_| EncoderLayer::new(d, c.n_seq_heads, c.ff_width, gain, &mut rng))
            .collect();
        let decoder = (0..c.n_dec_layers)
            .map(|_| DecoderLayer::new(d, c.n_seq_heads, c.ff_width, gain, &mut rng))
            .collect();
        let hormone = HormoneBlock::new(
            &c.hormones(),
            d,
            c.n_hormone_heads,
            c.tau,
            c.ablation.random_query_init,
            &mut rng,
        )?;
        let model = Self {
            tok_emb,
            enc_pos,
            dec_pos,
            encoder,
            enc_norm: LayerNorm::new(d),
            decoder,
            dec_norm: LayerNorm::new(d),
            hormone,
            config,
        };
        if !model.config.ablation.random_kv_init {
            let last = &model.encoder[model.encoder.len() - 1].attn;
            model.hormone.transfer_kv_init(&last.wk.weight, &last.wv.weight)?;
        }
        if let Some(a) = model.config.ablation.fixed_alpha {
            model.hormone.alpha.data_mut()[0] = a;
            model.hormone.alpha.set_requires_grad(false);
        }
        model.apply_freezing(model.config.frozen_layers);
        Ok(model)
    }

    /// Every parameter with a stable dotted name, in a fixed order.
    pub fn parameters(&self) -> Vec<(String, Tensor)> {
        let mut out = vec![
            ("tok_emb".to_string(), self.tok_emb.clone()),
            ("enc_pos".to_string(), self.enc_pos.clone()),
            ("dec_pos".to_string(), self.dec_pos.clone()),
        ];
        for (i, l) in self.encoder.iter().enumerate() {
            l.params(&format!("enc.{i}"), &mut out);
        }
        self.enc_norm.params("enc_norm", &mut out);
        for (i, l) in self.decoder.iter().enumerate() {
            l.params(&format!("dec.{i}"), &mut out);
        }
        self.dec_norm.params("dec_norm", &mut out);
        self.hormone.params(&mut out);
        out
    }

    pub fn trainable_parameters(&self) -> Vec<(String, Tensor)> {
        self.parameters().into_iter().filter(|(_, t)| t.requires_grad()).collect()
    }

    /// Parameters of encoder and decoder layers `0..frozen_layers` (1-based
    /// layers 1..=frozen_layers).
    pub fn frozen_parameter_names(&self, frozen_layers: usize) -> Vec<String> {
        let mut out = Vec::new();
        for (i, l) in self.encoder.iter().enumerate().take(frozen_layers) {
            l.params(&format!("enc.{i}"), &mut out);
        }
        for (i, l) in self.decoder.iter().enumerate().take(frozen_layers) {
            l.params(&format!("dec.{i}"), &mut out);
        }
        out.into_iter().map(|(n, _)| n).collect()
    }

    /// Marks the first `frozen_layers` encoder and decoder layers as
    /// non-trainable and everything else (except a fixed gate) trainable.
    /// Returns the trainable fraction of parameter values.
    pub fn apply_freezing(&self, frozen_layers: usize) -> f64 {
        let frozen = self.frozen_parameter_names(frozen_layers);
        let fixed_alpha = self.config.ablation.fixed_alpha.is_some();
        let (mut total, mut trainable) = (0usize, 0usize);
        for (name, t) in self.parameters() {
            let on = !frozen.contains(&name) && !(fixed_alpha && name == "hormone.alpha");
            t.set_requires_grad(on);
            total += t.numel();
            if on {
                trainable += t.numel();
            }
        }
        trainable as f64 / total as f64
    }

    pub fn trainable_fraction(&self) -> f64 {
        let params = self.parameters();
        let total: usize = params.iter().map(|(_, t)| t.numel()).sum();
        let on: usize = params.iter().filter(|(_, t)| t.requires_grad()).map(|(_, t)| t.numel()).sum();
        on as f64 / total as f64
    }

    fn embed(&self, ids: &[usize], rows: usize, len: usize, pos: &Tensor) -> Result<Tensor> {
        if len > self.config.max_len {
            return Err(TensorError::Contract(format!(
                "sequence length {len} exceeds max_len {}",
                self.config.max_len
            )));
        }
        let d = self.config.d_model;
        let tok = Tensor::embedding(&self.tok_emb, ids)?;
        let p = Tensor::embedding(pos, &positions(rows, len))?;
        tok.add(&p)?.reshape(&[rows, len, d])
    }

    /// Encoder states `[B, L, d]` for flat `[B, L]` ids and mask.
    pub fn encode(&self, ids: &[usize], mask: &[u8], batch: usize) -> Result<Tensor> {
        let len = ids.len() / batch.max(1);
        let mut x = self.embed(ids, batch, len, &self.enc_pos)?;
        let bias = attention_bias(mask, batch, self.config.n_seq_heads, len, len, false);
        for layer in &self.encoder {
            x = layer.forward(&x, &bias)?;
        }
        self.enc_norm.forward(&x)
    }

    /// Hormone prediction and modulation of encoder states `h`.
    /// Returns `(h_hat, e, modulated states, attention maps)`.
    pub fn hormone_path(&self, h: &Tensor, mask: &[u8]) -> Result<(Tensor, Tensor, Tensor, Vec<AttentionMap>)> {
        let detach = self.config.ablation.detach_hormone_gradients;
        let head_input = if detach { h.detach() } else { h.clone() };
        let out = self.hormone.compute_hormones(&head_input, mask)?;
        let proj_input = if detach { out.h_hat.detach() } else { out.h_hat.clone() };
        let e = self.hormone.hormones_to_embedding(&proj_input)?;
        let modulated = self.hormone.modulate(h, &e)?;
        Ok((out.h_hat, e, modulated, out.attn_maps))
    }

    /// Decoder logits `[B, T, V]` for flat `[B, T]` decoder inputs.
    pub fn decode(&self, memory: &Tensor, memory_mask: &[u8], dec_ids: &[usize], dec_mask: &[u8]) -> Result<Tensor> {
        let batch = memory.shape()[0];
        let (lk, t) = (memory.shape()[1], dec_ids.len() / batch);
        let mut y = self.embed(dec_ids, batch, t, &self.dec_pos)?;
        let heads = self.config.n_seq_heads;
        let self_bias = attention_bias(dec_mask, batch, heads, t, t, true);
        let cross_bias = attention_bias(memory_mask, batch, heads, t, lk, false);
        for layer in &self.decoder {
            y = layer.forward(&y, memory, &self_bias, &cross_bias)?;
        }
        self.dec_norm.forward(&y)?.matmul_t(&self.tok_emb)
    }

    /// Teacher-forced pass: the decoder sees bos followed by the target
    /// shifted right by one.
    pub fn forward(&self, batch: &TokenBatch) -> Result<ForwardOutput> {
        let h = self.encode(&batch.input_ids, &batch.input_mask, batch.batch_size)?;
        let (h_hat, emotion, modulated, attn_maps) = self.hormone_path(&h, &batch.input_mask)?;
        let (dec_ids, dec_mask) = shift_right(&batch.target_ids, &batch.target_mask, batch.target_len);
        let logits = self.decode(&modulated, &batch.input_mask, &dec_ids, &dec_mask)?;
        Ok(ForwardOutput {
            logits,
            h_hat,
            emotion,
            attn_maps,
        })
    }
}

/// Prepends bos to each `[len]` row and drops its last element.
pub fn shift_right(ids: &[usize], mask: &[u8], len: usize) -> (Vec<usize>, Vec<u8>) {
    let mut out_ids = Vec::with_capacity(ids.len());
    let mut out_mask = Vec::with_capacity(mask.len());
    for (row, mrow) in ids.chunks(len).zip(mask.chunks(len)) {
        out_ids.push(BOS_ID);
        out_ids.extend_from_slice(&row[..len - 1]);
        out_mask.push(1);
        out_mask.extend_from_slice(&mrow[..len - 1]);
    }
    (out_ids, out_mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DialoguePair, Tone, Vocab};

    fn toy_config() -> ModelConfig {
        ModelConfig {
            d_model: 16,
            n_enc_layers: 2,
            n_dec_layers: 2,
            n_seq_heads: 2,
            n_hormone_heads: 2,
            ff_width: 32,
            vocab_size: 20,
            max_len: 8,
            frozen_layers: 1,
            ..ModelConfig::default()
        }
    }

    fn batch(ids: Vec<usize>, mask: Vec<u8>, tgt: Vec<usize>, tmask: Vec<u8>, b: usize) -> TokenBatch {
        TokenBatch {
            batch_size: b,
            input_len: ids.len() / b,
            target_len: tgt.len() / b,
            input_ids: ids,
            input_mask: mask,
            target_ids: tgt,
            target_mask: tmask,
            hormone_targets: [Tone::Friendly, Tone::Rude].iter().take(b).flat_map(|t| t.hormones().0).collect(),
            tones: [Tone::Friendly, Tone::Rude].into_iter().take(b).collect(),
        }
    }

    fn sample() -> TokenBatch {
        batch(vec![5, 6, 7, 1, 8, 9, 1, 0], vec![1, 1, 1, 1, 1, 1, 1, 0], vec![10, 11, 1, 12, 1, 0], vec![1, 1, 1, 1, 1, 0], 2)
    }

    #[test]
    fn shapes() {
        let m = Seq2SeqModel::new(toy_config(), 1).unwrap();
        let out = m.forward(&sample()).unwrap();
        assert_eq!(out.logits.shape(), &[2, 3, 20]);
        assert_eq!(out.h_hat.shape(), &[2, 6]);
        assert_eq!(out.emotion.shape(), &[2, 16]);
        assert_eq!(m.encode(&sample().input_ids, &sample().input_mask, 2).unwrap().shape(), &[2, 4, 16]);
    }

    #[test]
    fn config_contracts() {
        assert!(ModelConfig { n_seq_heads: 3, ..toy_config() }.validate().is_err());
        assert!(ModelConfig { frozen_layers: 2, ..toy_config() }.validate().is_err());
        assert!(toy_config().validate().is_ok());
    }

    #[test]
    fn out_of_range_id_is_contract_error() {
        let m = Seq2SeqModel::new(toy_config(), 1).unwrap();
        assert!(m.encode(&[25, 1], &[1, 1], 1).is_err());
    }

    #[test]
    fn batch_rows_are_independent() {
        let m = Seq2SeqModel::new(toy_config(), 2).unwrap();
        let a = m.encode(&[5, 6, 7, 1, 8, 9, 1, 0], &[1, 1, 1, 1, 1, 1, 1, 0], 2).unwrap().to_vec();
        let b = m.encode(&[8, 9, 1, 0, 5, 6, 7, 1], &[1, 1, 1, 0, 1, 1, 1, 1], 2).unwrap().to_vec();
        assert_eq!(a[..64], b[64..]);
        assert_eq!(a[64..], b[..64]);
        let c = m.encode(&[5, 6, 7, 1, 5, 6, 7, 1], &[1; 8], 2).unwrap().to_vec();
        assert_eq!(c[..64], c[64..]);
    }

    #[test]
    fn hormones_ignore_targets() {
        let m = Seq2SeqModel::new(toy_config(), 3).unwrap();
        let a = sample();
        let mut b = sample();
        b.target_ids = vec![13, 14, 15, 16, 17, 18];
        b.target_mask = vec![1; 6];
        assert_eq!(m.forward(&a).unwrap().h_hat.to_vec(), m.forward(&b).unwrap().h_hat.to_vec());
    }

    #[test]
    fn decoder_is_causal() {
        let m = Seq2SeqModel::new(toy_config(), 4).unwrap();
        let a = m.forward(&sample()).unwrap().logits.to_vec();
        let mut b = sample();
        b.target_ids[1] = 19; // only affects decoder input at position 2
        let bl = m.forward(&b).unwrap().logits.to_vec();
        assert_eq!(a[..40], bl[..40]);
        assert_ne!(a[40..60], bl[40..60]);
    }

    #[test]
    fn pad_content_is_ignored() {
        let m = Seq2SeqModel::new(toy_config(), 5).unwrap();
        let a = m.forward(&sample()).unwrap();
        let mut s = sample();
        s.input_ids[7] = 17;
        s.target_ids[5] = 18;
        let b = m.forward(&s).unwrap();
        assert_eq!(a.h_hat.to_vec(), b.h_hat.to_vec());
        assert_eq!(a.logits.to_vec(), b.logits.to_vec());
    }

    #[test]
    fn zero_projection_equals_plain_encoder_decoder() {
        let m = Seq2SeqModel::new(toy_config(), 6).unwrap();
        m.hormone.proj_w2.data_mut().iter_mut().for_each(|v| *v = 0.0);
        let s = sample();
        let with_block = m.forward(&s).unwrap().logits.to_vec();
        let h = m.encode(&s.input_ids, &s.input_mask, 2).unwrap();
        let (ids, mask) = shift_right(&s.target_ids, &s.target_mask, s.target_len);
        let plain = m.decode(&h, &s.input_mask, &ids, &mask).unwrap().to_vec();
        assert_eq!(with_block, plain);
    }

    #[test]
    fn freezing_marks_first_layers() {
        let m = Seq2SeqModel::new(toy_config(), 7).unwrap();
        let frozen = m.frozen_parameter_names(1);
        assert!(!frozen.is_empty());
        for (name, t) in m.parameters() {
            assert_eq!(t.requires_grad(), !frozen.contains(&name), "{name}");
        }
        assert!(frozen.iter().all(|n| n.starts_with("enc.0.") || n.starts_with("dec.0.")));
        assert_eq!(m.apply_freezing(0), 1.0);
        let f = m.apply_freezing(1);
        assert!(f > 0.0 && f < 1.0);
    }

    #[test]
    fn fixed_alpha_is_not_trainable() {
        let cfg = ModelConfig {
            ablation: Ablation { fixed_alpha: Some(0.1), ..Ablation::default() },
            ..toy_config()
        };
        let m = Seq2SeqModel::new(cfg, 8).unwrap();
        assert!(!m.hormone.alpha.requires_grad());
        assert_eq!(m.hormone.alpha_eff().item(), 0.1);
    }

    #[test]
    fn three_hormone_mode_predicts_three() {
        let cfg = ModelConfig {
            ablation: Ablation { three_hormone_mode: true, ..Ablation::default() },
            ..toy_config()
        };
        let m = Seq2SeqModel::new(cfg, 9).unwrap();
        assert_eq!(m.forward(&sample()).unwrap().h_hat.shape(), &[2, 3]);
    }

    #[test]
    fn kv_transfer_applied_unless_disabled() {
        let m = Seq2SeqModel::new(toy_config(), 10).unwrap();
        let wk = m.encoder[1].attn.wk.weight.to_vec();
        assert!(m.hormone.heads.iter().all(|h| h.key_proj.to_vec() == wk));
        let cfg = ModelConfig {
            ablation: Ablation { random_kv_init: true, ..Ablation::default() },
            ..toy_config()
        };
        let r = Seq2SeqModel::new(cfg, 10).unwrap();
        assert!(r.hormone.heads.iter().all(|h| h.key_proj.to_vec() != r.encoder[1].attn.wk.weight.to_vec()));
    }

    #[test]
    fn builds_from_real_vocab() {
        let pairs = [DialoguePair::new("hi there", "hello", Tone::Friendly).unwrap()];
        let vocab = Vocab::build(pairs.iter().flat_map(|p| [p.input.as_str(), p.output.as_str()]));
        let m = Seq2SeqModel::new(ModelConfig { vocab_size: vocab.len().max(5), ..toy_config() }, 1);
        assert!(m.is_ok());
    }
}
