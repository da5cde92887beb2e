//! Greedy response generation with hormone read-out, attention inspection,
//! and the smoothed multi-turn hormone state.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{split_words, Hormone, HormoneVector, Tone, Vocab, BOS_ID, EOS_ID, INPUT_PREFIX, N_HORMONES};
use crate::eval::nearest_tone_among;
use crate::model::{AttentionMap, Seq2SeqModel};
use crate::tensor::{no_grad, TensorError};

/// Default decay coefficient of the session recurrence.
pub const DEFAULT_LAMBDA: f64 = 0.7;

#[derive(Debug, Error)]
pub enum InferError {
    #[error("{0}")]
    Contract(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub response: String,
    /// Predicted value per active hormone, canonical order.
    pub hormones: Vec<(Hormone, f64)>,
    pub nearest_tone: Tone,
    /// Per active hormone, `[n_heads, L]` weights over the prefixed input.
    pub attn_maps: Option<Vec<AttentionMap>>,
    /// Input tokens (after prefixing) the attention maps refer to.
    pub input_tokens: Vec<String>,
}

impl InferenceResult {
    /// The full six-value vector, when the model predicts all six.
    pub fn vector(&self) -> Option<HormoneVector> {
        if self.hormones.len() != N_HORMONES {
            return None;
        }
        let mut v = [0.0; N_HORMONES];
        for (h, x) in &self.hormones {
            v[h.index()] = *x;
        }
        HormoneVector::new(v)
    }

    /// `{response, hormones: {name: value}, nearest_tone}`.
    pub fn to_json(&self) -> serde_json::Value {
        let hormones: serde_json::Map<String, serde_json::Value> =
            self.hormones.iter().map(|(h, v)| (h.name().to_string(), serde_json::json!(v))).collect();
        serde_json::json!({
            "response": self.response,
            "hormones": hormones,
            "nearest_tone": self.nearest_tone.name(),
        })
    }
}

/// Runs the prefixed `text` through the model and greedily decodes at most
/// `max_gen_len` tokens.
pub fn infer(model: &Seq2SeqModel, vocab: &Vocab, text: &str, max_gen_len: usize) -> Result<InferenceResult, InferError> {
    if text.trim().is_empty() {
        return Err(InferError::Contract("input text must be non-empty".into()));
    }
    let max_gen_len = max_gen_len.min(model.config.max_len);
    no_grad(|| {
        let (ids, mask) = vocab.tokenize(&format!("{INPUT_PREFIX}{text}"), model.config.max_len);
        let real = mask.iter().filter(|&&m| m == 1).count();
        let (ids, mask) = (&ids[..real], &mask[..real]);
        let h = model.encode(ids, mask, 1)?;
        let (h_hat, _, memory, maps) = model.hormone_path(&h, mask)?;

        let mut dec = vec![BOS_ID];
        let mut out = Vec::new();
        let v = model.config.vocab_size;
        while out.len() < max_gen_len && dec.len() < model.config.max_len {
            let logits = model.decode(&memory, mask, &dec, &vec![1; dec.len()])?;
            let data = logits.data();
            let last = &data[(dec.len() - 1) * v..dec.len() * v];
            let next = last
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
                .0;
            if next == EOS_ID {
                break;
            }
            out.push(next);
            dec.push(next);
        }

        let hormones: Vec<Hormone> = model.hormone.hormones();
        let values = h_hat.to_vec();
        Ok(InferenceResult {
            response: vocab.detokenize(&out),
            nearest_tone: nearest_tone_among(&values, &hormones),
            hormones: hormones.into_iter().zip(values).collect(),
            attn_maps: Some(maps),
            input_tokens: ids.iter().map(|&i| vocab.token(i).to_string()).collect(),
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub current: HormoneVector,
    pub lambda: f64,
    pub turn_count: usize,
}

impl SessionState {
    /// Starts from the Neutral profile.
    pub fn new(lambda: f64) -> Result<Self, InferError> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(InferError::Contract(format!("lambda must lie in [0, 1], got {lambda}")));
        }
        Ok(Self {
            current: Tone::Neutral.hormones(),
            lambda,
            turn_count: 0,
        })
    }
}

/// `state = lambda * state + (1 - lambda) * h_hat`, componentwise.
pub fn session_step(state: &SessionState, h_hat: &HormoneVector) -> SessionState {
    let l = state.lambda;
    let mut next = [0.0; N_HORMONES];
    for (i, n) in next.iter_mut().enumerate() {
        *n = l * state.current.0[i] + (1.0 - l) * h_hat.0[i];
    }
    SessionState {
        current: HormoneVector(next),
        lambda: l,
        turn_count: state.turn_count + 1,
    }
}

/// Per turn: infer, then fold the prediction into the smoothed state. The
/// state is reported only; it does not feed back into generation.
pub fn run_session(
    model: &Seq2SeqModel,
    vocab: &Vocab,
    turns: &[String],
    lambda: f64,
    max_gen_len: usize,
) -> Result<Vec<(InferenceResult, SessionState)>, InferError> {
    if turns.is_empty() {
        return Err(InferError::Contract("session needs at least one turn".into()));
    }
    let mut state = SessionState::new(lambda)?;
    let mut out = Vec::with_capacity(turns.len());
    for text in turns {
        let r = infer(model, vocab, text, max_gen_len)?;
        let v = r
            .vector()
            .ok_or_else(|| InferError::Contract("session mode needs all six hormones".into()))?;
        state = session_step(&state, &v);
        out.push((r, state));
    }
    Ok(out)
}

/// One attention weight of one hormone head on one real input token.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttentionRow {
    pub hormone: Hormone,
    pub head: usize,
    pub position: usize,
    pub token: String,
    pub weight: f64,
}

/// Attention of every hormone head over the prefixed `text`.
pub fn inspect_attention(model: &Seq2SeqModel, vocab: &Vocab, text: &str) -> Result<Vec<AttentionRow>, InferError> {
    let r = infer(model, vocab, text, 0)?;
    let len = r.input_tokens.len();
    let maps = r.attn_maps.as_ref().expect("infer returns maps");
    let mut rows = Vec::new();
    for ((hormone, _), map) in r.hormones.iter().zip(maps) {
        for (head, weights) in map.chunks(len).enumerate() {
            for (position, (&weight, token)) in weights.iter().zip(&r.input_tokens).enumerate() {
                rows.push(AttentionRow {
                    hormone: *hormone,
                    head,
                    position,
                    token: token.clone(),
                    weight,
                });
            }
        }
    }
    Ok(rows)
}

/// Word count of a response, for length bounds.
pub fn response_len(response: &str) -> usize {
    split_words(response).len()
}
