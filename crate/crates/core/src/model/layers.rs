use crate::tensor::{gaussian, Result, Rng, Tensor};

pub(crate) const LN_EPS: f64 = 1e-6;

pub(crate) type Named = Vec<(String, Tensor)>;

pub(crate) fn push(out: &mut Named, prefix: &str, name: &str, t: &Tensor) {
    out.push((format!("{prefix}.{name}"), t.clone()));
}

#[derive(Debug, Clone)]
pub struct Linear {
    /// `[in, out]`
    pub weight: Tensor,
    pub bias: Option<Tensor>,
}

impl Linear {
    pub(crate) fn new(n_in: usize, n_out: usize, bias: bool, rng: &mut Rng) -> Self {
        Self::scaled(n_in, n_out, bias, 1.0, rng)
    }

    pub(crate) fn scaled(n_in: usize, n_out: usize, bias: bool, gain: f64, rng: &mut Rng) -> Self {
        Self {
            weight: gaussian(n_in, n_out, gain / (n_in as f64).sqrt(), rng),
            bias: bias.then(|| Tensor::parameter(&[n_out], vec![0.0; n_out]).expect("shape")),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = x.matmul(&self.weight)?;
        match &self.bias {
            Some(b) => y.add_row(b),
            None => Ok(y),
        }
    }

    pub(crate) fn params(&self, prefix: &str, out: &mut Named) {
        push(out, prefix, "weight", &self.weight);
        if let Some(b) = &self.bias {
            push(out, prefix, "bias", b);
        }
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
}

impl LayerNorm {
    pub(crate) fn new(d: usize) -> Self {
        Self {
            gamma: Tensor::parameter(&[d], vec![1.0; d]).expect("shape"),
            beta: Tensor::parameter(&[d], vec![0.0; d]).expect("shape"),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        x.layer_norm(&self.gamma, &self.beta, LN_EPS)
    }

    pub(crate) fn params(&self, prefix: &str, out: &mut Named) {
        push(out, prefix, "gamma", &self.gamma);
        push(out, prefix, "beta", &self.beta);
    }
}

/// Additive attention bias `[B, h, Lq, Lk]`: 0 where attention is allowed,
/// -inf at padded keys and (if `causal`) at future positions.
pub fn attention_bias(key_mask: &[u8], batch: usize, heads: usize, lq: usize, lk: usize, causal: bool) -> Tensor {
    let mut bias = Vec::with_capacity(batch * heads * lq * lk);
    for b in 0..batch {
        let keys = &key_mask[b * lk..(b + 1) * lk];
        for _ in 0..heads {
            for q in 0..lq {
                bias.extend((0..lk).map(|k| {
                    if keys[k] == 0 || (causal && k > q) {
                        f64::NEG_INFINITY
                    } else {
                        0.0
                    }
                }));
            }
        }
    }
    Tensor::new(&[batch, heads, lq, lk], bias).expect("shape")
}

/// Splits `[B, L, d]` into `[B, h, L, d/h]`.
pub(crate) fn split_heads(x: &Tensor, heads: usize) -> Result<Tensor> {
    let s = x.shape();
    let (b, l, d) = (s[0], s[1], s[2]);
    x.reshape(&[b, l, heads, d / heads])?.permute(&[0, 2, 1, 3])
}

fn merge_heads(x: &Tensor) -> Result<Tensor> {
    let s = x.shape();
    let (b, h, l, dk) = (s[0], s[1], s[2], s[3]);
    x.permute(&[0, 2, 1, 3])?.reshape(&[b, l, h * dk])
}

/// Multi-head scaled dot-product attention without projection biases.
#[derive(Debug, Clone)]
pub struct Attention {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub heads: usize,
}

impl Attention {
    pub(crate) fn new(d: usize, heads: usize, out_gain: f64, rng: &mut Rng) -> Self {
        Self {
            wq: Linear::new(d, d, false, rng),
            wk: Linear::new(d, d, false, rng),
            wv: Linear::new(d, d, false, rng),
            wo: Linear::scaled(d, d, false, out_gain, rng),
            heads,
        }
    }

    /// `query: [B, Lq, d]`, `memory: [B, Lk, d]`, `bias: [B, h, Lq, Lk]`.
    pub fn forward(&self, query: &Tensor, memory: &Tensor, bias: &Tensor) -> Result<Tensor> {
        let d = query.shape()[2];
        let q = split_heads(&self.wq.forward(query)?, self.heads)?;
        let k = split_heads(&self.wk.forward(memory)?, self.heads)?;
        let v = split_heads(&self.wv.forward(memory)?, self.heads)?;
        let scale = 1.0 / ((d / self.heads) as f64).sqrt();
        let weights = q.matmul_t(&k)?.scale(scale).add(bias)?.softmax(3)?;
        self.wo.forward(&merge_heads(&weights.matmul(&v)?)?)
    }

    pub(crate) fn params(&self, prefix: &str, out: &mut Named) {
        self.wq.params(&format!("{prefix}.wq"), out);
        self.wk.params(&format!("{prefix}.wk"), out);
        self.wv.params(&format!("{prefix}.wv"), out);
        self.wo.params(&format!("{prefix}.wo"), out);
    }
}

#[derive(Debug, Clone)]
pub struct FeedForward {
    pub w_in: Linear,
    pub w_out: Linear,
}

impl FeedForward {
    pub(crate) fn new(d: usize, ff: usize, out_gain: f64, rng: &mut Rng) -> Self {
        Self {
            w_in: Linear::new(d, ff, false, rng),
            w_out: Linear::scaled(ff, d, false, out_gain, rng),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.w_out.forward(&self.w_in.forward(x)?.gelu())
    }

    pub(crate) fn params(&self, prefix: &str, out: &mut Named) {
        self.w_in.params(&format!("{prefix}.w_in"), out);
        self.w_out.params(&format!("{prefix}.w_out"), out);
    }
}

#[derive(Debug, Clone)]
pub struct EncoderLayer {
    pub norm_attn: LayerNorm,
    pub attn: Attention,
    pub norm_ff: LayerNorm,
    pub ff: FeedForward,
}

impl EncoderLayer {
    pub(crate) fn new(d: usize, heads: usize, ff: usize, out_gain: f64, rng: &mut Rng) -> Self {
        Self {
            norm_attn: LayerNorm::new(d),
            attn: Attention::new(d, heads, out_gain, rng),
            norm_ff: LayerNorm::new(d),
            ff: FeedForward::new(d, ff, out_gain, rng),
        }
    }

    pub fn forward(&self, x: &Tensor, bias: &Tensor) -> Result<Tensor> {
        let h = self.norm_attn.forward(x)?;
        let x = x.add(&self.attn.forward(&h, &h, bias)?)?;
        x.add(&self.ff.forward(&self.norm_ff.forward(&x)?)?)
    }

    pub(crate) fn params(&self, prefix: &str, out: &mut Named) {
        self.norm_attn.params(&format!("{prefix}.norm_attn"), out);
        self.attn.params(&format!("{prefix}.attn"), out);
        self.norm_ff.params(&format!("{prefix}.norm_ff"), out);
        self.ff.params(&format!("{prefix}.ff"), out);
    }
}

#[derive(Debug, Clone)]
pub struct DecoderLayer {
    pub norm_self: LayerNorm,
    pub self_attn: Attention,
    pub norm_cross: LayerNorm,
    pub cross_attn: Attention,
    pub norm_ff: LayerNorm,
    pub ff: FeedForward,
}

impl DecoderLayer {
    pub(crate) fn new(d: usize, heads: usize, ff: usize, out_gain: f64, rng: &mut Rng) -> Self {
        Self {
            norm_self: LayerNorm::new(d),
            self_attn: Attention::new(d, heads, out_gain, rng),
            norm_cross: LayerNorm::new(d),
            cross_attn: Attention::new(d, heads, out_gain, rng),
            norm_ff: LayerNorm::new(d),
            ff: FeedForward::new(d, ff, out_gain, rng),
        }
    }

    pub fn forward(&self, y: &Tensor, memory: &Tensor, self_bias: &Tensor, cross_bias: &Tensor) -> Result<Tensor> {
        let h = self.norm_self.forward(y)?;
        let y = y.add(&self.self_attn.forward(&h, &h, self_bias)?)?;
        let h = self.norm_cross.forward(&y)?;
        let y = y.add(&self.cross_attn.forward(&h, memory, cross_bias)?)?;
        y.add(&self.ff.forward(&self.norm_ff.forward(&y)?)?)
    }

    pub(crate) fn params(&self, prefix: &str, out: &mut Named) {
        self.norm_self.params(&format!("{prefix}.norm_self"), out);
        self.self_attn.params(&format!("{prefix}.self_attn"), out);
        self.norm_cross.params(&format!("{prefix}.norm_cross"), out);
        self.cross_attn.params(&format!("{prefix}.cross_attn"), out);
        self.norm_ff.params(&format!("{prefix}.norm_ff"), out);
        self.ff.params(&format!("{prefix}.ff"), out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bias_masks_pad_and_future() {
        let b = attention_bias(&[1, 1, 0], 1, 1, 3, 3, true).to_vec();
        let inf = f64::NEG_INFINITY;
        assert_eq!(b, vec![0.0, inf, inf, 0.0, 0.0, inf, 0.0, 0.0, inf]);
    }

    #[test]
    fn split_merge_round_trip() {
        let x = Tensor::new(&[2, 3, 4], (0..24).map(f64::from).collect()).unwrap();
        let y = merge_heads(&split_heads(&x, 2).unwrap()).unwrap();
        assert_eq!(y.to_vec(), x.to_vec());
    }

    #[test]
    fn attention_rows_ignore_masked_keys() {
        let mut rng = Rng::new(3);
        let attn = Attention::new(4, 2, 1.0, &mut rng);
        let mk = |v: f64| Tensor::new(&[1, 3, 4], (0..12).map(|i| if i >= 8 { v } else { i as f64 * 0.1 }).collect()).unwrap();
        let bias = attention_bias(&[1, 1, 0], 1, 2, 3, 3, false);
        let a = attn.forward(&mk(0.0), &mk(0.0), &bias).unwrap().to_vec();
        let b = attn.forward(&mk(0.0), &mk(9.0), &bias).unwrap().to_vec();
        assert_eq!(a[..8], b[..8]);
    }
}
