//! Per-hormone attention heads, the hormone-to-embedding projection and the
//! multiplicative modulation of encoder states.

use crate::data::Hormone;
use crate::tensor::{gaussian, orthogonal_init, Result, Rng, Tensor, TensorError};

use super::layers::{push, split_heads, LayerNorm, Linear, Named};

/// Range the learnable modulation gate is clamped to.
pub const ALPHA_MIN: f64 = 0.1;
pub const ALPHA_MAX: f64 = 0.5;
pub const ALPHA_INIT: f64 = 0.3;

/// Attention unit for one hormone: `n_heads` learnable queries over slices
/// of width `d / n_heads`, followed by `LayerNorm` and an MLP
/// `d -> d -> d/2 -> d/4 -> 1` and a sigmoid.
#[derive(Debug, Clone)]
pub struct HormoneHead {
    pub hormone: Hormone,
    /// `[n_heads, d_k]`
    pub queries: Tensor,
    pub key_proj: Tensor,
    pub value_proj: Tensor,
    pub norm: LayerNorm,
    pub mlp: [Linear; 3],
    pub out: Linear,
    /// Scalar output bias.
    pub bias: Tensor,
    pub tau: f64,
}

/// Detached attention weights, flat `[B, n_heads, L]`.
pub type AttentionMap = Vec<f64>;

/// `[B, h, L]` additive key mask: 0 on real tokens, -inf on padding.
pub(crate) fn key_bias(mask: &[u8], batch: usize, heads: usize, len: usize) -> Result<Tensor> {
    let mut bias = Vec::with_capacity(batch * heads * len);
    for b in 0..batch {
        let row = &mask[b * len..(b + 1) * len];
        if row.iter().all(|&m| m == 0) {
            return Err(TensorError::Contract(format!("batch row {b} has no unmasked token")));
        }
        for _ in 0..heads {
            bias.extend(row.iter().map(|&m| if m == 0 { f64::NEG_INFINITY } else { 0.0 }));
        }
    }
    Tensor::new(&[batch, heads, len], bias)
}

impl HormoneHead {
    fn new(hormone: Hormone, queries: Tensor, d: usize, tau: f64, rng: &mut Rng) -> Self {
        let std = 1.0 / (d as f64).sqrt();
        Self {
            hormone,
            queries,
            key_proj: gaussian(d, d, std, rng),
            value_proj: gaussian(d, d, std, rng),
            norm: LayerNorm::new(d),
            mlp: [
                Linear::new(d, d, true, rng),
                Linear::new(d, d / 2, true, rng),
                Linear::new(d / 2, d / 4, true, rng),
            ],
            out: Linear::new(d / 4, 1, false, rng),
            bias: Tensor::parameter(&[], vec![0.0]).expect("scalar"),
            tau,
        }
    }

    pub fn n_heads(&self) -> usize {
        self.queries.shape()[0]
    }

    /// `h: [B, L, d]`, `bias` from [`key_bias`]. Returns the `[B, 1]` value in
    /// (0, 1) and the detached attention weights.
    pub fn attend(&self, h: &Tensor, bias: &Tensor) -> Result<(Tensor, AttentionMap)> {
        let (b, l, d) = (h.shape()[0], h.shape()[1], h.shape()[2]);
        let (nh, dk) = (self.queries.shape()[0], self.queries.shape()[1]);
        let k = split_heads(&h.matmul(&self.key_proj)?, nh)?;
        let v = split_heads(&h.matmul(&self.value_proj)?, nh)?;
        let scores = k
            .matmul(&self.queries.reshape(&[nh, dk, 1])?)?
            .reshape(&[b, nh, l])?
            .scale(1.0 / (self.tau * (dk as f64).sqrt()))
            .add(bias)?;
        let weights = scores.softmax(2)?;
        let context = weights.reshape(&[b, nh, 1, l])?.matmul(&v)?.reshape(&[b, d])?;
        let mut z = self.norm.forward(&context)?;
        for layer in &self.mlp {
            z = layer.forward(&z)?.gelu();
        }
        let value = self.out.forward(&z)?.add(&self.bias)?.sigmoid();
        Ok((value, weights.to_vec()))
    }

    fn params(&self, prefix: &str, out: &mut Named) {
        push(out, prefix, "queries", &self.queries);
        push(out, prefix, "key_proj", &self.key_proj);
        push(out, prefix, "value_proj", &self.value_proj);
        self.norm.params(&format!("{prefix}.norm"), out);
        for (i, layer) in self.mlp.iter().enumerate() {
            layer.params(&format!("{prefix}.mlp{i}"), out);
        }
        self.out.params(&format!("{prefix}.out"), out);
        push(out, prefix, "bias", &self.bias);
    }
}

#[derive(Debug, Clone)]
pub struct HormoneBlock {
    /// One head per active hormone, canonical order.
    pub heads: Vec<HormoneHead>,
    /// `[k, d]`, applied as `h_hat · W1`.
    pub proj_w1: Tensor,
    pub proj_norm: LayerNorm,
    /// `[d, d]`
    pub proj_w2: Tensor,
    /// Raw gate; the effective value is clamped to `[ALPHA_MIN, ALPHA_MAX]`.
    pub alpha: Tensor,
}

/// Output of [`HormoneBlock::compute_hormones`].
#[derive(Debug, Clone)]
pub struct HormoneOutput {
    /// `[B, k]` in (0, 1).
    pub h_hat: Tensor,
    /// Per active hormone, detached `[B, n_heads, L]`.
    pub attn_maps: Vec<AttentionMap>,
}

impl HormoneBlock {
    /// Queries are orthogonal jointly across hormones: for each head slice,
    /// the `k` hormones' queries are orthonormal rows of one QR draw, so all
    /// `k * n_heads` vectors embedded in `R^d` are orthonormal when
    /// `k <= d / n_heads`. With `random_queries` they are plain Gaussian.
    pub fn new(
        hormones: &[Hormone],
        d: usize,
        n_heads: usize,
        tau: f64,
        random_queries: bool,
        rng: &mut Rng,
    ) -> Result<Self> {
        if n_heads == 0 || !d.is_multiple_of(n_heads) || !d.is_multiple_of(4) {
            return Err(TensorError::Contract(format!(
                "hormone block needs d divisible by n_heads and by 4 (d={d}, n_heads={n_heads})"
            )));
        }
        let (k, dk) = (hormones.len(), d / n_heads);
        let mut per_hormone = vec![Vec::with_capacity(d); k];
        for _ in 0..n_heads {
            let slice = if random_queries {
                gaussian(k, dk, 1.0 / (dk as f64).sqrt(), rng)
            } else {
                orthogonal_init(k, dk, rng)?
            };
            let data = slice.data();
            for (h, q) in per_hormone.iter_mut().enumerate() {
                q.extend_from_slice(&data[h * dk..(h + 1) * dk]);
            }
        }
        let heads = hormones
            .iter()
            .zip(per_hormone)
            .map(|(&h, q)| {
                let queries = Tensor::parameter(&[n_heads, dk], q).expect("shape");
                HormoneHead::new(h, queries, d, tau, rng)
            })
            .collect();
        Ok(Self {
            heads,
            proj_w1: gaussian(k, d, 1.0, rng),
            proj_norm: LayerNorm::new(d),
            proj_w2: gaussian(d, d, 1.0 / (d as f64).sqrt(), rng),
            alpha: Tensor::parameter(&[], vec![ALPHA_INIT]).expect("scalar"),
        })
    }

    pub fn hormones(&self) -> Vec<Hormone> {
        self.heads.iter().map(|h| h.hormone).collect()
    }

    /// Runs every head on `h: [B, L, d]` under the `[B, L]` token mask.
    pub fn compute_hormones(&self, h: &Tensor, mask: &[u8]) -> Result<HormoneOutput> {
        let (b, l) = (h.shape()[0], h.shape()[1]);
        let bias = key_bias(mask, b, self.heads[0].n_heads(), l)?;
        let mut values = Vec::with_capacity(self.heads.len());
        let mut attn_maps = Vec::with_capacity(self.heads.len());
        for head in &self.heads {
            let (v, a) = head.attend(h, &bias)?;
            values.push(v);
            attn_maps.push(a);
        }
        Ok(HormoneOutput {
            h_hat: Tensor::concat(&values, 1)?,
            attn_maps,
        })
    }

    /// `e = tanh(W2 · gelu(LayerNorm(W1 · h_hat)))`, shape `[B, d]`.
    pub fn hormones_to_embedding(&self, h_hat: &Tensor) -> Result<Tensor> {
        let z = self.proj_norm.forward(&h_hat.matmul(&self.proj_w1)?)?.gelu();
        Ok(z.matmul(&self.proj_w2)?.tanh())
    }

    /// Gate actually used in [`HormoneBlock::modulate`].
    pub fn alpha_eff(&self) -> Tensor {
        self.alpha.clamp(ALPHA_MIN, ALPHA_MAX)
    }

    /// `H ⊙ (1 + α_eff · e)` with `e` repeated along the sequence.
    pub fn modulate(&self, h: &Tensor, e: &Tensor) -> Result<Tensor> {
        let gate = e.broadcast_over_seq(h.shape()[1])?.mul(&self.alpha_eff())?.add_scalar(1.0);
        h.mul(&gate)
    }

    /// Copies the given `d × d` key/value projections into every head.
    pub fn transfer_kv_init(&self, wk: &Tensor, wv: &Tensor) -> Result<()> {
        for head in &self.heads {
            for (dst, src) in [(&head.key_proj, wk), (&head.value_proj, wv)] {
                if dst.shape() != src.shape() {
                    return Err(TensorError::Shape {
                        op: "transfer_kv_init",
                        lhs: dst.shape().to_vec(),
                        rhs: src.shape().to_vec(),
                    });
                }
                dst.data_mut().copy_from_slice(&src.data());
            }
        }
        Ok(())
    }

    /// Flattened per-hormone query vectors (length d each).
    pub fn flat_queries(&self) -> Result<Vec<Tensor>> {
        self.heads.iter().map(|h| h.queries.reshape(&[h.queries.numel()])).collect()
    }

    pub(crate) fn params(&self, out: &mut Named) {
        for head in &self.heads {
            head.params(&format!("hormone.{}", head.hormone.name()), out);
        }
        push(out, "hormone", "proj_w1", &self.proj_w1);
        self.proj_norm.params("hormone.proj_norm", out);
        push(out, "hormone", "proj_w2", &self.proj_w2);
        push(out, "hormone", "alpha", &self.alpha);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::N_HORMONES;
    use crate::tensor::finite_difference_check;

    fn block(d: usize, heads: usize, seed: u64) -> HormoneBlock {
        HormoneBlock::new(&Hormone::ALL, d, heads, 0.5, false, &mut Rng::new(seed)).unwrap()
    }

    fn states(b: usize, l: usize, d: usize, seed: u64) -> Tensor {
        let mut rng = Rng::new(seed);
        Tensor::new(&[b, l, d], (0..b * l * d).map(|_| rng.normal()).collect()).unwrap()
    }

    #[test]
    fn queries_jointly_orthonormal() {
        let blk = block(64, 4, 1);
        let qs: Vec<Vec<f64>> = blk
            .heads
            .iter()
            .flat_map(|h| {
                let q = h.queries.to_vec();
                (0..4).map(move |i| {
                    let mut v = vec![0.0; 64];
                    v[i * 16..(i + 1) * 16].copy_from_slice(&q[i * 16..(i + 1) * 16]);
                    v
                })
            })
            .collect();
        assert_eq!(qs.len(), 24);
        for (i, a) in qs.iter().enumerate() {
            for (j, b) in qs.iter().enumerate() {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() <= 1e-6, "({i},{j}) {dot}");
            }
        }
    }

    #[test]
    fn output_shape_and_range() {
        let blk = block(32, 4, 2);
        let out = blk.compute_hormones(&states(2, 8, 32, 3), &[1; 16]).unwrap();
        assert_eq!(out.h_hat.shape(), &[2, N_HORMONES]);
        assert!(out.h_hat.to_vec().iter().all(|&v| v > 0.0 && v < 1.0));
        assert_eq!(out.attn_maps.len(), 6);
    }

    #[test]
    fn temperature_sharpens() {
        // two keys with logits (1, 0) before temperature scaling
        let sharp = |tau: f64| {
            let z = Tensor::new(&[2], vec![1.0 / tau, 0.0]).unwrap();
            z.softmax(0).unwrap().to_vec()[0]
        };
        assert!((sharp(0.5) - 0.880_797_077_977_882_3).abs() < 1e-12);
        assert!((sharp(1.0) - 0.731_058_578_630_004_9).abs() < 1e-12);
    }

    #[test]
    fn single_token_gets_all_weight() {
        let blk = block(32, 4, 4);
        let out = blk.compute_hormones(&states(1, 3, 32, 5), &[1, 0, 0]).unwrap();
        for map in &out.attn_maps {
            for h in 0..4 {
                assert_eq!(map[h * 3..h * 3 + 3], [1.0, 0.0, 0.0]);
            }
        }
    }

    #[test]
    fn attention_sums_to_one_over_real_tokens() {
        let blk = block(32, 4, 4);
        let out = blk.compute_hormones(&states(2, 5, 32, 6), &[1, 1, 1, 0, 0, 1, 1, 1, 1, 1]).unwrap();
        for map in &out.attn_maps {
            for row in map.chunks(5) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                assert!(row.iter().all(|&w| w >= 0.0));
            }
        }
    }

    #[test]
    fn masked_content_is_ignored() {
        let blk = block(32, 4, 7);
        let a = states(1, 4, 32, 8);
        let mut raw = a.to_vec();
        raw[3 * 32..].iter_mut().for_each(|v| *v = 42.0);
        let b = Tensor::new(&[1, 4, 32], raw).unwrap();
        let mask = [1, 1, 1, 0];
        let ha = blk.compute_hormones(&a, &mask).unwrap().h_hat.to_vec();
        let hb = blk.compute_hormones(&b, &mask).unwrap().h_hat.to_vec();
        assert_eq!(ha, hb);
    }

    #[test]
    fn all_masked_row_is_contract_error() {
        let blk = block(32, 4, 7);
        assert!(blk.compute_hormones(&states(1, 2, 32, 1), &[0, 0]).is_err());
    }

    #[test]
    fn zero_w2_gives_zero_embedding_and_identity_modulation() {
        let blk = block(32, 4, 9);
        blk.proj_w2.data_mut().iter_mut().for_each(|v| *v = 0.0);
        let h_hat = Tensor::new(&[2, 6], vec![0.5; 12]).unwrap();
        let e = blk.hormones_to_embedding(&h_hat).unwrap();
        assert!(e.to_vec().iter().all(|&v| v == 0.0));
        let h = states(2, 3, 32, 10);
        assert_eq!(blk.modulate(&h, &e).unwrap().to_vec(), h.to_vec());
    }

    #[test]
    fn embedding_bounded_and_modulation_bounded() {
        let blk = block(32, 4, 11);
        let h_hat = Tensor::new(&[1, 6], vec![0.99, 0.01, 0.5, 0.9, 0.2, 0.7]).unwrap();
        let e = blk.hormones_to_embedding(&h_hat).unwrap();
        assert!(e.to_vec().iter().all(|v| v.abs() <= 1.0));
        let h = states(1, 4, 32, 12);
        let m = blk.modulate(&h, &e).unwrap().to_vec();
        for (x, y) in h.to_vec().iter().zip(&m) {
            assert!((y - x).abs() <= 0.5 * x.abs() + 1e-15);
        }
    }

    #[test]
    fn alpha_is_clamped() {
        let blk = block(32, 4, 13);
        blk.alpha.data_mut()[0] = 0.7;
        assert_eq!(blk.alpha_eff().item(), 0.5);
        blk.alpha.data_mut()[0] = -3.0;
        assert_eq!(blk.alpha_eff().item(), 0.1);
    }

    #[test]
    fn projection_w1_gradient_matches_differences() {
        let blk = block(16, 2, 14);
        let h_hat = Tensor::new(&[2, 6], vec![0.9, 0.1, 0.4, 0.8, 0.3, 0.6, 0.2, 0.5, 0.7, 0.1, 0.9, 0.4]).unwrap();
        let f = |_: &Tensor| Ok(blk.hormones_to_embedding(&h_hat)?.mul(&blk.hormones_to_embedding(&h_hat)?)?.sum());
        let r = finite_difference_check(f, &blk.proj_w1, 1e-5, 1e-4).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn kv_transfer_copies_then_heads_diverge() {
        let blk = block(16, 2, 15);
        let mut rng = Rng::new(16);
        let (wk, wv) = (gaussian(16, 16, 0.1, &mut rng), gaussian(16, 16, 0.1, &mut rng));
        blk.transfer_kv_init(&wk, &wv).unwrap();
        for head in &blk.heads {
            assert_eq!(head.key_proj.to_vec(), wk.to_vec());
            assert_eq!(head.value_proj.to_vec(), wv.to_vec());
        }
        blk.heads[0].key_proj.data_mut()[0] += 1.0;
        assert_eq!(blk.heads[1].key_proj.to_vec(), wk.to_vec());
        assert!(blk.transfer_kv_init(&gaussian(8, 16, 0.1, &mut rng), &wv).is_err());
    }
}
