//! Finite-difference check of the full training objective with respect to
//! every trainable parameter of a toy model.
//!
//!     cargo run --release --example gradcheck

use endocrine::data::{TokenBatch, Tone};
use endocrine::losses::{compute_losses, LossWeights};
use endocrine::model::{ModelConfig, Seq2SeqModel};
use endocrine::tensor::{finite_difference_check, Rng, Tensor, TensorError};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ModelConfig {
        d_model: 16,
        n_enc_layers: 2,
        n_dec_layers: 2,
        n_seq_heads: 2,
        n_hormone_heads: 2,
        ff_width: 32,
        vocab_size: 20,
        max_len: 8,
        ..ModelConfig::default()
    };
    let model = Seq2SeqModel::new(config, 7)?;
    // Orthogonal queries sit on the |cos| kink of the diversity term; nudge
    // every parameter to a generic point first.
    let mut rng = Rng::stream(7, "perturb");
    for (_, p) in model.trainable_parameters() {
        p.data_mut().iter_mut().for_each(|v| *v += 0.05 * rng.normal());
    }
    let tones = vec![Tone::Excited, Tone::Sad];
    let batch = TokenBatch {
        batch_size: 2,
        input_len: 4,
        target_len: 3,
        input_ids: vec![4, 9, 13, 1, 6, 7, 1, 0],
        input_mask: vec![1, 1, 1, 1, 1, 1, 1, 0],
        target_ids: vec![15, 2, 1, 18, 1, 0],
        target_mask: vec![1, 1, 1, 1, 1, 0],
        hormone_targets: tones.iter().flat_map(|t| t.hormones().0).collect(),
        tones,
    };
    let w = LossWeights::default();
    let loss = |_: &Tensor| {
        let out = model.forward(&batch)?;
        compute_losses(&model, &out, &batch, &w)
            .map(|(t, _)| t)
            .map_err(|e| TensorError::Contract(e.to_string()))
    };
    let params = model.trainable_parameters();
    for (name, p) in &params {
        params.iter().for_each(|(_, q)| q.zero_grad());
        let r = finite_difference_check(loss, p, 1e-5, 1e-4)?;
        println!("{name:<34} {:>5}  max rel {:.2e}  {}", r.coordinates, r.max_rel_error, if r.passed { "ok" } else { "FAIL" });
    }
    Ok(())
}
