//! Short runs of each ablation switch on the desk data, reporting validation
//! hormone metrics side by side. Compares variants at equal budget; the
//! epoch count is an argument.
//!
//!     cargo run --release --example ablations -- [epochs]

use endocrine::eval::{evaluate, ACCURACY_TOL};
use endocrine::model::{Ablation, ModelConfig, Seq2SeqModel};
use endocrine::pipeline::Dataset;
use endocrine::train::{train, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let epochs = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(8);
    let ds = Dataset::generate(42, 10, 0.8)?;
    let base = Ablation::default();
    let variants = [
        ("full model", base.clone()),
        ("detached hormone gradients", Ablation { detach_hormone_gradients: true, ..base.clone() }),
        ("random key/value init", Ablation { random_kv_init: true, ..base.clone() }),
        ("random query init", Ablation { random_query_init: true, ..base.clone() }),
        ("no diversity loss", Ablation { disable_diversity_loss: true, ..base.clone() }),
        ("no margin loss", Ablation { disable_margin_loss: true, ..base.clone() }),
        ("three hormones", Ablation { three_hormone_mode: true, ..base.clone() }),
        ("fixed alpha 0.1", Ablation { fixed_alpha: Some(0.1), ..base.clone() }),
        ("fixed alpha 0.5", Ablation { fixed_alpha: Some(0.5), ..base }),
    ];
    println!("{:<28} {:>8} {:>8} {:>8} {:>9}", "variant", "mse", "acc", "range", "seq loss");
    for (name, ablation) in variants {
        let config = ModelConfig { vocab_size: ds.vocab.len(), ablation, ..ModelConfig::default() };
        let model = Seq2SeqModel::new(config, 42)?;
        let cfg = TrainConfig { epochs, ..TrainConfig::default() };
        let outcome = train(&model, &ds.vocab, &ds.train, &ds.val, &cfg, None, |_| {})?;
        outcome.restore_best(&model);
        let r = evaluate(&model, &ds.vocab, &ds.val, ACCURACY_TOL)?;
        let seq = outcome.history[outcome.summary.best_epoch - 1].val.seq;
        println!(
            "{name:<28} {:>8.4} {:>7.1}% {:>8.3} {seq:>9.3}",
            r.average.mse,
            100.0 * r.average.accuracy,
            r.average.diff_range
        );
    }
    Ok(())
}
