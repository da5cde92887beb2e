//! Desk-scale training run (d=64, 3+3 layers, first layer of each frozen).
//! Writes best.ckpt, last.ckpt, metrics.csv and summary.json.
//!
//!     cargo run --release --example train_desk -- [out_dir] [epochs]

use std::path::PathBuf;

use endocrine::eval::{evaluate, ACCURACY_TOL};
use endocrine::model::{ModelConfig, Seq2SeqModel};
use endocrine::pipeline::Dataset;
use endocrine::train::{train, TrainConfig, TrainOutputs};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "target/desk/run".into()));
    let epochs = args.next().map(|s| s.parse()).transpose()?.unwrap_or(30);

    let ds = Dataset::generate(42, 10, 0.8)?;
    let model = Seq2SeqModel::new(ModelConfig { vocab_size: ds.vocab.len(), ..ModelConfig::default() }, 42)?;
    println!("trainable fraction {:.1}%", 100.0 * model.trainable_fraction());

    let cfg = TrainConfig { epochs, min_epoch_for_stop: 15, ..TrainConfig::default() };
    let outputs = TrainOutputs { dir: out.clone() };
    let outcome = train(&model, &ds.vocab, &ds.train, &ds.val, &cfg, Some(&outputs), |r| {
        println!(
            "epoch {:>2}  lr {:.2e}  train {:.4}  val {:.4}  val mse {:.5}",
            r.epoch, r.lr, r.train.total, r.val.total, r.val.hormone_mse
        )
    })?;
    outcome.restore_best(&model);
    println!("best epoch {} -> {}", outcome.summary.best_epoch, outputs.best().display());
    print!("{}", evaluate(&model, &ds.vocab, &ds.val, ACCURACY_TOL)?.render());
    Ok(())
}
