//! Scores a checkpoint on the validation split: per-hormone MSE, MAE,
//! accuracy within 0.15, differentiation range and nearest-tone accuracy.
//!
//!     cargo run --release --example evaluate -- <ckpt> <data_dir>

use std::path::PathBuf;

use endocrine::eval::{evaluate, per_tone_means, predict, ACCURACY_TOL};
use endocrine::model::load_checkpoint;
use endocrine::pipeline::Dataset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let ckpt = PathBuf::from(args.next().unwrap_or_else(|| "target/desk/run/best.ckpt".into()));
    let data = PathBuf::from(args.next().unwrap_or_else(|| "target/desk/data".into()));

    let (model, vocab) = load_checkpoint(&ckpt)?;
    let ds = Dataset::read(&data)?;
    let report = evaluate(&model, &vocab, &ds.val, ACCURACY_TOL)?;
    print!("{}", report.render());

    // Mean prediction per tone, the basis of the differentiation range.
    let (preds, _) = predict(&model, &vocab, &ds.val)?;
    let tones: Vec<_> = ds.val.iter().map(|p| p.tone).collect();
    let k = model.hormone.hormones().len();
    println!("\nper-tone mean predictions");
    for (tone, means) in endocrine::data::Tone::ALL.iter().zip(per_tone_means(&preds, &tones, k)) {
        if let Some(m) = means {
            let cells: Vec<String> = m.iter().map(|v| format!("{v:.3}")).collect();
            println!("{:<9} {}", tone.name(), cells.join("  "));
        }
    }
    Ok(())
}
