//! Greedy response generation plus the predicted hormone profile.
//!
//!     cargo run --release --example infer -- <ckpt> "You're so helpful, thank you!"

use endocrine::infer::infer;
use endocrine::model::load_checkpoint;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let ckpt = args.next().unwrap_or_else(|| "target/desk/run/best.ckpt".into());
    let text = args.next().unwrap_or_else(|| "You're so helpful, thank you!".into());

    let (model, vocab) = load_checkpoint(ckpt.as_ref())?;
    let r = infer(&model, &vocab, &text, model.config.max_len)?;
    println!("input:    {text}");
    println!("response: {}", r.response);
    for (h, v) in &r.hormones {
        println!("  {:<11} {v:.3} {}", h.name(), "#".repeat((v * 40.0).round() as usize));
    }
    println!("nearest tone: {}", r.nearest_tone.name());
    Ok(())
}
