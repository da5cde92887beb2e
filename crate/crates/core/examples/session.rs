//! Multi-turn session: each turn's hormone prediction is folded into a
//! smoothed state `lambda * prev + (1 - lambda) * current`, starting from the
//! Neutral profile. The state is observational; it does not steer generation.
//!
//!     cargo run --release --example session -- <ckpt> [lambda]

use endocrine::data::Hormone;
use endocrine::infer::{run_session, DEFAULT_LAMBDA};
use endocrine::model::load_checkpoint;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let ckpt = args.next().unwrap_or_else(|| "target/desk/run/best.ckpt".into());
    let lambda = args.next().map(|s| s.parse()).transpose()?.unwrap_or(DEFAULT_LAMBDA);

    let (model, vocab) = load_checkpoint(ckpt.as_ref())?;
    let turns: Vec<String> = [
        "Hi, how are you doing today?",
        "This is useless, you never get anything right.",
        "Seriously, what a waste of time.",
        "Sorry, I'm just having a really hard week.",
        "Thanks for listening, that helps a lot!",
    ]
    .map(String::from)
    .to_vec();

    let names: Vec<&str> = Hormone::ALL.iter().map(|h| &h.name()[..4]).collect();
    println!("turn  tone      {}   (smoothed, lambda = {lambda})", names.join("  "));
    for (i, (r, state)) in run_session(&model, &vocab, &turns, lambda, model.config.max_len)?.iter().enumerate() {
        let cells: Vec<String> = state.current.0.iter().map(|v| format!("{v:.2}")).collect();
        println!("{:>4}  {:<9} {}   {}", i + 1, r.nearest_tone.name(), cells.join("  "), turns[i]);
    }
    Ok(())
}
