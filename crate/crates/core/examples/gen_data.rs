//! Builds the tone-annotated dialogue dataset and writes it to a directory.
//!
//!     cargo run --example gen_data -- [out_dir] [seed] [expansion_factor]

use std::path::PathBuf;

use endocrine::data::Tone;
use endocrine::pipeline::{tone_counts, Dataset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "target/desk/data".into()));
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(42);
    let factor = args.next().map(|s| s.parse()).transpose()?.unwrap_or(10);

    let ds = Dataset::generate(seed, factor, 0.8)?;
    ds.write(&out)?;
    println!("{} train, {} val, {} vocabulary entries -> {}", ds.train.len(), ds.val.len(), ds.vocab.len(), out.display());
    for (tone, n) in tone_counts(&ds.train) {
        let v = tone.hormones();
        println!("{:<9} {n:>4} train pairs, target {:?}", tone.name(), v.0);
    }
    for tone in Tone::ALL {
        if let Some(p) = ds.train.iter().find(|p| p.tone == tone) {
            println!("\n[{}] {}\n  -> {}", tone.name(), p.input, p.output);
        }
    }
    Ok(())
}
