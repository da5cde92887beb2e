//! Which input tokens each hormone head attends to.
//!
//!     cargo run --release --example inspect_attention -- <ckpt> "I love this, amazing work!"

use endocrine::infer::inspect_attention;
use endocrine::model::load_checkpoint;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let ckpt = args.next().unwrap_or_else(|| "target/desk/run/best.ckpt".into());
    let text = args.next().unwrap_or_else(|| "I love this, amazing work!".into());

    let (model, vocab) = load_checkpoint(ckpt.as_ref())?;
    let rows = inspect_attention(&model, &vocab, &text)?;
    let mut groups: Vec<_> = rows.chunk_by(|a, b| a.hormone == b.hormone && a.head == b.head).collect();
    groups.sort_by_key(|g| (g[0].hormone.index(), g[0].head));
    for g in groups {
        let mut top: Vec<_> = g.iter().collect();
        top.sort_by(|a, b| b.weight.total_cmp(&a.weight));
        let cells: Vec<String> = top.iter().take(3).map(|r| format!("{}={:.2}", r.token, r.weight)).collect();
        println!("{:<11} head {}  {}", g[0].hormone.name(), g[0].head, cells.join("  "));
    }
    Ok(())
}
