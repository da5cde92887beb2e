//! The hormone block in isolation: orthogonal queries, temperature-sharpened
//! attention, sigmoid outputs and the clamped multiplicative modulation.
//!
//!     cargo run --example hormone_block

use endocrine::data::{Hormone, N_HORMONES};
use endocrine::model::HormoneBlock;
use endocrine::tensor::{gaussian, Rng};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (b, l, d, heads) = (2, 5, 64, 4);
    let mut rng = Rng::stream(42, "init");
    let block = HormoneBlock::new(&Hormone::ALL, d, heads, 0.5, false, &mut rng)?;

    let q = block.flat_queries()?;
    let mut worst: f64 = 0.0;
    for i in 0..q.len() {
        for j in i + 1..q.len() {
            worst = worst.max(q[i].cosine_similarity(&q[j])?.item().abs());
        }
    }
    println!("max |cos| between hormone queries: {worst:.1e}");

    let h = gaussian(b * l, d, 1.0, &mut rng).reshape(&[b, l, d])?;
    let mask = [1, 1, 1, 1, 1, 1, 1, 1, 0, 0];
    let out = block.compute_hormones(&h, &mask)?;
    for (k, hormone) in block.hormones().iter().enumerate() {
        let row: Vec<String> = out.attn_maps[k][..l].iter().map(|w| format!("{w:.2}")).collect();
        println!("{:<11} h_hat {:.3} {:.3}  head 0 attention (row 0): {}", hormone.name(), out.h_hat.to_vec()[k], out.h_hat.to_vec()[N_HORMONES + k], row.join(" "));
    }

    let e = block.hormones_to_embedding(&out.h_hat)?;
    let modulated = block.modulate(&h, &e)?;
    let ratio: Vec<f64> = modulated.to_vec().iter().zip(h.to_vec()).take(4).map(|(m, x)| m / x).collect();
    println!("alpha_eff {:.2}; first gate factors {ratio:.3?}", block.alpha_eff().item());
    block.alpha.data_mut()[0] = 0.9;
    println!("raw alpha 0.9 -> effective {:.2}", block.alpha_eff().item());
    Ok(())
}
