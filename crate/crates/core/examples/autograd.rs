//! Reverse-mode gradients on a tiny two-layer network, checked against
//! central finite differences.
//!
//!     cargo run --example autograd

use endocrine::tensor::{finite_difference_check, gaussian, Rng, Tensor};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = Rng::stream(0, "init");
    let x = gaussian(4, 3, 1.0, &mut rng);
    let w1 = gaussian(3, 5, 0.5, &mut rng);
    let w2 = gaussian(5, 1, 0.5, &mut rng);
    w1.set_requires_grad(true);
    w2.set_requires_grad(true);

    let forward = |_: &Tensor| {
        let y = x.matmul(&w1)?.gelu().matmul(&w2)?.sigmoid();
        Ok(y.mul(&y)?.mean())
    };
    let loss = forward(&w1)?;
    loss.backward()?;
    println!("loss {:.6}", loss.item());
    println!("dL/dw2 = {:?}", w2.grad().unwrap_or_default());

    for (name, p) in [("w1", &w1), ("w2", &w2)] {
        let r = finite_difference_check(forward, p, 1e-5, 1e-6)?;
        println!("{name}: {} coordinates, max relative error {:.2e}, passed {}", r.coordinates, r.max_rel_error, r.passed);
    }
    Ok(())
}
