//! Learning-rate curve of cosine annealing with warm restarts
//! (T0 = 10, T_mult = 2) over 70 epochs.
//!
//!     cargo run --example schedule

use endocrine::train::cosine_warm_restart_lr;

fn main() {
    for epoch in 0..70 {
        let lr = cosine_warm_restart_lr(epoch, 10, 2, 1e-4, 0.0);
        println!("{epoch:>3} {lr:.3e} {}", "*".repeat((lr * 5e5).round() as usize));
    }
}
