//! Flat `key = value` run configuration: overrides on top of the defaults,
//! then the fully resolved listing.
//!
//!     cargo run --example config

use endocrine::config::{RunConfig, KEYS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::desk();
    cfg.apply_str(
        "# smaller, faster variant\n\
         hidden_dimension = 32\n\
         epochs = 10\n\
         fixed_alpha = 0.3\n\
         three_hormone_mode = true\n",
    )?;
    cfg.validate()?;
    for (key, doc) in KEYS {
        println!("{key:<28} = {:<12} # {doc}", cfg.get(key).unwrap_or_default());
    }
    if let Err(e) = RunConfig::desk().apply_str("hidden_dim = 32") {
        println!("\nrejected: {e}");
    }
    Ok(())
}
