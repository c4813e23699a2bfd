//! Attention-mask sparsity for each benchmark code.
//!
//! ```text
//! cargo run --release --example mask_stats [-- CODE]
//! ```
//! With a code name the mask itself is also printed.

use ecct::code::construct::{builtin, BUILTIN_CODES};
use ecct::mask::{build_mask, mask_stats};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    if let Some(name) = std::env::args().nth(1) {
        let code = builtin(&name)?;
        let mask = build_mask(code.parity_check());
        println!("{}", mask.grid());
        println!(
            "{}",
            serde_json::to_string_pretty(&mask_stats(&mask, code.parity_check()))?
        );
        return Ok(());
    }
    println!(
        "{:<16} {:>5} {:>8} {:>9} {:>9}",
        "code", "size", "allowed", "sparsity", "compute"
    );
    for name in BUILTIN_CODES {
        let code = builtin(name)?;
        let s = mask_stats(&build_mask(code.parity_check()), code.parity_check());
        println!(
            "{:<16} {:>5} {:>8} {:>8.1}% {:>8.1}%",
            name,
            s.size,
            s.allowed,
            100.0 * s.sparsity_ratio,
            100.0 * s.pairwise_compute_ratio
        );
    }
    Ok(())
}
