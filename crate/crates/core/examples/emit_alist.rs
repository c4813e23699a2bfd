//! Writes every built-in code as an alist file, by default into `codes/`.
//!
//! ```text
//! cargo run --example emit_alist -- [DIR]
//! ```

use std::path::PathBuf;

use ecct::code::construct::{builtin, BUILTIN_CODES};
use ecct::code::{emit_alist, parse_alist};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "codes".into()));
    std::fs::create_dir_all(&dir)?;
    for name in BUILTIN_CODES {
        let code = builtin(name)?;
        let text = emit_alist(code.parity_check());
        // the file must parse back to the same matrix
        assert_eq!(&parse_alist(&text)?, code.parity_check());
        let path = dir.join(format!("{name}.alist"));
        std::fs::write(&path, text)?;
        println!(
            "{:<20} n={:<4} k={:<4} ones={:<5} -> {}",
            name,
            code.n(),
            code.k(),
            code.parity_check().weight(),
            path.display()
        );
    }
    Ok(())
}
