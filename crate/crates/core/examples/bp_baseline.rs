//! Belief propagation on Polar(64,32) at 4, 5 and 6 dB with 5 and 50
//! iterations.
//!
//! ```text
//! cargo run --release --example bp_baseline [-- FRAMES]
//! ```

use ecct::code::construct::polar;
use ecct::eval::{emit_report, run_ber, BpDecoder, EvalConfig, ReportFormat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let frames: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(20_000);
    let code = polar(64, 32)?;
    for iters in [5, 50] {
        let mut cfg = EvalConfig::new(vec![4.0, 5.0, 6.0], 1);
        cfg.min_frames = frames;
        cfg.min_error_frames = 100;
        cfg.max_frames = 10 * frames;
        let report = run_ber(&BpDecoder::new(code.clone(), iters), &cfg)?;
        print!("{}", emit_report(&report, ReportFormat::Table)?);
        println!();
    }
    Ok(())
}
