//! Exhaustive ML decoding against BP and hard decisions on Hamming(7,4).
//!
//! ```text
//! cargo run --release --example ml_vs_bp
//! ```

use ecct::code::construct::hamming_7_4;
use ecct::eval::{hard_decision_ber, run_ber, BpDecoder, Decoder, EvalConfig, HardDecision, MlDecoder};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let code = hamming_7_4();
    let decoders: Vec<Box<dyn Decoder>> = vec![
        Box::new(HardDecision { code: code.clone() }),
        Box::new(BpDecoder::new(code.clone(), 50)),
        Box::new(MlDecoder::new(code.clone())?),
    ];
    let snrs = vec![2.0, 4.0, 6.0];
    let mut cfg = EvalConfig::new(snrs.clone(), 3);
    cfg.min_frames = 50_000;
    cfg.min_error_frames = 200;
    print!("{:<14}", "Eb/N0");
    for s in &snrs {
        print!("{:>12}", format!("{s} dB"));
    }
    println!();
    print!("{:<14}", "Q(.)");
    for &s in &snrs {
        print!("{:>12.3e}", hard_decision_ber(s, code.rate()));
    }
    println!();
    for d in &decoders {
        let report = run_ber(d.as_ref(), &cfg)?;
        print!("{:<14}", report.decoder);
        for p in &report.points {
            print!("{:>12.3e}", p.ber);
        }
        println!();
    }
    Ok(())
}
