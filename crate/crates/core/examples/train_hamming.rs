//! Trains a two-layer decoder on Hamming(7,4) and compares it with hard
//! decisions, BP and ML. The full schedule (100 x 200 minibatches) takes
//! several minutes on one core; pass a smaller epoch count to try it out.
//!
//! ```text
//! cargo run --release --example train_hamming -- [EPOCHS] [CHECKPOINT]
//! ```

use ecct::code::construct::hamming_7_4;
use ecct::eval::{run_ber, BpDecoder, Decoder, EcctDecoder, EvalConfig, HardDecision, MlDecoder};
use ecct::model::{smoothed, ModelConfig, TrainSchedule, Trainer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let epochs: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(100);
    let ckpt_path = args.next();

    let code = hamming_7_4();
    let config = ModelConfig::new(&code, 2, 32);
    let mut trainer = Trainer::new(config, code.clone(), TrainSchedule::new(epochs, 200), 0)?;
    let total = trainer.schedule().total_steps();
    trainer.run(|step, loss| {
        if step % 1000 == 0 || step == total {
            eprintln!("step {step:>6}/{total}  loss {loss:.4}");
        }
    })?;
    let smooth = smoothed(trainer.loss_history(), 100);
    if let (Some(first), Some(last)) = (smooth.first(), smooth.last()) {
        println!("smoothed loss {first:.4} -> {last:.4}");
    }
    let ckpt = trainer.checkpoint();
    if let Some(path) = ckpt_path {
        ckpt.save(&path)?;
        println!("checkpoint written to {path}");
    }

    let decoders: Vec<Box<dyn Decoder>> = vec![
        Box::new(HardDecision { code: code.clone() }),
        Box::new(BpDecoder::new(code.clone(), 5)),
        Box::new(EcctDecoder::new(ckpt.model()?)),
        Box::new(MlDecoder::new(code)?),
    ];
    let mut cfg = EvalConfig::new(vec![4.0, 5.0, 6.0], 99);
    cfg.min_frames = 20_000;
    cfg.min_error_frames = 200;
    println!(
        "{:<14} {:>8} {:>8} {:>8}   (-ln BER)",
        "decoder", "4 dB", "5 dB", "6 dB"
    );
    for d in &decoders {
        let report = run_ber(d.as_ref(), &cfg)?;
        print!("{:<14}", report.decoder);
        for p in &report.points {
            print!(" {:>8.3}", p.neg_ln_ber);
        }
        println!();
    }
    Ok(())
}
