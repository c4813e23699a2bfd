//! The decoder input depends on the noise only, never on which codeword was
//! sent. Transmits random codewords with one fixed noise draw and compares
//! preprocessed inputs and decoded error patterns with the all-zero case.
//!
//! ```text
//! cargo run --release --example codeword_invariance
//! ```

use ecct::channel::{bpsk_modulate, ebno_to_sigma, fill_gaussian, stream};
use ecct::code::construct::polar;
use ecct::invariant::preprocess;
use ecct::model::{init_params, Ecct, ModelConfig};
use rand::Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let code = polar(64, 32)?;
    let config = ModelConfig::new(&code, 2, 32);
    let params = init_params::<f64, _>(&config, &mut stream(5, 0));
    let model = Ecct::new(config, code.clone(), params)?;
    let sigma = ebno_to_sigma(4.0, code.rate())?;
    let mut rng = stream(5, 1);

    let mut z = vec![0.0; code.n()];
    fill_gaussian(&mut rng, &mut z);
    let z: Vec<f64> = z.iter().map(|v| v * sigma).collect();
    let y0: Vec<f64> = z.iter().map(|v| 1.0 + v).collect();
    let base_input = preprocess(code.parity_check(), &y0)?;
    let base_errors = model.decode_word(&y0)?;

    for trial in 0..5 {
        let msg: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2)).collect();
        let x = code.encode(&msg)?;
        // the same noise seen relative to the transmitted symbols
        let y: Vec<f64> = bpsk_modulate(&x).iter().zip(&z).map(|(s, v)| s * (1.0 + v)).collect();
        let input = preprocess(code.parity_check(), &y)?;
        let decoded = model.decode_word(&y)?;
        let errors: Vec<u8> = decoded.iter().zip(&x).map(|(a, b)| a ^ b).collect();
        println!(
            "codeword {trial}: weight {:>2}  input identical: {}  error pattern identical: {}",
            x.iter().filter(|&&b| b == 1).count(),
            input == base_input,
            errors == base_errors
        );
    }
    Ok(())
}
