//! Prints one head's attention map for a received word with a single
//! flipped bit. Denied pairs show as '.', allowed ones as the weight in
//! tenths.
//!
//! ```text
//! cargo run --release --example attention_map -- [CHECKPOINT] [LAYER] [HEAD]
//! ```
//! Without a checkpoint a freshly initialized model is used.

use ecct::channel::stream;
use ecct::code::construct::hamming_7_4;
use ecct::eval::dump_attention;
use ecct::model::{init_params, Checkpoint, Ecct, ModelConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let model: Ecct<f32> = match args.next() {
        Some(path) => Checkpoint::load(path)?.model()?,
        None => {
            let code = hamming_7_4();
            let config = ModelConfig::new(&code, 2, 32);
            let params = init_params(&config, &mut stream(0, 0));
            Ecct::new(config, code, params)?
        }
    };
    let layer: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let head: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);

    let n = model.code().n();
    let mut y = vec![1.0; n];
    y[0] = -1.0;
    let map = dump_attention(&model, &y, layer, head, 0)?;
    println!("layer {layer}, head {head}; rows are queries, columns keys");
    println!("bits 0..{n}, then checks");
    for (i, row) in map.weights.iter().enumerate() {
        let cells: String = row
            .iter()
            .enumerate()
            .map(|(j, &w)| {
                if !model.mask().allowed(i, j) {
                    " .".to_string()
                } else {
                    format!(" {}", ((w * 10.0).round() as i64).min(9))
                }
            })
            .collect();
        println!("{i:>3} |{cells}");
    }
    println!(
        "attention paid to bit 0: {:?}",
        map.column_values
            .iter()
            .map(|v| (v * 1000.0).round() / 1000.0)
            .collect::<Vec<_>>()
    );
    Ok(())
}
