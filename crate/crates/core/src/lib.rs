//! Transformer decoding of binary linear block codes.
//!
//! The crate bundles everything needed to train and evaluate a
//! code-aware transformer decoder at desk scale:
//!
//! * [`code`]: parity-check matrices, generators, encoding, syndromes, the
//!   alist format and an exhaustive ML oracle.
//! * [`channel`]: BPSK over AWGN parameterized by Eb/N0.
//! * [`invariant`]: the codeword-invariant input/output transforms.
//! * [`mask`]: the attention mask derived from the parity-check matrix.
//! * [`diffnum`]: a small reverse-mode engine with Adam and cosine decay.
//! * [`model`]: the decoder itself, its training loop and checkpoints.
//! * [`bp`]: sum-product belief propagation baseline.
//! * [`eval`]: Monte Carlo BER/FER measurement and report formats.
//! * [`cli`]: the `ecct` command line.

pub mod bp;
pub mod channel;
pub mod cli;
pub mod code;
pub mod diffnum;
pub mod eval;
pub mod invariant;
pub mod mask;
pub mod model;
