//! Streaming causal audio tokenizer runtime.
//!
//! The pipeline: 24 kHz waveforms are compressed by a hierarchical patchify
//! encoder into 12.5 Hz latent frames, quantized by a factorized residual
//! vector quantizer into token matrices, packed into a variable-bitrate
//! bitstream, and mirrored back out through the decoder. A temporal+depth
//! autoregressive scheduler generates token streams at a selectable depth.

pub mod bitstream;
pub mod codec;
pub mod error;
pub mod lm;
pub mod losses;
pub mod model;
pub mod nnf;
pub mod rvq;
pub mod selfcheck;
pub mod signal;

pub use error::{Error, Result};
