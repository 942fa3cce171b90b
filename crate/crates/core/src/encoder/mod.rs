//! Transformer encoder over packed inputs, its output heads, and binary
//! checkpoints.

mod checkpoint;
mod config;
mod model;

pub use checkpoint::Checkpoint;
pub use config::{EncoderConfig, Pooling};
pub use model::{Encoder, EncoderOutput};
