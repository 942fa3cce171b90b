use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Final hidden state at position 0.
    #[default]
    Cls,
    /// Mean over non-PAD positions.
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub layers: usize,
    pub hidden_size: usize,
    pub heads: usize,
    pub ffn_size: usize,
    pub max_positions: usize,
    pub vocab_size: usize,
    pub dropout_rate: f64,
    pub projection_dim: usize,
    pub pooling: Pooling,
    pub layer_norm_eps: f64,
    pub init_std: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            layers: 2,
            hidden_size: 64,
            heads: 4,
            ffn_size: 256,
            max_positions: 160,
            vocab_size: 1000,
            dropout_rate: 0.1,
            projection_dim: 128,
            pooling: Pooling::Cls,
            layer_norm_eps: 1e-12,
            init_std: 0.02,
        }
    }
}

impl EncoderConfig {
    /// 12 layers, 768 hidden, 12 heads.
    pub fn full_scale(vocab_size: usize) -> Self {
        EncoderConfig {
            layers: 12,
            hidden_size: 768,
            heads: 12,
            ffn_size: 3072,
            max_positions: 516,
            vocab_size,
            ..Self::default()
        }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_size / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("encoder.layers", self.layers),
            ("encoder.hidden_size", self.hidden_size),
            ("encoder.heads", self.heads),
            ("encoder.ffn_size", self.ffn_size),
            ("encoder.max_positions", self.max_positions),
            ("encoder.projection_dim", self.projection_dim),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::config(name, "must be positive"));
            }
        }
        if !self.hidden_size.is_multiple_of(self.heads) {
            return Err(Error::config(
                "encoder.heads",
                format!("hidden_size {} is not divisible by {} heads", self.hidden_size, self.heads),
            ));
        }
        if self.vocab_size <= crate::tokenizer::SPECIAL_TOKENS.len() {
            return Err(Error::config("encoder.vocab_size", "must exceed the special tokens"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config("encoder.dropout_rate", "must be in [0, 1)"));
        }
        if !(self.layer_norm_eps > 0.0) {
            return Err(Error::config("encoder.layer_norm_eps", "must be positive"));
        }
        if !(self.init_std > 0.0) {
            return Err(Error::config("encoder.init_std", "must be positive"));
        }
        Ok(())
    }
}
