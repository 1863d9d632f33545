use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub max_seq_len: usize,
    pub norm_eps: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            vocab_size: 259,
            d_model: 64,
            n_layers: 4,
            n_heads: 4,
            d_ff: 256,
            max_seq_len: 512,
            norm_eps: 1e-5,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// A config with `d_ff = 4·d_model` and the remaining defaults.
    pub fn with_dims(vocab_size: usize, d_model: usize, n_layers: usize, n_heads: usize) -> Self {
        ModelConfig { vocab_size, d_model, n_layers, n_heads, d_ff: 4 * d_model, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("d_model", self.d_model),
            ("n_layers", self.n_layers),
            ("n_heads", self.n_heads),
            ("d_ff", self.d_ff),
            ("max_seq_len", self.max_seq_len),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(config(alloc::format!("{name} must be at least 1")));
            }
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(config(alloc::format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model,
                self.n_heads
            )));
        }
        if !(self.norm_eps.is_finite() && self.norm_eps > 0.0) {
            return Err(config("norm_eps must be positive"));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn probe_layer(&self) -> usize {
        default_probe_layer(self.n_layers)
    }
}

/// `⌊0.95 · n_layers⌋`, in integer arithmetic.
pub fn default_probe_layer(n_layers: usize) -> usize {
    n_layers * 95 / 100
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probe_layer_rule() {
        assert_eq!(default_probe_layer(80), 76);
        assert_eq!(default_probe_layer(2), 1);
        assert_eq!(default_probe_layer(32), 30);
        assert_eq!(default_probe_layer(1), 0);
    }

    #[test]
    fn head_divisibility_is_checked() {
        let c = ModelConfig { d_model: 63, ..Default::default() };
        assert!(c.validate().is_err());
        assert!(ModelConfig::default().validate().is_ok());
    }
}
