use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use crate::error::{config, Result};
use crate::seed;
use crate::tensor::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AttnMatrix {
    Q,
    K,
    V,
    O,
}

impl AttnMatrix {
    pub const ALL: [AttnMatrix; 4] = [AttnMatrix::Q, AttnMatrix::K, AttnMatrix::V, AttnMatrix::O];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoraTarget {
    pub layer: usize,
    pub matrix: AttnMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoraConfig {
    pub rank: usize,
    pub alpha: f64,
    pub matrices: Vec<AttnMatrix>,
}

impl Default for LoraConfig {
    fn default() -> Self {
        LoraConfig { rank: 8, alpha: 16.0, matrices: AttnMatrix::ALL.to_vec() }
    }
}

/// Low-rank delta `(alpha / rank) · B · A` on one attention projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraAdapter {
    pub target: LoraTarget,
    pub rank: usize,
    pub alpha: f64,
    /// `rank × in`
    pub a: Mat,
    /// `out × rank`
    pub b: Mat,
}

impl LoraAdapter {
    pub fn scale(&self) -> f64 {
        self.alpha / self.rank as f64
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AdapterSet {
    pub adapters: Vec<LoraAdapter>,
}

impl AdapterSet {
    /// Adapters on every selected projection of blocks `0..probe_layer`.
    /// `A` is Gaussian with std `1/sqrt(in)`, `B` is zero.
    pub fn init(model: &ModelConfig, probe_layer: usize, cfg: &LoraConfig, seed: u64) -> Result<Self> {
        if cfg.rank == 0 {
            return Err(config("LoRA rank must be at least 1"));
        }
        if !(cfg.alpha.is_finite() && cfg.alpha > 0.0) {
            return Err(config("LoRA alpha must be positive"));
        }
        if probe_layer > model.n_layers {
            return Err(config(alloc::format!(
                "probe layer {probe_layer} exceeds model depth {}",
                model.n_layers
            )));
        }
        let d = model.d_model;
        let mut rng = seed::named_rng(seed, "lora");
        let mut adapters = Vec::new();
        for layer in 0..probe_layer {
            for &matrix in AttnMatrix::ALL.iter().filter(|m| cfg.matrices.contains(m)) {
                adapters.push(LoraAdapter {
                    target: LoraTarget { layer, matrix },
                    rank: cfg.rank,
                    alpha: cfg.alpha,
                    a: Mat::gaussian(cfg.rank, d, 1.0 / crate::math::sqrt(d as f64), &mut rng),
                    b: Mat::zeros(d, cfg.rank),
                });
            }
        }
        Ok(AdapterSet { adapters })
    }

    pub fn get(&self, layer: usize, matrix: AttnMatrix) -> Option<(usize, &LoraAdapter)> {
        self.adapters
            .iter()
            .enumerate()
            .find(|(_, a)| a.target.layer == layer && a.target.matrix == matrix)
    }

    pub fn min_layer(&self) -> Option<usize> {
        self.adapters.iter().map(|a| a.target.layer).min()
    }

    pub fn is_empty(&self) -> bool {
        self.adapters.is_empty()
    }

    pub fn n_params(&self) -> usize {
        self.adapters.iter().map(|a| a.a.len() + a.b.len()).sum()
    }

    pub fn validate(&self, model: &ModelConfig) -> Result<()> {
        let d = model.d_model;
        for ad in &self.adapters {
            if ad.target.layer >= model.n_layers
                || ad.a.rows != ad.rank
                || ad.a.cols != d
                || ad.b.rows != d
                || ad.b.cols != ad.rank
            {
                return Err(config("adapter shape does not match the model"));
            }
        }
        Ok(())
    }
}
