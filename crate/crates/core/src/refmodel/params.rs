use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use crate::error::Result;
use crate::seed;
use crate::tensor::Mat;

const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub attn_norm: Vec<f64>,
    pub wq: Mat,
    pub wk: Mat,
    pub wv: Mat,
    pub wo: Mat,
    pub mlp_norm: Vec<f64>,
    /// `d_ff × d_model`
    pub w_up: Mat,
    /// `d_model × d_ff`
    pub w_down: Mat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub tok_emb: Mat,
    pub pos_emb: Mat,
    pub layers: Vec<LayerParams>,
    pub final_norm: Vec<f64>,
    /// `vocab × d_model`, not tied to `tok_emb`.
    pub unembed: Mat,
}

impl ModelParams {
    /// Every tensor in a fixed order (used by checkpoints).
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.tok_emb.data, &self.pos_emb.data];
        for l in &self.layers {
            out.extend([
                l.attn_norm.as_slice(),
                &l.wq.data,
                &l.wk.data,
                &l.wv.data,
                &l.wo.data,
                &l.mlp_norm,
                &l.w_up.data,
                &l.w_down.data,
            ]);
        }
        out.push(&self.final_norm);
        out.push(&self.unembed.data);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out: Vec<&mut Vec<f64>> = vec![&mut self.tok_emb.data, &mut self.pos_emb.data];
        for l in &mut self.layers {
            out.push(&mut l.attn_norm);
            out.push(&mut l.wq.data);
            out.push(&mut l.wk.data);
            out.push(&mut l.wv.data);
            out.push(&mut l.wo.data);
            out.push(&mut l.mlp_norm);
            out.push(&mut l.w_up.data);
            out.push(&mut l.w_down.data);
        }
        out.push(&mut self.final_norm);
        out.push(&mut self.unembed.data);
        out
    }

    /// All-zero parameters with the shapes implied by `config`.
    pub fn zeros(config: &ModelConfig) -> Self {
        let (d, f, v) = (config.d_model, config.d_ff, config.vocab_size);
        ModelParams {
            tok_emb: Mat::zeros(v, d),
            pos_emb: Mat::zeros(config.max_seq_len, d),
            layers: (0..config.n_layers)
                .map(|_| LayerParams {
                    attn_norm: vec![0.0; d],
                    wq: Mat::zeros(d, d),
                    wk: Mat::zeros(d, d),
                    wv: Mat::zeros(d, d),
                    wo: Mat::zeros(d, d),
                    mlp_norm: vec![0.0; d],
                    w_up: Mat::zeros(f, d),
                    w_down: Mat::zeros(d, f),
                })
                .collect(),
            final_norm: vec![0.0; d],
            unembed: Mat::zeros(v, d),
            config: config.clone(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Gaussian(0, 0.02) matrices and unit norm gains from `config.seed`.
pub fn init_model(config: &ModelConfig) -> Result<ModelParams> {
    config.validate()?;
    let mut rng = seed::named_rng(config.seed, seed::stream::INIT);
    let (d, f, v) = (config.d_model, config.d_ff, config.vocab_size);
    let tok_emb = Mat::gaussian(v, d, INIT_STD, &mut rng);
    let pos_emb = Mat::gaussian(config.max_seq_len, d, INIT_STD, &mut rng);
    let layers = (0..config.n_layers)
        .map(|_| LayerParams {
            attn_norm: vec![1.0; d],
            wq: Mat::gaussian(d, d, INIT_STD, &mut rng),
            wk: Mat::gaussian(d, d, INIT_STD, &mut rng),
            wv: Mat::gaussian(d, d, INIT_STD, &mut rng),
            wo: Mat::gaussian(d, d, INIT_STD, &mut rng),
            mlp_norm: vec![1.0; d],
            w_up: Mat::gaussian(f, d, INIT_STD, &mut rng),
            w_down: Mat::gaussian(d, f, INIT_STD, &mut rng),
        })
        .collect();
    let unembed = Mat::gaussian(v, d, INIT_STD, &mut rng);
    Ok(ModelParams { config: config.clone(), tok_emb, pos_emb, layers, final_norm: vec![1.0; d], unembed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_bits() {
        let c = ModelConfig { d_model: 16, n_layers: 2, n_heads: 2, d_ff: 32, vocab_size: 32, ..Default::default() };
        let a = init_model(&c).unwrap();
        let b = init_model(&c).unwrap();
        for (x, y) in a.tensors().iter().zip(b.tensors()) {
            assert!(x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
        let other = init_model(&ModelConfig { seed: 1, ..c }).unwrap();
        assert_ne!(a.tok_emb, other.tok_emb);
    }

    #[test]
    fn bad_config_is_rejected() {
        let c = ModelConfig { d_model: 63, n_heads: 4, ..Default::default() };
        assert!(init_model(&c).is_err());
    }
}
