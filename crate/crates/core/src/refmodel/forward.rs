use alloc::vec;
use alloc::vec::Vec;

use super::lora::{AdapterSet, AttnMatrix, LoraAdapter};
use super::params::ModelParams;
use crate::error::{invalid, Result};
use crate::math;
use crate::tensor::{matmul_nt, Mat};

/// A token sequence where positions `completion_start..` are the completion.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub tokens: Vec<u32>,
    pub completion_start: usize,
}

impl ModelInput {
    /// `BOS + prompt + completion` with byte tokens.
    pub fn from_text(prompt: &str, completion: &str) -> Self {
        let mut tokens = Vec::with_capacity(1 + prompt.len() + completion.len());
        tokens.push(crate::corpus::BOS);
        tokens.extend(prompt.bytes().map(u32::from));
        let completion_start = tokens.len();
        tokens.extend(completion.bytes().map(u32::from));
        ModelInput { tokens, completion_start }
    }

    pub fn completion_len(&self) -> usize {
        self.tokens.len() - self.completion_start
    }
}

/// Cached intermediates of one block.
#[derive(Debug, Clone)]
pub(crate) struct BlockCache {
    pub x_in: Mat,
    pub n1: Mat,
    pub rms1: Vec<f64>,
    pub q: Mat,
    pub k: Mat,
    pub v: Mat,
    /// `x · Aᵀ` for each adapted projection, indexed like `AttnMatrix::ALL`.
    pub lora_u: [Option<Mat>; 4],
    /// Attention probabilities, one `T×T` matrix per head.
    pub probs: Vec<Mat>,
    pub ctx: Mat,
    pub x_mid: Mat,
    pub rms2: Vec<f64>,
    pub up: Mat,
}

/// Result of a forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    /// `n_layers + 1` residual streams, each `T × d_model`.
    pub residuals: Vec<Mat>,
    pub logits: Mat,
    pub(crate) blocks: Vec<BlockCache>,
    /// Final-normed states fed to the unembedding.
    pub final_normed: Mat,
    pub(crate) final_rms: Vec<f64>,
}

pub(crate) fn rmsnorm(x: &Mat, gain: &[f64], eps: f64) -> (Mat, Vec<f64>) {
    let mut y = Mat::zeros(x.rows, x.cols);
    let mut rms = Vec::with_capacity(x.rows);
    for t in 0..x.rows {
        let xr = x.row(t);
        let ms = xr.iter().map(|v| v * v).sum::<f64>() / x.cols as f64;
        let r = math::sqrt(ms + eps);
        for ((o, &xv), &g) in y.row_mut(t).iter_mut().zip(xr).zip(gain) {
            *o = g * xv / r;
        }
        rms.push(r);
    }
    (y, rms)
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_K: f64 = 0.044_715;

#[inline]
pub(crate) fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + math::tanh(GELU_C * (x + GELU_K * x * x * x)))
}

#[inline]
pub(crate) fn gelu_grad(x: f64) -> f64 {
    let th = math::tanh(GELU_C * (x + GELU_K * x * x * x));
    0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * GELU_C * (1.0 + 3.0 * GELU_K * x * x)
}

pub(crate) fn matrix_index(m: AttnMatrix) -> usize {
    match m {
        AttnMatrix::Q => 0,
        AttnMatrix::K => 1,
        AttnMatrix::V => 2,
        AttnMatrix::O => 3,
    }
}

/// `x·Wᵀ + s·(x·Aᵀ)·Bᵀ`. The low-rank term is only added where nonzero, so
/// a zero `B` leaves the base output bit-identical.
fn project(x: &Mat, w: &Mat, adapter: Option<&LoraAdapter>) -> (Mat, Option<Mat>) {
    let mut y = matmul_nt(x, w);
    let Some(ad) = adapter else { return (y, None) };
    let u = matmul_nt(x, &ad.a);
    let mut delta = matmul_nt(&u, &ad.b);
    delta.scale(ad.scale());
    for (yv, dv) in y.data.iter_mut().zip(&delta.data) {
        if *dv != 0.0 {
            *yv += dv;
        }
    }
    (y, Some(u))
}

/// Full forward pass with every intermediate cached for [`super::backward`].
pub fn forward(params: &ModelParams, adapters: Option<&AdapterSet>, tokens: &[u32]) -> Result<Forward> {
    let cfg = &params.config;
    let t_len = tokens.len();
    if t_len == 0 {
        return Err(invalid("empty token sequence"));
    }
    if t_len > cfg.max_seq_len {
        return Err(invalid(alloc::format!(
            "sequence length {t_len} exceeds max_seq_len {}",
            cfg.max_seq_len
        )));
    }
    if let Some(&bad) = tokens.iter().find(|&&t| t as usize >= cfg.vocab_size) {
        return Err(invalid(alloc::format!("unknown token id {bad}")));
    }
    let d = cfg.d_model;
    let mut x = Mat::zeros(t_len, d);
    for (t, &tok) in tokens.iter().enumerate() {
        let e = params.tok_emb.row(tok as usize);
        let p = params.pos_emb.row(t);
        for ((o, a), b) in x.row_mut(t).iter_mut().zip(e).zip(p) {
            *o = a + b;
        }
    }
    let mut residuals = Vec::with_capacity(cfg.n_layers + 1);
    let mut blocks = Vec::with_capacity(cfg.n_layers);
    residuals.push(x.clone());
    for (li, layer) in params.layers.iter().enumerate() {
        let ad = |m| adapters.and_then(|s| s.get(li, m)).map(|(_, a)| a);
        let (n1, rms1) = rmsnorm(&x, &layer.attn_norm, cfg.norm_eps);
        let (q, uq) = project(&n1, &layer.wq, ad(AttnMatrix::Q));
        let (k, uk) = project(&n1, &layer.wk, ad(AttnMatrix::K));
        let (v, uv) = project(&n1, &layer.wv, ad(AttnMatrix::V));
        let (probs, ctx) = attention(&q, &k, &v, cfg.n_heads);
        let (attn, uo) = project(&ctx, &layer.wo, ad(AttnMatrix::O));
        let mut x_mid = x.clone();
        x_mid.add_assign(&attn);
        let (n2, rms2) = rmsnorm(&x_mid, &layer.mlp_norm, cfg.norm_eps);
        let up = matmul_nt(&n2, &layer.w_up);
        let act = Mat { rows: up.rows, cols: up.cols, data: up.data.iter().map(|&v| gelu(v)).collect() };
        let mlp = matmul_nt(&act, &layer.w_down);
        let mut x_out = x_mid.clone();
        x_out.add_assign(&mlp);
        blocks.push(BlockCache {
            x_in: x,
            n1,
            rms1,
            q,
            k,
            v,
            lora_u: [uq, uk, uv, uo],
            probs,
            ctx,
            x_mid,
            rms2,
            up,
        });
        residuals.push(x_out.clone());
        x = x_out;
    }
    let (final_normed, final_rms) = rmsnorm(&x, &params.final_norm, cfg.norm_eps);
    let logits = matmul_nt(&final_normed, &params.unembed);
    Ok(Forward { residuals, logits, blocks, final_normed, final_rms })
}

/// Causal multi-head attention. Returns per-head probabilities and the
/// concatenated context.
fn attention(q: &Mat, k: &Mat, v: &Mat, n_heads: usize) -> (Vec<Mat>, Mat) {
    let (t_len, d) = (q.rows, q.cols);
    let hd = d / n_heads;
    let scale = 1.0 / math::sqrt(hd as f64);
    let mut ctx = Mat::zeros(t_len, d);
    let mut probs = Vec::with_capacity(n_heads);
    let mut scores = vec![0.0; t_len];
    for h in 0..n_heads {
        let off = h * hd;
        let mut p = Mat::zeros(t_len, t_len);
        for i in 0..t_len {
            let qi = &q.row(i)[off..off + hd];
            for j in 0..=i {
                let kj = &k.row(j)[off..off + hd];
                scores[j] = qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale;
            }
            math::softmax(&scores[..=i], &mut p.row_mut(i)[..=i]);
            let ci = &mut ctx.data[i * d + off..i * d + off + hd];
            for j in 0..=i {
                let pij = p.get(i, j);
                let vj = &v.row(j)[off..off + hd];
                for (c, vv) in ci.iter_mut().zip(vj) {
                    *c += pij * vv;
                }
            }
        }
        probs.push(p);
    }
    (probs, ctx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refmodel::{init_model, AdapterSet, LoraConfig, ModelConfig};

    fn small() -> ModelParams {
        init_model(&ModelConfig {
            vocab_size: 32,
            d_model: 16,
            n_layers: 2,
            n_heads: 2,
            d_ff: 32,
            max_seq_len: 16,
            seed: 5,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn bos_forward_is_finite() {
        let p = init_model(&ModelConfig::default()).unwrap();
        let f = forward(&p, None, &[crate::corpus::BOS]).unwrap();
        assert!(f.logits.is_finite());
        assert_eq!(f.residuals.len(), 5);
    }

    #[test]
    fn zero_b_adapters_are_bit_identical() {
        let p = small();
        let ads = AdapterSet::init(&p.config, 2, &LoraConfig::default(), 1).unwrap();
        let toks = [1, 5, 9, 2, 31, 0];
        let a = forward(&p, None, &toks).unwrap();
        let b = forward(&p, Some(&ads), &toks).unwrap();
        assert!(a.logits.data.iter().zip(&b.logits.data).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn causal_masking() {
        let p = small();
        let a = forward(&p, None, &[1, 2, 3, 4, 5]).unwrap();
        let b = forward(&p, None, &[1, 2, 3, 9, 5]).unwrap();
        for i in 0..3 {
            assert_eq!(a.logits.row(i), b.logits.row(i));
            assert_eq!(a.residuals[2].row(i), b.residuals[2].row(i));
        }
        assert_ne!(a.logits.row(3), b.logits.row(3));
    }

    #[test]
    fn softmax_rows_normalize() {
        let p = small();
        let f = forward(&p, None, &[3, 1, 4, 1, 5, 9, 2, 6]).unwrap();
        let mut probs = vec![0.0; 32];
        for t in 0..f.logits.rows {
            math::softmax(f.logits.row(t), &mut probs);
            assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn input_errors() {
        let p = small();
        assert!(forward(&p, None, &[40]).is_err());
        assert!(forward(&p, None, &[1; 17]).is_err());
        assert!(forward(&p, None, &[]).is_err());
    }
}
