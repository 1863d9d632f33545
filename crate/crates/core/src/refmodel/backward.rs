use alloc::vec;
use alloc::vec::Vec;

use super::forward::{gelu_grad, matrix_index, BlockCache, Forward};
use super::lora::{AdapterSet, AttnMatrix};
use super::params::{LayerParams, ModelParams};
use crate::error::{invalid, Result};
use crate::tensor::{accumulate_tn, matmul_nn, Mat};

/// Loss gradients flowing into the network.
#[derive(Debug, Clone, Copy, Default)]
pub struct Upstream<'a> {
    /// Gradient with respect to residual stream `layer` (the probe input).
    pub hidden: Option<(usize, &'a Mat)>,
    /// Gradient with respect to the output logits.
    pub logits: Option<&'a Mat>,
}

/// Gradients for each adapter, in `AdapterSet` order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterGrads {
    pub a: Vec<Mat>,
    pub b: Vec<Mat>,
}

impl AdapterGrads {
    pub fn zeros(adapters: &AdapterSet) -> Self {
        AdapterGrads {
            a: adapters.adapters.iter().map(|ad| Mat::zeros(ad.a.rows, ad.a.cols)).collect(),
            b: adapters.adapters.iter().map(|ad| Mat::zeros(ad.b.rows, ad.b.cols)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &AdapterGrads) {
        for (x, y) in self.a.iter_mut().zip(&other.a) {
            x.add_assign(y);
        }
        for (x, y) in self.b.iter_mut().zip(&other.b) {
            x.add_assign(y);
        }
    }
}

/// Backpropagate `upstream` through the network and return adapter
/// gradients. Base parameters are frozen and receive no gradient.
pub fn backward(
    params: &ModelParams,
    adapters: &AdapterSet,
    fwd: &Forward,
    upstream: Upstream<'_>,
) -> Result<AdapterGrads> {
    let cfg = &params.config;
    let mut grads = AdapterGrads::zeros(adapters);
    let Some(lowest) = adapters.min_layer() else { return Ok(grads) };
    let t_len = fwd.logits.rows;
    let d = cfg.d_model;

    // Highest residual stream that receives gradient.
    let top = match (upstream.logits, upstream.hidden) {
        (Some(_), _) => cfg.n_layers,
        (None, Some((l, _))) => l,
        (None, None) => return Ok(grads),
    };
    if let Some((l, h)) = upstream.hidden {
        if l > cfg.n_layers || h.rows != t_len || h.cols != d {
            return Err(invalid("hidden-state gradient does not match the forward pass"));
        }
    }

    let mut dx = Mat::zeros(t_len, d);
    if let Some(dl) = upstream.logits {
        if dl.rows != t_len || dl.cols != cfg.vocab_size {
            return Err(invalid("logit gradient does not match the forward pass"));
        }
        let d_norm = matmul_nn(dl, &params.unembed);
        let x_last = &fwd.residuals[cfg.n_layers];
        dx = rmsnorm_backward(x_last, &params.final_norm, &fwd.final_rms, &d_norm);
    }
    for li in (lowest..top).rev() {
        // dx currently holds the gradient at residual stream li + 1
        if let Some((l, h)) = upstream.hidden {
            if l == li + 1 {
                dx.add_assign(h);
            }
        }
        dx = block_backward(&params.layers[li], li, adapters, &fwd.blocks[li], &dx, cfg.n_heads, &mut grads);
    }
    Ok(grads)
}

pub(crate) fn rmsnorm_backward(x: &Mat, gain: &[f64], rms: &[f64], dy: &Mat) -> Mat {
    let n = x.cols as f64;
    let mut dx = Mat::zeros(x.rows, x.cols);
    for t in 0..x.rows {
        let r = rms[t];
        let xr = x.row(t);
        let dyr = dy.row(t);
        let dot: f64 = xr.iter().zip(dyr).zip(gain).map(|((xv, dv), g)| g * dv * xv).sum();
        let c = dot / (n * r * r * r);
        for (((o, &xv), &dv), &g) in dx.row_mut(t).iter_mut().zip(xr).zip(dyr).zip(gain) {
            *o = g * dv / r - xv * c;
        }
    }
    dx
}

/// Gradient through `y = x·Wᵀ + s·(x·Aᵀ)·Bᵀ`; accumulates adapter grads.
#[allow(clippy::too_many_arguments)]
fn project_backward(
    dy: &Mat,
    w: &Mat,
    x: &Mat,
    layer: usize,
    matrix: AttnMatrix,
    adapters: &AdapterSet,
    u: Option<&Mat>,
    grads: &mut AdapterGrads,
) -> Mat {
    let mut dx = matmul_nn(dy, w);
    if let (Some((idx, ad)), Some(u)) = (adapters.get(layer, matrix), u) {
        let s = ad.scale();
        let mut gb = Mat::zeros(ad.b.rows, ad.b.cols);
        accumulate_tn(&mut gb, dy, u);
        grads.b[idx].axpy(s, &gb);
        let mut du = matmul_nn(dy, &ad.b);
        du.scale(s);
        accumulate_tn(&mut grads.a[idx], &du, x);
        dx.add_assign(&matmul_nn(&du, &ad.a));
    }
    dx
}

fn block_backward(
    layer: &LayerParams,
    li: usize,
    adapters: &AdapterSet,
    c: &BlockCache,
    dx_out: &Mat,
    n_heads: usize,
    grads: &mut AdapterGrads,
) -> Mat {
    let (t_len, d) = (dx_out.rows, dx_out.cols);
    // MLP branch
    let mut d_up = matmul_nn(dx_out, &layer.w_down);
    for (g, &pre) in d_up.data.iter_mut().zip(&c.up.data) {
        *g *= gelu_grad(pre);
    }
    let d_n2 = matmul_nn(&d_up, &layer.w_up);
    let mut d_mid = dx_out.clone();
    d_mid.add_assign(&rmsnorm_backward(&c.x_mid, &layer.mlp_norm, &c.rms2, &d_n2));

    // attention branch
    let u = |m: AttnMatrix| c.lora_u[matrix_index(m)].as_ref();
    let d_ctx = project_backward(&d_mid, &layer.wo, &c.ctx, li, AttnMatrix::O, adapters, u(AttnMatrix::O), grads);
    let hd = d / n_heads;
    let scale = 1.0 / crate::math::sqrt(hd as f64);
    let mut dq = Mat::zeros(t_len, d);
    let mut dk = Mat::zeros(t_len, d);
    let mut dv = Mat::zeros(t_len, d);
    let mut dp = vec![0.0; t_len];
    for (h, p) in c.probs.iter().enumerate() {
        let off = h * hd;
        for i in 0..t_len {
            let dci = &d_ctx.row(i)[off..off + hd];
            let mut row_dot = 0.0;
            for j in 0..=i {
                let vj = &c.v.row(j)[off..off + hd];
                dp[j] = dci.iter().zip(vj).map(|(a, b)| a * b).sum();
                row_dot += dp[j] * p.get(i, j);
                let pij = p.get(i, j);
                for (o, g) in dv.data[j * d + off..j * d + off + hd].iter_mut().zip(dci) {
                    *o += pij * g;
                }
            }
            for j in 0..=i {
                let ds = p.get(i, j) * (dp[j] - row_dot) * scale;
                if ds == 0.0 {
                    continue;
                }
                let kj = &c.k.row(j)[off..off + hd];
                for (o, kv) in dq.data[i * d + off..i * d + off + hd].iter_mut().zip(kj) {
                    *o += ds * kv;
                }
                let qi = &c.q.row(i)[off..off + hd];
                for (o, qv) in dk.data[j * d + off..j * d + off + hd].iter_mut().zip(qi) {
                    *o += ds * qv;
                }
            }
        }
    }
    let mut d_n1 = project_backward(&dq, &layer.wq, &c.n1, li, AttnMatrix::Q, adapters, u(AttnMatrix::Q), grads);
    d_n1.add_assign(&project_backward(&dk, &layer.wk, &c.n1, li, AttnMatrix::K, adapters, u(AttnMatrix::K), grads));
    d_n1.add_assign(&project_backward(&dv, &layer.wv, &c.n1, li, AttnMatrix::V, adapters, u(AttnMatrix::V), grads));
    let mut dx_in = d_mid;
    dx_in.add_assign(&rmsnorm_backward(&c.x_in, &layer.attn_norm, &c.rms1, &d_n1));
    dx_in
}
