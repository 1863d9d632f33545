use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::tensor::Mat;
use crate::trace::ActivationTrace;

/// `p_i = σ(w·h_i + b)` on residual stream `layer`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeHead {
    pub w: Vec<f64>,
    pub b: f64,
    pub layer: usize,
}

impl ProbeHead {
    pub fn zeros(d: usize, layer: usize) -> Self {
        ProbeHead { w: vec![0.0; d], b: 0.0, layer }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    #[inline]
    pub fn logit(&self, h: &[f64]) -> f64 {
        self.w.iter().zip(h).map(|(w, x)| w * x).sum::<f64>() + self.b
    }

    #[inline]
    pub fn logit_f32(&self, h: &[f32]) -> f64 {
        self.w.iter().zip(h).map(|(w, &x)| w * f64::from(x)).sum::<f64>() + self.b
    }

    pub fn is_finite(&self) -> bool {
        self.b.is_finite() && self.w.iter().all(|v| v.is_finite())
    }
}

/// Per-row logits of `hidden` (`n × d`).
pub fn head_logits(hidden: &Mat, head: &ProbeHead) -> Result<Vec<f64>> {
    if hidden.cols != head.dim() {
        return Err(Error::Shape { expected: head.dim(), found: hidden.cols, what: "hidden width" });
    }
    Ok((0..hidden.rows).map(|i| head.logit(hidden.row(i))).collect())
}

/// Per-token probabilities from a trace.
pub fn head_scores(trace: &ActivationTrace, head: &ProbeHead) -> Result<Vec<f64>> {
    if trace.d as usize != head.dim() {
        return Err(Error::Shape { expected: head.dim(), found: trace.d as usize, what: "trace width" });
    }
    Ok((0..trace.n_tokens()).map(|i| math::sigmoid(head.logit_f32(trace.row(i)))).collect())
}
