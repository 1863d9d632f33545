use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::types::LabeledSample;
use crate::error::{config, invalid, Result};

/// Per-token labels and loss weights derived from entity spans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenTargets {
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub entity_mask: Vec<bool>,
}

impl TokenTargets {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Entity tokens take their span's label and weight `alpha`; background
/// tokens are 0 with weight 1. Overlapping spans resolve to hallucinated.
pub fn build_targets(sample: &LabeledSample, alpha: f64) -> Result<TokenTargets> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(config("alpha must be a positive finite number"));
    }
    let n = sample.n_tokens();
    let mut y = vec![0.0; n];
    let mut entity_mask = vec![false; n];
    for (k, span) in sample.spans.iter().enumerate() {
        let (a, b) = span.token_range().ok_or_else(|| {
            invalid(alloc::format!("sample {}: span {k} is not aligned", sample.id))
        })?;
        if a > b || b >= n {
            return Err(invalid(alloc::format!(
                "sample {}: span {k} token range {a}..={b} exceeds {n} tokens",
                sample.id
            )));
        }
        let ys = span.y();
        for i in a..=b {
            entity_mask[i] = true;
            if ys > y[i] {
                y[i] = ys;
            }
        }
    }
    let w = entity_mask.iter().map(|&m| if m { alpha } else { 1.0 }).collect();
    Ok(TokenTargets { y, w, entity_mask })
}
