use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::corpus::{LabeledSample, TokenTargets};
use crate::error::{config, invalid, Error, Result};
use crate::math::bce_with_logit;

/// One labeled span over inclusive token indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpanTarget {
    pub start: usize,
    pub end: usize,
    pub y: f64,
}

pub fn span_targets(sample: &LabeledSample) -> Result<Vec<SpanTarget>> {
    sample
        .spans
        .iter()
        .map(|s| {
            let (start, end) =
                s.token_range().ok_or_else(|| invalid(alloc::format!("sample {}: unaligned span", sample.id)))?;
            Ok(SpanTarget { start, end, y: s.y() })
        })
        .collect()
}

/// `Σ_i w_i · BCE(y_i, σ(z_i))` over per-token logits `z`.
pub fn token_loss(logits: &[f64], targets: &TokenTargets) -> Result<f64> {
    if logits.len() != targets.len() {
        return Err(Error::Shape { expected: targets.len(), found: logits.len(), what: "token logits" });
    }
    Ok(logits
        .iter()
        .zip(&targets.y)
        .zip(&targets.w)
        .map(|((&z, &y), &w)| w * bce_with_logit(y, z))
        .sum())
}

/// Index of the largest logit in the span, first index on ties.
pub(crate) fn span_argmax(logits: &[f64], span: &SpanTarget) -> Result<usize> {
    if span.start > span.end || span.end >= logits.len() {
        return Err(invalid(alloc::format!(
            "span {}..={} is empty or outside {} tokens",
            span.start,
            span.end,
            logits.len()
        )));
    }
    let mut best = span.start;
    for i in span.start + 1..=span.end {
        if logits[i] > logits[best] {
            best = i;
        }
    }
    Ok(best)
}

/// `Σ_s BCE(y_s, max_{i∈s} σ(z_i))`. The max is taken on logits, which
/// is the same token because σ is increasing.
pub fn span_max_loss(logits: &[f64], spans: &[SpanTarget]) -> Result<f64> {
    let mut total = 0.0;
    for s in spans {
        let i = span_argmax(logits, s)?;
        total += bce_with_logit(s.y, logits[i]);
    }
    Ok(total)
}

/// `(1-ω)·token_loss + ω·span_max_loss`, exact at both endpoints.
pub fn probe_loss(logits: &[f64], targets: &TokenTargets, spans: &[SpanTarget], omega: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&omega) {
        return Err(config("omega must lie in [0, 1]"));
    }
    let tok = token_loss(logits, targets)?;
    let span = span_max_loss(logits, spans)?;
    Ok(mix(tok, span, omega))
}

/// `(1-λ)·probe + λ·reg`. A missing regularizer with `λ > 0` is an error.
pub fn total_loss(probe: f64, reg: Option<f64>, lambda: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(config("lambda_reg must lie in [0, 1]"));
    }
    match reg {
        Some(r) => Ok(mix(probe, r, lambda)),
        None if lambda == 0.0 => Ok(probe),
        None => Err(config("a regularizer needs LoRA adapters; linear probes use lambda_reg = 0")),
    }
}

/// Convex mix that returns an operand unchanged at the endpoints.
#[inline]
pub(crate) fn mix(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else if t == 1.0 {
        b
    } else {
        (1.0 - t) * a + t * b
    }
}

/// Linear ramp `step / total_steps`.
pub fn anneal_omega(step: usize, total_steps: usize) -> Result<f64> {
    if total_steps == 0 {
        return Err(config("total_steps must be positive"));
    }
    if step > total_steps {
        return Err(config("step exceeds total_steps"));
    }
    Ok(step as f64 / total_steps as f64)
}
