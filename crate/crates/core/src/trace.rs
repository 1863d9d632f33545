//! Per-token model state at the probe layer, exported once and reused by
//! linear probes and uncertainty baselines.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{config, invalid, Error, Result};
use crate::math;
use crate::refmodel::{forward, AdapterSet, ModelInput, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationTrace {
    pub sample_id: String,
    pub layer: u32,
    pub d: u32,
    pub n: u32,
    /// `n × d`, row-major.
    pub hidden: Vec<f32>,
    /// `ln p(t_i | prefix)` for each completion token.
    pub chosen_logprob: Vec<f64>,
    /// Entropy (nats) of the distribution each token was drawn from.
    pub next_token_entropy: Vec<f64>,
}

impl ActivationTrace {
    pub fn row(&self, i: usize) -> &[f32] {
        let d = self.d as usize;
        &self.hidden[i * d..(i + 1) * d]
    }

    pub fn n_tokens(&self) -> usize {
        self.n as usize
    }

    pub fn validate(&self) -> Result<()> {
        let (n, d) = (self.n as usize, self.d as usize);
        if self.hidden.len() != n * d {
            return Err(Error::Shape { expected: n * d, found: self.hidden.len(), what: "trace hidden values" });
        }
        if self.chosen_logprob.len() != n || self.next_token_entropy.len() != n {
            return Err(invalid("trace per-token arrays do not have n entries"));
        }
        if !self.hidden.iter().all(|v| v.is_finite()) {
            return Err(invalid(alloc::format!("trace {}: non-finite hidden value", self.sample_id)));
        }
        if let Some(i) = self.chosen_logprob.iter().position(|v| !v.is_finite() || *v > 0.0) {
            return Err(invalid(alloc::format!(
                "trace {}: chosen_logprob[{i}] must be finite and <= 0",
                self.sample_id
            )));
        }
        if let Some(i) = self.next_token_entropy.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(invalid(alloc::format!(
                "trace {}: next_token_entropy[{i}] must be finite and >= 0",
                self.sample_id
            )));
        }
        Ok(())
    }
}


/// Run the model on `input` and record the completion tokens' residual
/// stream `layer`, chosen-token log-probability and predictive entropy.
pub fn export_trace(
    params: &ModelParams,
    adapters: Option<&AdapterSet>,
    input: &ModelInput,
    sample_id: &str,
    layer: usize,
) -> Result<ActivationTrace> {
    let depth = params.config.n_layers;
    if layer > depth {
        return Err(config(alloc::format!("layer {layer} out of range for a {depth}-layer model")));
    }
    if input.completion_start == 0 {
        return Err(invalid("input needs at least one prefix token"));
    }
    let fwd = forward(params, adapters, &input.tokens)?;
    let n = input.completion_len();
    let d = params.config.d_model;
    let mut hidden = Vec::with_capacity(n * d);
    let mut chosen_logprob = Vec::with_capacity(n);
    let mut next_token_entropy = Vec::with_capacity(n);
    let mut lp = alloc::vec![0.0; params.config.vocab_size];
    for i in 0..n {
        let pos = input.completion_start + i;
        hidden.extend(fwd.residuals[layer].row(pos).iter().map(|&v| v as f32));
        math::log_softmax(fwd.logits.row(pos - 1), &mut lp);
        chosen_logprob.push(lp[input.tokens[pos] as usize].min(0.0));
        next_token_entropy.push(math::entropy_from_logprobs(&lp));
    }
    let trace = ActivationTrace {
        sample_id: sample_id.into(),
        layer: layer as u32,
        d: d as u32,
        n: n as u32,
        hidden,
        chosen_logprob,
        next_token_entropy,
    };
    trace.validate()?;
    Ok(trace)
}
