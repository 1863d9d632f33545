use alloc::vec;
use alloc::vec::Vec;
use core::ops::ControlFlow;
use rand::Rng as _;

use super::forward::forward;
use super::lora::AdapterSet;
use super::params::ModelParams;
use crate::corpus::EOS;
use crate::error::{config, invalid, Result};
use crate::math;
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateConfig {
    pub max_new: usize,
    /// 0 selects greedy decoding.
    pub temperature: f64,
    pub seed: u64,
    /// Residual stream exposed to the observer, if any.
    pub probe_layer: Option<usize>,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig { max_new: 64, temperature: 0.0, seed: 0, probe_layer: None }
    }
}

/// What the observer sees after each generated token has been run through
/// the model.
#[derive(Debug, Clone, Copy)]
pub struct StepView<'a> {
    /// Index of the token among the generated tokens.
    pub index: usize,
    pub token: u32,
    /// The token's hidden state at `probe_layer`.
    pub hidden: Option<&'a [f64]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Eos,
    MaxNew,
    ContextFull,
    /// The observer broke the loop.
    Halted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub tokens: Vec<u32>,
    pub stop: StopReason,
}

/// Autoregressive decoding. Each forward pass both samples the next token
/// and exposes the previous token's hidden state to `observer`, so the
/// observer sees exactly the states the sampler used.
pub fn generate(
    params: &ModelParams,
    adapters: Option<&AdapterSet>,
    prompt: &[u32],
    cfg: &GenerateConfig,
    mut observer: impl FnMut(StepView<'_>) -> ControlFlow<()>,
) -> Result<Generation> {
    if !(cfg.temperature.is_finite() && cfg.temperature >= 0.0) {
        return Err(config("temperature must be finite and non-negative"));
    }
    if prompt.is_empty() {
        return Err(invalid("generation needs a non-empty prompt"));
    }
    if let Some(l) = cfg.probe_layer {
        if l > params.config.n_layers {
            return Err(config(alloc::format!("probe layer {l} exceeds model depth")));
        }
    }
    let mut rng = seed::named_rng(cfg.seed, seed::stream::SAMPLING);
    let mut seq = prompt.to_vec();
    let mut generated: Vec<u32> = Vec::new();
    let mut probs = vec![0.0; params.config.vocab_size];
    let stop = loop {
        let fwd = forward(params, adapters, &seq)?;
        let last = seq.len() - 1;
        if let Some(&token) = generated.last() {
            let hidden = cfg.probe_layer.map(|l| fwd.residuals[l].row(last));
            let view = StepView { index: generated.len() - 1, token, hidden };
            if observer(view).is_break() {
                break StopReason::Halted;
            }
            if token == EOS {
                break StopReason::Eos;
            }
        }
        if generated.len() == cfg.max_new {
            break StopReason::MaxNew;
        }
        if seq.len() == params.config.max_seq_len {
            break StopReason::ContextFull;
        }
        let logits = fwd.logits.row(last);
        let next = if cfg.temperature == 0.0 {
            argmax(logits)
        } else {
            let scaled: Vec<f64> = logits.iter().map(|z| z / cfg.temperature).collect();
            math::softmax(&scaled, &mut probs);
            sample(&probs, rng.random::<f64>())
        };
        seq.push(next);
        generated.push(next);
    };
    Ok(Generation { tokens: generated, stop })
}

/// First index of the maximum.
fn argmax(row: &[f64]) -> u32 {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best as u32
}

fn sample(probs: &[f64], u: f64) -> u32 {
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_nonzero = i;
        }
        acc += p;
        if u < acc {
            return i as u32;
        }
    }
    last_nonzero as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refmodel::{init_model, ModelConfig};

    fn model() -> ModelParams {
        init_model(&ModelConfig { d_model: 16, n_layers: 2, n_heads: 2, d_ff: 32, max_seq_len: 64, ..Default::default() })
            .unwrap()
    }

    #[test]
    fn greedy_is_deterministic() {
        let p = model();
        let cfg = GenerateConfig { max_new: 8, ..Default::default() };
        let a = generate(&p, None, &[256, 72, 105], &cfg, |_| ControlFlow::Continue(())).unwrap();
        let b = generate(&p, None, &[256, 72, 105], &cfg, |_| ControlFlow::Continue(())).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.tokens.len(), 8);
        assert_eq!(a.stop, StopReason::MaxNew);
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let p = model();
        let cfg = GenerateConfig { max_new: 12, temperature: 1.0, seed: 42, probe_layer: Some(1) };
        let go = || generate(&p, None, &[256, 65], &cfg, |_| ControlFlow::Continue(())).unwrap();
        assert_eq!(go(), go());
        let other = GenerateConfig { seed: 43, ..cfg.clone() };
        let c = generate(&p, None, &[256, 65], &other, |_| ControlFlow::Continue(())).unwrap();
        assert_ne!(go().tokens, c.tokens);
    }

    #[test]
    fn stops_at_eos() {
        let mut p = model();
        // align the EOS unembedding with the first position's final state
        let fwd = forward(&p, None, &[256]).unwrap();
        let h: Vec<f64> = fwd.final_normed.row(0).iter().map(|v| v * 1e3).collect();
        p.unembed.row_mut(EOS as usize).copy_from_slice(&h);
        let cfg = GenerateConfig { max_new: 10, ..Default::default() };
        let g = generate(&p, None, &[256], &cfg, |_| ControlFlow::Continue(())).unwrap();
        assert_eq!(g.tokens, vec![EOS]);
        assert_eq!(g.stop, StopReason::Eos);
    }

    #[test]
    fn observer_sees_every_token_with_hidden() {
        let p = model();
        let cfg = GenerateConfig { max_new: 5, probe_layer: Some(1), ..Default::default() };
        let mut seen = Vec::new();
        let g = generate(&p, None, &[256, 1], &cfg, |s| {
            assert_eq!(s.hidden.unwrap().len(), 16);
            seen.push(s.token);
            ControlFlow::Continue(())
        })
        .unwrap();
        assert_eq!(seen, g.tokens);
    }
}
