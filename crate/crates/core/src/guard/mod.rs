//! Streaming selective answering: score every generated token with the probe
//! and abstain as soon as one score exceeds the threshold.

use alloc::string::String;
use alloc::vec::Vec;
use core::ops::ControlFlow;
use serde::{Deserialize, Serialize};

use crate::corpus::{ByteTokenizer, EOS};
use crate::error::{config, invalid, Result};
use crate::math;
use crate::probe::ProbeHead;
use crate::refmodel::{generate, AdapterSet, GenerateConfig, ModelParams, StopReason};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MonitorConfig {
    pub threshold: f64,
    pub abstain_message: String,
    pub max_new_tokens: usize,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            threshold: 0.5,
            abstain_message: String::from("I don't know."),
            max_new_tokens: 64,
            temperature: 0.0,
            seed: 0,
        }
    }
}

impl MonitorConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.threshold.is_finite() {
            return Err(config("monitor threshold must be finite"));
        }
        Ok(())
    }

    /// Abstain iff `score > threshold`.
    pub fn observe(&self, score: f64) -> Decision {
        if score > self.threshold {
            Decision::Abstain
        } else {
            Decision::Continue
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Continue,
    Abstain,
}

/// Scores one generated token from its hidden state.
pub trait TokenScorer {
    /// Residual stream the scorer reads.
    fn layer(&self) -> usize;
    fn score(&self, index: usize, token: u32, hidden: &[f64]) -> f64;
}

impl TokenScorer for ProbeHead {
    fn layer(&self) -> usize {
        self.layer
    }

    fn score(&self, _index: usize, _token: u32, hidden: &[f64]) -> f64 {
        math::sigmoid(self.logit(hidden))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorStatus {
    Completed,
    Abstained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorOutcome {
    pub status: MonitorStatus,
    /// Generated tokens up to and including the trigger token.
    pub tokens: Vec<u32>,
    pub scores: Vec<f64>,
    pub trigger_index: Option<usize>,
    pub trigger_score: Option<f64>,
    /// Decoded generation, kept for audit even after an abstention.
    pub partial_text: String,
    /// What the user sees: the answer, or the abstain message.
    pub output_text: String,
}

pub fn run_monitored<S: TokenScorer>(
    params: &ModelParams,
    scorer: &S,
    adapters: Option<&AdapterSet>,
    prompt: &[u32],
    cfg: &MonitorConfig,
) -> Result<MonitorOutcome> {
    cfg.validate()?;
    let gen_cfg = GenerateConfig {
        max_new: cfg.max_new_tokens,
        temperature: cfg.temperature,
        seed: cfg.seed,
        probe_layer: Some(scorer.layer()),
    };
    let mut scores = Vec::new();
    let mut trigger = None;
    let mut bad = None;
    let g = generate(params, adapters, prompt, &gen_cfg, |view| {
        let hidden = view.hidden.expect("probe layer requested");
        let s = scorer.score(view.index, view.token, hidden);
        scores.push(s);
        if !s.is_finite() {
            bad = Some(view.index);
            return ControlFlow::Break(());
        }
        match cfg.observe(s) {
            Decision::Continue => ControlFlow::Continue(()),
            Decision::Abstain => {
                trigger = Some((view.index, s));
                ControlFlow::Break(())
            }
        }
    })?;
    if let Some(i) = bad {
        return Err(crate::Error::NonFinite { what: "token score", step: Some(i) });
    }
    let text: Vec<u32> = g.tokens.iter().copied().filter(|&t| t != EOS).collect();
    let partial_text = ByteTokenizer::decode(&text);
    Ok(match trigger {
        Some((i, s)) => {
            debug_assert_eq!(g.stop, StopReason::Halted);
            MonitorOutcome {
                status: MonitorStatus::Abstained,
                tokens: g.tokens,
                scores,
                trigger_index: Some(i),
                trigger_score: Some(s),
                partial_text,
                output_text: cfg.abstain_message.clone(),
            }
        }
        None => MonitorOutcome {
            status: MonitorStatus::Completed,
            tokens: g.tokens,
            scores,
            trigger_index: None,
            trigger_score: None,
            output_text: partial_text.clone(),
            partial_text,
        },
    })
}

/// Fraction of answers attempted at each threshold, from per-answer
/// maximum scores.
pub fn attempt_rates(max_scores: &[f64], thresholds: &[f64]) -> Result<Vec<f64>> {
    if max_scores.is_empty() {
        return Err(invalid("no answers"));
    }
    let answers: Vec<(f64, bool)> = max_scores.iter().map(|&s| (s, true)).collect();
    Ok(crate::evalproto::selective_curve(&answers, thresholds)?.into_iter().map(|p| p.attempt_rate).collect())
}
