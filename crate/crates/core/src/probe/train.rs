use alloc::vec::Vec;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::head::{head_logits, head_scores, ProbeHead};
use super::loss::{anneal_omega, span_targets, SpanTarget};
pub use super::objective::Regularizer;
use super::objective::{completion_hidden, feature_batch, model_batch, BatchItem, Gradients, ObjectiveConfig};
use super::optim::{Optimizer, OptimizerKind};
use crate::corpus::{build_targets, LabeledSample, TokenTargets};
use crate::error::{config, invalid, Error, Result};
use crate::evalproto::{auc, roc, score_spans, Protocol};
use crate::math::sigmoid;
use crate::refmodel::{forward, AdapterSet, LoraConfig, ModelInput, ModelParams};
use crate::seed;
use crate::tensor::Mat;
use crate::trace::ActivationTrace;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum OmegaSchedule {
    /// `ω` rises linearly from 0 at the first step to 1 at the last.
    #[default]
    Linear,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lambda_reg: f64,
    pub regularizer: Regularizer,
    /// Weight of entity tokens in the token-wise term.
    pub alpha: f64,
    pub omega_schedule: OmegaSchedule,
    pub learning_rate: f64,
    pub adapter_learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub probe_layer: Option<usize>,
    /// LoRA settings; `None` trains a linear probe.
    pub lora: Option<LoraConfig>,
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda_reg: 0.0,
            regularizer: Regularizer::None,
            alpha: 10.0,
            omega_schedule: OmegaSchedule::Linear,
            learning_rate: 1e-2,
            adapter_learning_rate: 1e-3,
            optimizer: OptimizerKind::Sgd,
            steps: 100,
            batch_size: 8,
            seed: 0,
            probe_layer: None,
            lora: None,
            log_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda_reg) {
            return Err(config("lambda_reg must lie in [0, 1]"));
        }
        if self.lora.is_none() && (self.lambda_reg != 0.0 || self.regularizer != Regularizer::None) {
            return Err(config("a regularizer needs LoRA adapters; linear probes use lambda_reg = 0"));
        }
        if self.regularizer == Regularizer::None && self.lambda_reg != 0.0 {
            return Err(config("lambda_reg > 0 needs a regularizer"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(config("alpha must be positive"));
        }
        if self.batch_size == 0 || self.log_every == 0 {
            return Err(config("batch_size and log_every must be at least 1"));
        }
        if let OmegaSchedule::Constant(w) = self.omega_schedule {
            if !(0.0..=1.0).contains(&w) {
                return Err(config("omega must lie in [0, 1]"));
            }
        }
        for lr in [self.learning_rate, self.adapter_learning_rate] {
            if !(lr.is_finite() && lr >= 0.0) {
                return Err(config("learning rates must be finite and non-negative"));
            }
        }
        Ok(())
    }

    /// `ω` used at optimizer step `step` (0-based) of `self.steps`.
    pub fn omega_at(&self, step: usize) -> f64 {
        match self.omega_schedule {
            OmegaSchedule::Constant(w) => w,
            OmegaSchedule::Linear if self.steps > 1 => anneal_omega(step, self.steps - 1).unwrap_or(1.0),
            OmegaSchedule::Linear => 0.0,
        }
    }
}

/// Where hidden states come from.
#[derive(Debug, Clone, Copy)]
pub enum Features<'a> {
    /// Exported traces, paired with samples by position.
    Traces(&'a [ActivationTrace]),
    /// Run the reference model.
    Model(&'a ModelParams),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub logged_steps: Vec<usize>,
    pub omega: Vec<f64>,
    pub probe_loss: Vec<f64>,
    pub reg_loss: Vec<Option<f64>>,
    pub total_loss: Vec<f64>,
    pub final_omega: f64,
    pub steps: usize,
    /// Filled in by callers that have a clock.
    pub wall_time_ms: Option<u64>,
    pub val_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub head: ProbeHead,
    pub adapters: Option<AdapterSet>,
    pub report: TrainReport,
}

fn resolve_layer(features: &Features<'_>, cfg: &TrainConfig) -> Result<(usize, usize)> {
    match features {
        Features::Model(p) => {
            let layer = cfg.probe_layer.unwrap_or_else(|| p.config.probe_layer());
            if layer > p.config.n_layers {
                return Err(config(alloc::format!("probe layer {layer} exceeds model depth {}", p.config.n_layers)));
            }
            Ok((layer, p.config.d_model))
        }
        Features::Traces(ts) => {
            let first = ts.first().ok_or_else(|| invalid("no traces"))?;
            let layer = first.layer as usize;
            if ts.iter().any(|t| t.layer != first.layer || t.d != first.d) {
                return Err(invalid("traces disagree on layer or width"));
            }
            if cfg.probe_layer.is_some_and(|l| l != layer) {
                return Err(config("probe_layer override does not match the trace layer"));
            }
            Ok((layer, first.d as usize))
        }
    }
}

pub(crate) fn model_input(sample: &LabeledSample) -> ModelInput {
    ModelInput::from_text(&sample.prompt, &sample.completion)
}

fn trace_for<'t>(traces: &'t [ActivationTrace], idx: usize, sample: &LabeledSample) -> Result<&'t ActivationTrace> {
    let t = traces.get(idx).ok_or_else(|| invalid("fewer traces than samples"))?;
    if t.sample_id != sample.id || t.n_tokens() != sample.n_tokens() {
        return Err(invalid(alloc::format!(
            "trace {} does not pair with sample {} ({} vs {} tokens)",
            t.sample_id,
            sample.id,
            t.n,
            sample.n_tokens()
        )));
    }
    Ok(t)
}

/// Hidden states of the completion tokens at `layer`, without adapters.
pub fn sample_features(features: &Features<'_>, idx: usize, sample: &LabeledSample, layer: usize) -> Result<Mat> {
    match features {
        Features::Traces(ts) => {
            let t = trace_for(ts, idx, sample)?;
            Ok(Mat::from_vec(t.n_tokens(), t.d as usize, t.hidden.iter().map(|&v| f64::from(v)).collect()))
        }
        Features::Model(p) => {
            let input = model_input(sample);
            let fwd = forward(p, None, &input.tokens)?;
            Ok(completion_hidden(&fwd.residuals[layer], &input))
        }
    }
}

/// Per-token probe probabilities for sample `idx`.
pub fn score_sample(
    head: &ProbeHead,
    adapters: Option<&AdapterSet>,
    features: &Features<'_>,
    idx: usize,
    sample: &LabeledSample,
) -> Result<Vec<f64>> {
    match features {
        Features::Traces(ts) => {
            if adapters.is_some_and(|a| !a.is_empty()) {
                return Err(config("LoRA probes must be scored with the model"));
            }
            head_scores(trace_for(ts, idx, sample)?, head)
        }
        Features::Model(p) => {
            let input = model_input(sample);
            let fwd = forward(p, adapters, &input.tokens)?;
            let hidden = completion_hidden(&fwd.residuals[head.layer], &input);
            Ok(head_logits(&hidden, head)?.into_iter().map(sigmoid).collect())
        }
    }
}

struct Prepared {
    targets: Vec<TokenTargets>,
    spans: Vec<Vec<SpanTarget>>,
}

fn prepare(samples: &[LabeledSample], alpha: f64) -> Result<Prepared> {
    let mut targets = Vec::with_capacity(samples.len());
    let mut spans = Vec::with_capacity(samples.len());
    for s in samples {
        targets.push(build_targets(s, alpha)?);
        spans.push(span_targets(s)?);
    }
    Ok(Prepared { targets, spans })
}

/// Flat view `[w.., b, A₀.., B₀.., A₁.., ...]` used by the optimizer.
fn flatten(head: &ProbeHead, adapters: Option<&AdapterSet>) -> Vec<f64> {
    let mut out = head.w.clone();
    out.push(head.b);
    if let Some(ads) = adapters {
        for a in &ads.adapters {
            out.extend_from_slice(&a.a.data);
            out.extend_from_slice(&a.b.data);
        }
    }
    out
}

fn unflatten(flat: &[f64], head: &mut ProbeHead, adapters: Option<&mut AdapterSet>) {
    let d = head.w.len();
    head.w.copy_from_slice(&flat[..d]);
    head.b = flat[d];
    let mut off = d + 1;
    if let Some(ads) = adapters {
        for a in &mut ads.adapters {
            let n = a.a.data.len();
            a.a.data.copy_from_slice(&flat[off..off + n]);
            off += n;
            let n = a.b.data.len();
            a.b.data.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
    }
}

fn flatten_grads(g: &Gradients) -> Vec<f64> {
    let mut out = g.w.clone();
    out.push(g.b);
    if let Some(ag) = &g.adapters {
        for (a, b) in ag.a.iter().zip(&ag.b) {
            out.extend_from_slice(&a.data);
            out.extend_from_slice(&b.data);
        }
    }
    out
}

/// Train a probe head (and adapters when `config.lora` is set).
///
/// Batches are drawn from a seeded permutation that is redrawn every
/// epoch. `validation`, when given, is scored with span-max under the
/// long-form protocol to fill `TrainReport::val_auc`.
pub fn train(
    samples: &[LabeledSample],
    features: Features<'_>,
    cfg: &TrainConfig,
    validation: Option<(&[LabeledSample], Features<'_>)>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(invalid("training set is empty"));
    }
    if !samples.iter().any(|s| !s.spans.is_empty()) {
        return Err(invalid("training set has no labeled spans"));
    }
    let (layer, d) = resolve_layer(&features, cfg)?;
    let prepared = prepare(samples, cfg.alpha)?;

    let mut head = ProbeHead::zeros(d, layer);
    let mut adapters = match (&cfg.lora, &features) {
        (None, _) => None,
        (Some(_), Features::Traces(_)) => return Err(config("LoRA training needs the model, not traces")),
        (Some(lcfg), Features::Model(p)) => {
            Some(AdapterSet::init(&p.config, layer, lcfg, seed::substream(cfg.seed, seed::stream::INIT))?)
        }
    };

    // Linear probes see frozen features; compute them once.
    let fixed: Option<Vec<Mat>> = match adapters {
        None => Some(
            samples
                .iter()
                .enumerate()
                .map(|(i, s)| sample_features(&features, i, s, layer))
                .collect::<Result<_>>()?,
        ),
        Some(_) => None,
    };
    let inputs: Vec<ModelInput> = match adapters {
        Some(_) => samples.iter().map(model_input).collect(),
        None => Vec::new(),
    };

    let mut flat = flatten(&head, adapters.as_ref());
    let lrs: Vec<f64> = (0..flat.len())
        .map(|i| if i <= d { cfg.learning_rate } else { cfg.adapter_learning_rate })
        .collect();
    let mut opt = Optimizer::new(cfg.optimizer, flat.len());
    let mut rng = seed::named_rng(cfg.seed, seed::stream::SHUFFLE);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;
    let mut report = TrainReport { steps: cfg.steps, ..Default::default() };

    for step in 0..cfg.steps {
        let omega = cfg.omega_at(step);
        let mut batch = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size.min(samples.len()) {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(order[cursor]);
            cursor += 1;
        }
        let items: Vec<BatchItem<'_>> = batch
            .iter()
            .map(|&i| BatchItem { targets: &prepared.targets[i], spans: &prepared.spans[i] })
            .collect();
        let ocfg = ObjectiveConfig { omega, lambda_reg: cfg.lambda_reg, regularizer: cfg.regularizer };
        let (loss, grads) = match (&fixed, &features) {
            (Some(feats), _) => {
                let hs: Vec<&Mat> = batch.iter().map(|&i| &feats[i]).collect();
                feature_batch(&head, &hs, &items, &ocfg)?
            }
            (None, Features::Model(p)) => {
                let ins: Vec<&ModelInput> = batch.iter().map(|&i| &inputs[i]).collect();
                model_batch(p, adapters.as_ref(), &head, &ins, &items, &ocfg).map_err(|e| match e {
                    Error::NonFinite { what, .. } => Error::NonFinite { what, step: Some(step) },
                    other => other,
                })?
            }
            (None, Features::Traces(_)) => unreachable!("adapters require the model"),
        };
        let g = flatten_grads(&grads);
        if !loss.total.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "loss", step: Some(step) });
        }
        if step % cfg.log_every == 0 || step + 1 == cfg.steps {
            report.logged_steps.push(step);
            report.omega.push(omega);
            report.probe_loss.push(loss.probe);
            report.reg_loss.push(loss.reg);
            report.total_loss.push(loss.total);
        }
        opt.step(&mut flat, &g, &lrs);
        unflatten(&flat, &mut head, adapters.as_mut());
        report.final_omega = omega;
    }

    if let Some((val, vfeat)) = validation {
        report.val_auc = validation_auc(&head, adapters.as_ref(), val, &vfeat)?;
    }
    Ok(TrainOutcome { head, adapters, report })
}

fn validation_auc(
    head: &ProbeHead,
    adapters: Option<&AdapterSet>,
    samples: &[LabeledSample],
    features: &Features<'_>,
) -> Result<Option<f64>> {
    let mut scored = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        let p = score_sample(head, adapters, features, i, s)?;
        scored.extend(score_spans(&p, s, Protocol::LongForm, "probe")?);
    }
    Ok(roc(&scored).ok().map(|c| auc(&c)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_probe_rejects_regularizer() {
        let cfg = TrainConfig { lambda_reg: 0.5, regularizer: Regularizer::Kl, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig { lambda_reg: 0.5, regularizer: Regularizer::None, lora: Some(LoraConfig::default()), ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn omega_schedule_hits_both_ends() {
        let cfg = TrainConfig { steps: 11, ..Default::default() };
        assert_eq!(cfg.omega_at(0), 0.0);
        assert_eq!(cfg.omega_at(5), 0.5);
        assert_eq!(cfg.omega_at(10), 1.0);
    }
}
