use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::head::ProbeHead;
use super::loss::{mix, span_argmax, SpanTarget};
use crate::corpus::TokenTargets;
use crate::error::{config, Error, Result};
use crate::math::{bce_with_logit, sigmoid};
use crate::refmodel::{backward, forward, kl_rows, lm_loss_rows, AdapterGrads, AdapterSet, ModelInput, ModelParams, Upstream};
use crate::tensor::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularizer {
    #[default]
    None,
    /// Next-token cross-entropy of the adapted model.
    Lm,
    /// KL from the adapted to the frozen base next-token distribution.
    Kl,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveConfig {
    pub omega: f64,
    pub lambda_reg: f64,
    pub regularizer: Regularizer,
}

/// Targets of one sample in a batch.
#[derive(Debug, Clone, Copy)]
pub struct BatchItem<'a> {
    pub targets: &'a TokenTargets,
    pub spans: &'a [SpanTarget],
}

/// Batch-normalized loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// Weighted token BCE divided by the batch token count.
    pub token: f64,
    /// Span-max BCE divided by the batch span count (0 without spans).
    pub span: f64,
    pub probe: f64,
    pub reg: Option<f64>,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w: Vec<f64>,
    pub b: f64,
    pub adapters: Option<AdapterGrads>,
}

/// Normalizers shared by every sample of a batch.
#[derive(Debug, Clone, Copy)]
pub struct ProbeObjective {
    pub n_tokens: usize,
    pub n_spans: usize,
    pub omega: f64,
}

impl ProbeObjective {
    pub fn for_batch(items: &[BatchItem<'_>], omega: f64) -> Self {
        ProbeObjective {
            n_tokens: items.iter().map(|i| i.targets.len()).sum(),
            n_spans: items.iter().map(|i| i.spans.len()).sum(),
            omega,
        }
    }

    /// Combine summed terms into the normalized probe loss.
    pub fn combine(&self, token_sum: f64, span_sum: f64) -> (f64, f64, f64) {
        let tok = if self.n_tokens > 0 { token_sum / self.n_tokens as f64 } else { 0.0 };
        let span = if self.n_spans > 0 { span_sum / self.n_spans as f64 } else { 0.0 };
        (tok, span, mix(tok, span, self.omega))
    }
}

/// Raw token and span sums for one sample, and `coef · ∂L_probe/∂z` added
/// into `dz`. The span-max term sends its gradient only to each span's
/// first argmax token.
pub fn probe_objective(
    logits: &[f64],
    item: &BatchItem<'_>,
    norm: &ProbeObjective,
    coef: f64,
    dz: &mut [f64],
) -> Result<(f64, f64)> {
    let t = item.targets;
    if logits.len() != t.len() || dz.len() != t.len() {
        return Err(Error::Shape { expected: t.len(), found: logits.len(), what: "token logits" });
    }
    let tok_coef = if norm.n_tokens > 0 { coef * (1.0 - norm.omega) / norm.n_tokens as f64 } else { 0.0 };
    let span_coef = if norm.n_spans > 0 { coef * norm.omega / norm.n_spans as f64 } else { 0.0 };
    let mut token_sum = 0.0;
    for (i, &z) in logits.iter().enumerate() {
        token_sum += t.w[i] * bce_with_logit(t.y[i], z);
        if tok_coef != 0.0 {
            dz[i] += tok_coef * t.w[i] * (sigmoid(z) - t.y[i]);
        }
    }
    let mut span_sum = 0.0;
    for s in item.spans {
        let i = span_argmax(logits, s)?;
        span_sum += bce_with_logit(s.y, logits[i]);
        if span_coef != 0.0 {
            dz[i] += span_coef * (sigmoid(logits[i]) - s.y);
        }
    }
    Ok((token_sum, span_sum))
}

fn check(cfg: &ObjectiveConfig) -> Result<()> {
    if !(0.0..=1.0).contains(&cfg.omega) {
        return Err(config("omega must lie in [0, 1]"));
    }
    if !(0.0..=1.0).contains(&cfg.lambda_reg) {
        return Err(config("lambda_reg must lie in [0, 1]"));
    }
    Ok(())
}

/// Loss and head gradients on fixed features (linear probe).
pub fn feature_batch(
    head: &ProbeHead,
    features: &[&Mat],
    items: &[BatchItem<'_>],
    cfg: &ObjectiveConfig,
) -> Result<(LossBreakdown, Gradients)> {
    check(cfg)?;
    if cfg.regularizer != Regularizer::None && cfg.lambda_reg != 0.0 {
        return Err(config("a regularizer needs LoRA adapters; linear probes use lambda_reg = 0"));
    }
    let norm = ProbeObjective::for_batch(items, cfg.omega);
    let mut grads = Gradients { w: vec![0.0; head.dim()], b: 0.0, adapters: None };
    let (mut token_sum, mut span_sum) = (0.0, 0.0);
    for (h, item) in features.iter().zip(items) {
        let logits = super::head::head_logits(h, head)?;
        let mut dz = vec![0.0; logits.len()];
        let (ts, ss) = probe_objective(&logits, item, &norm, 1.0, &mut dz)?;
        token_sum += ts;
        span_sum += ss;
        accumulate_head(&mut grads, h, &dz);
    }
    let (token, span, probe) = norm.combine(token_sum, span_sum);
    Ok((LossBreakdown { token, span, probe, reg: None, total: probe }, grads))
}

fn accumulate_head(grads: &mut Gradients, hidden: &Mat, dz: &[f64]) {
    for (i, &g) in dz.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        grads.b += g;
        for (gw, hv) in grads.w.iter_mut().zip(hidden.row(i)) {
            *gw += g * hv;
        }
    }
}

/// Completion rows of residual stream `layer`.
pub(crate) fn completion_hidden(residual: &Mat, input: &ModelInput) -> Mat {
    let start = input.completion_start;
    let d = residual.cols;
    Mat::from_vec(input.completion_len(), d, residual.data[start * d..].to_vec())
}

/// Loss and gradients through the model: head parameters and, when
/// adapters are given, every adapter matrix. `L_total = (1-λ)·L_probe + λ·L_reg`
/// with `L_reg` averaged over all completion positions of the batch.
pub fn model_batch(
    params: &ModelParams,
    adapters: Option<&AdapterSet>,
    head: &ProbeHead,
    inputs: &[&ModelInput],
    items: &[BatchItem<'_>],
    cfg: &ObjectiveConfig,
) -> Result<(LossBreakdown, Gradients)> {
    check(cfg)?;
    let has_adapters = adapters.is_some_and(|a| !a.is_empty());
    if cfg.regularizer != Regularizer::None && !has_adapters {
        return Err(config("a regularizer needs LoRA adapters; linear probes use lambda_reg = 0"));
    }
    if cfg.regularizer == Regularizer::None && cfg.lambda_reg != 0.0 {
        return Err(config("lambda_reg > 0 needs a regularizer"));
    }
    if head.layer > params.config.n_layers || head.dim() != params.config.d_model {
        return Err(config("probe head does not match the model"));
    }
    let lambda = cfg.lambda_reg;
    let norm = ProbeObjective::for_batch(items, cfg.omega);
    let n_reg: usize = inputs.iter().map(|i| i.completion_len()).sum();
    let reg_coef = if n_reg > 0 { lambda / n_reg as f64 } else { 0.0 };
    let mut grads = Gradients {
        w: vec![0.0; head.dim()],
        b: 0.0,
        adapters: adapters.filter(|a| !a.is_empty()).map(AdapterGrads::zeros),
    };
    let (mut token_sum, mut span_sum, mut reg_sum) = (0.0, 0.0, 0.0);
    for (input, item) in inputs.iter().zip(items) {
        let fwd = forward(params, adapters, &input.tokens)?;
        let hidden = completion_hidden(&fwd.residuals[head.layer], input);
        let logits = super::head::head_logits(&hidden, head)?;
        let mut dz = vec![0.0; logits.len()];
        let (ts, ss) = probe_objective(&logits, item, &norm, 1.0 - lambda, &mut dz)?;
        token_sum += ts;
        span_sum += ss;
        accumulate_head(&mut grads, &hidden, &dz);

        let rows = crate::refmodel::kl::completion_rows(input)?;
        let mut d_logits = (cfg.regularizer != Regularizer::None && reg_coef != 0.0)
            .then(|| Mat::zeros(fwd.logits.rows, fwd.logits.cols));
        reg_sum += match cfg.regularizer {
            Regularizer::None => 0.0,
            Regularizer::Lm => lm_loss_rows(&fwd.logits, &input.tokens, rows, reg_coef, d_logits.as_mut()),
            Regularizer::Kl => {
                let base = forward(params, None, &input.tokens)?;
                kl_rows(&fwd.logits, &base.logits, rows, reg_coef, d_logits.as_mut())
            }
        };

        if let (Some(ads), Some(acc)) = (adapters, grads.adapters.as_mut()) {
            // d L / d h_i = dz_i · w on the completion rows of the probe stream
            let d = params.config.d_model;
            let mut d_hidden = Mat::zeros(fwd.logits.rows, d);
            for (i, &g) in dz.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let row = d_hidden.row_mut(input.completion_start + i);
                for (o, w) in row.iter_mut().zip(&head.w) {
                    *o = g * w;
                }
            }
            let up = Upstream { hidden: Some((head.layer, &d_hidden)), logits: d_logits.as_ref() };
            acc.add_assign(&backward(params, ads, &fwd, up)?);
        }
    }
    let (token, span, probe) = norm.combine(token_sum, span_sum);
    let reg = (cfg.regularizer != Regularizer::None).then(|| if n_reg > 0 { reg_sum / n_reg as f64 } else { 0.0 });
    let total = match reg {
        Some(r) => mix(probe, r, lambda),
        None => probe,
    };
    if !total.is_finite() {
        return Err(Error::NonFinite { what: "loss", step: None });
    }
    Ok((LossBreakdown { token, span, probe, reg, total }, grads))
}
