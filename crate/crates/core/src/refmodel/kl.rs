use alloc::vec;
use core::ops::Range;

use super::forward::{forward, ModelInput};
use super::lora::AdapterSet;
use super::params::ModelParams;
use crate::error::{invalid, Result};
use crate::math;
use crate::tensor::Mat;

/// Rows of the logit matrix that predict the completion tokens.
pub(crate) fn completion_rows(input: &ModelInput) -> Result<Range<usize>> {
    if input.completion_start == 0 || input.completion_len() == 0 {
        return Err(invalid("no scored completion positions"));
    }
    Ok(input.completion_start - 1..input.tokens.len() - 1)
}

/// Summed next-token cross-entropy over `rows`, where row `t` predicts
/// `tokens[t + 1]`. Adds `coef · ∂/∂logits` into `grad` when given.
pub fn lm_loss_rows(logits: &Mat, tokens: &[u32], rows: Range<usize>, coef: f64, mut grad: Option<&mut Mat>) -> f64 {
    let mut lp = vec![0.0; logits.cols];
    let mut total = 0.0;
    for t in rows {
        math::log_softmax(logits.row(t), &mut lp);
        let target = tokens[t + 1] as usize;
        total -= lp[target];
        if let Some(g) = grad.as_deref_mut() {
            for (j, (gv, &l)) in g.row_mut(t).iter_mut().zip(&lp).enumerate() {
                let p = math::exp(l);
                *gv += coef * (p - if j == target { 1.0 } else { 0.0 });
            }
        }
    }
    total
}

/// Summed `KL(softmax(adapted) ‖ softmax(base))` over `rows`, natural log.
/// Adds `coef · ∂/∂adapted` into `grad` when given; `base` is constant.
pub fn kl_rows(adapted: &Mat, base: &Mat, rows: Range<usize>, coef: f64, mut grad: Option<&mut Mat>) -> f64 {
    let mut la = vec![0.0; adapted.cols];
    let mut lb = vec![0.0; adapted.cols];
    let mut total = 0.0;
    for t in rows {
        math::log_softmax(adapted.row(t), &mut la);
        math::log_softmax(base.row(t), &mut lb);
        let mut kl = 0.0;
        for (a, b) in la.iter().zip(&lb) {
            kl += math::exp(*a) * (a - b);
        }
        total += kl;
        if let Some(g) = grad.as_deref_mut() {
            for ((gv, a), b) in g.row_mut(t).iter_mut().zip(&la).zip(&lb) {
                *gv += coef * math::exp(*a) * ((a - b) - kl);
            }
        }
    }
    total
}

/// Mean per-token KL from the adapted to the base next-token distribution
/// over the completion positions of `input`.
pub fn kl_to_base(params: &ModelParams, adapters: &AdapterSet, input: &ModelInput) -> Result<f64> {
    let rows = completion_rows(input)?;
    let n = rows.len() as f64;
    let base = forward(params, None, &input.tokens)?;
    let adapted = forward(params, Some(adapters), &input.tokens)?;
    Ok(kl_rows(&adapted.logits, &base.logits, rows, 1.0, None) / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refmodel::{init_model, LoraConfig, ModelConfig};
    use rand::Rng;

    fn direct_kl(za: &[f64], zb: &[f64]) -> f64 {
        // plain softmax then Σ p ln(p/q)
        let sa: f64 = za.iter().map(|z| libm::exp(*z)).sum();
        let sb: f64 = zb.iter().map(|z| libm::exp(*z)).sum();
        za.iter()
            .zip(zb)
            .map(|(a, b)| {
                let p = libm::exp(*a) / sa;
                let q = libm::exp(*b) / sb;
                p * libm::log(p / q)
            })
            .sum()
    }

    #[test]
    fn three_token_vocab_four_matches_direct_sum() {
        let a = Mat::from_vec(3, 4, vec![0.1, -0.3, 0.7, 0.0, 1.2, 0.4, -0.5, 0.3, -1.0, 0.2, 0.2, 2.0]);
        let b = Mat::from_vec(3, 4, vec![0.0, 0.0, 0.0, 0.0, 0.5, -0.2, 0.1, 0.9, 0.3, -0.7, 1.1, 0.0]);
        let expected: f64 = (0..3).map(|t| direct_kl(a.row(t), b.row(t))).sum::<f64>() / 3.0;
        let got = kl_rows(&a, &b, 0..3, 1.0, None) / 3.0;
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn zero_b_gives_exact_zero_and_random_adapters_are_positive() {
        let cfg = ModelConfig { vocab_size: 32, d_model: 16, n_layers: 2, n_heads: 2, d_ff: 32, max_seq_len: 32, ..Default::default() };
        let p = init_model(&cfg).unwrap();
        let mut ads = crate::refmodel::AdapterSet::init(&cfg, 2, &LoraConfig::default(), 3).unwrap();
        let input = ModelInput { tokens: vec![1, 4, 7, 2, 9, 11], completion_start: 2 };
        assert_eq!(kl_to_base(&p, &ads, &input).unwrap(), 0.0);
        let mut rng = crate::seed::rng(11);
        for ad in &mut ads.adapters {
            for v in &mut ad.b.data {
                *v = rng.random_range(-0.5..0.5);
            }
        }
        assert!(kl_to_base(&p, &ads, &input).unwrap() > 0.0);
    }
}
