use crate::error::{invalid, Result};
use crate::math;

/// Natural-log entropy of a next-token distribution; `0·ln 0` counts as 0.
pub fn token_entropy(dist: &[f64]) -> Result<f64> {
    if dist.is_empty() {
        return Err(invalid("empty distribution"));
    }
    let mut sum = 0.0;
    let mut h = 0.0;
    for &p in dist {
        if !p.is_finite() || p < 0.0 {
            return Err(invalid(alloc::format!("probability {p} is negative or non-finite")));
        }
        sum += p;
        if p > 0.0 {
            h -= p * math::ln(p);
        }
    }
    if (sum - 1.0).abs() > 1e-6 {
        return Err(invalid(alloc::format!("distribution sums to {sum}")));
    }
    Ok(h)
}

pub fn token_perplexity(chosen_logprob: f64) -> Result<f64> {
    if chosen_logprob.is_nan() || chosen_logprob > 0.0 {
        return Err(invalid(alloc::format!("log-probability {chosen_logprob} is positive")));
    }
    Ok(math::exp(-chosen_logprob))
}

/// Max over the inclusive token range `[start, end]`.
pub fn span_max_score(per_token: &[f64], start: usize, end: usize) -> Result<f64> {
    crate::evalproto::span_max(per_token, start, end)
}
