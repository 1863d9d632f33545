//! Scalar helpers over `libm` so results do not depend on the platform libm.

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

/// Logistic sigmoid, evaluated on the side that cannot overflow.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + exp(-z))
    } else {
        let e = exp(z);
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + ln_1p(exp(-z))
    } else {
        ln_1p(exp(z))
    }
}

/// Binary cross-entropy of label `y` against `sigmoid(z)`, from the logit.
///
/// `BCE = y·softplus(-z) + (1-y)·softplus(z)`.
#[inline]
pub fn bce_with_logit(y: f64, z: f64) -> f64 {
    y * softplus(-z) + (1.0 - y) * softplus(z)
}

/// Log-softmax of a row, written into `out`. Returns the log partition.
pub fn log_softmax(row: &[f64], out: &mut [f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for &v in row {
        sum += exp(v - max);
    }
    let lse = max + ln(sum);
    for (o, &v) in out.iter_mut().zip(row) {
        *o = v - lse;
    }
    lse
}

/// Softmax of a row into `out`.
pub fn softmax(row: &[f64], out: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(row) {
        *o = exp(v - max);
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Shannon entropy (nats) from log-probabilities.
pub fn entropy_from_logprobs(logp: &[f64]) -> f64 {
    let mut h = 0.0;
    for &lp in logp {
        let p = exp(lp);
        if p > 0.0 {
            h -= p * lp;
        }
    }
    h.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((1.0 - sigmoid(30.0)) < 1e-9);
        assert!(sigmoid(-1e4) >= 0.0);
        assert!(sigmoid(1e4) <= 1.0);
    }

    #[test]
    fn bce_matches_direct_formula() {
        let z = 0.3;
        let p = sigmoid(z);
        let direct = -(0.7 * ln(p) + 0.3 * ln(1.0 - p));
        assert!((bce_with_logit(0.7, z) - direct).abs() < 1e-14);
        assert!((bce_with_logit(0.0, 0.0) - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn bce_never_nan_on_wide_logits() {
        for &z in &[-1e4, -700.0, -30.0, 0.0, 30.0, 700.0, 1e4] {
            for &y in &[0.0, 1.0] {
                let v = bce_with_logit(y, z);
                assert!(v.is_finite() && v >= 0.0, "z={z} y={y} -> {v}");
            }
        }
    }
}
