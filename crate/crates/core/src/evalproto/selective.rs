use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectivePoint {
    pub threshold: f64,
    pub attempted: usize,
    pub correct: usize,
    pub attempt_rate: f64,
    /// Accuracy on attempted answers; `None` when nothing was attempted.
    pub conditional_accuracy: Option<f64>,
}

/// For each threshold `t`, an answer is attempted iff its maximum token
/// score never exceeds `t`.
pub fn selective_curve(answers: &[(f64, bool)], thresholds: &[f64]) -> Result<Vec<SelectivePoint>> {
    if answers.is_empty() {
        return Err(invalid("selective curve needs at least one answer"));
    }
    if answers.iter().any(|(s, _)| s.is_nan()) || thresholds.iter().any(|t| t.is_nan()) {
        return Err(invalid("NaN score or threshold"));
    }
    let n = answers.len() as f64;
    Ok(thresholds
        .iter()
        .map(|&t| {
            let (mut attempted, mut correct) = (0, 0);
            for &(score, ok) in answers {
                if score <= t {
                    attempted += 1;
                    correct += usize::from(ok);
                }
            }
            SelectivePoint {
                threshold: t,
                attempted,
                correct,
                attempt_rate: attempted as f64 / n,
                conditional_accuracy: (attempted > 0).then(|| correct as f64 / attempted as f64),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extremes() {
        let answers = [(0.2, true), (0.6, false), (0.9, true)];
        let pts = selective_curve(&answers, &[1.0, 0.1, 0.6]).unwrap();
        assert_eq!(pts[0].attempt_rate, 1.0);
        assert_eq!(pts[1].attempt_rate, 0.0);
        assert_eq!(pts[1].conditional_accuracy, None);
        // boundary: 0.6 is not above 0.6, so it is attempted
        assert_eq!(pts[2].attempted, 2);
        assert_eq!(pts[2].conditional_accuracy, Some(0.5));
    }

    #[test]
    fn empty_input_errors() {
        assert!(selective_curve(&[], &[0.5]).is_err());
    }
}
