use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use serde::{Deserialize, Serialize};

use crate::corpus::LabeledSample;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// One score per annotated entity.
    LongForm,
    /// Exactly one answer span per sample.
    ShortForm,
    /// One score per completion, labeled by `completion_label`.
    Reasoning,
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "long_form" | "longform" | "long-form" => Ok(Protocol::LongForm),
            "short_form" | "shortform" | "short-form" => Ok(Protocol::ShortForm),
            "reasoning" => Ok(Protocol::Reasoning),
            other => Err(invalid(alloc::format!("unknown protocol {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SpanId {
    Index(usize),
    Completion,
}

impl fmt::Display for SpanId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpanId::Index(i) => write!(f, "{i}"),
            SpanId::Completion => f.write_str("completion"),
        }
    }
}

impl FromStr for SpanId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "completion" {
            return Ok(SpanId::Completion);
        }
        s.parse().map(SpanId::Index).map_err(|_| invalid(alloc::format!("bad span id {s:?}")))
    }
}

impl Serialize for SpanId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SpanId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One row of the method-tagged score table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSpan {
    pub sample_id: String,
    pub span_id: SpanId,
    pub method: String,
    pub score: f64,
    pub label: u8,
}

/// Maximum of `values[start..=end]`.
pub fn span_max(values: &[f64], start: usize, end: usize) -> Result<f64> {
    if start > end || end >= values.len() {
        return Err(invalid(alloc::format!("span {start}..={end} outside {} tokens", values.len())));
    }
    Ok(values[start..=end].iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Aggregate per-token scores into the protocol's scored units.
pub fn score_spans(scores: &[f64], sample: &LabeledSample, protocol: Protocol, method: &str) -> Result<Vec<ScoredSpan>> {
    if scores.len() != sample.n_tokens() {
        return Err(Error::Shape { expected: sample.n_tokens(), found: scores.len(), what: "token scores" });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(invalid(alloc::format!("sample {}: non-finite token score", sample.id)));
    }
    let row = |span_id, score, label| ScoredSpan {
        sample_id: sample.id.clone(),
        span_id,
        method: method.into(),
        score,
        label,
    };
    match protocol {
        Protocol::LongForm | Protocol::ShortForm => {
            if protocol == Protocol::ShortForm && sample.spans.len() != 1 {
                return Err(invalid(alloc::format!(
                    "sample {}: short-form scoring needs exactly one answer span, found {}",
                    sample.id,
                    sample.spans.len()
                )));
            }
            sample
                .spans
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    let (a, b) = s
                        .token_range()
                        .ok_or_else(|| invalid(alloc::format!("sample {}: span {k} unaligned", sample.id)))?;
                    Ok(row(SpanId::Index(k), span_max(scores, a, b)?, s.label.binary()))
                })
                .collect()
        }
        Protocol::Reasoning => {
            let label = sample.completion_label.ok_or_else(|| {
                invalid(alloc::format!("sample {}: reasoning protocol needs completion_label", sample.id))
            })?;
            if scores.is_empty() {
                return Err(invalid(alloc::format!("sample {}: empty completion", sample.id)));
            }
            Ok(alloc::vec![row(SpanId::Completion, span_max(scores, 0, scores.len() - 1)?, label)])
        }
    }
}
