use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::tokenizer::TokenOffset;
use crate::error::{invalid, Result};

/// Outcome of verifying one entity against external evidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerificationLabel {
    Supported,
    NotSupported,
    InsufficientInformation,
}

impl VerificationLabel {
    /// Unverifiable entities count as hallucinated.
    pub fn is_hallucinated(self) -> bool {
        !matches!(self, VerificationLabel::Supported)
    }

    pub fn binary(self) -> u8 {
        u8::from(self.is_hallucinated())
    }

    pub fn as_str(self) -> &'static str {
        match self {
            VerificationLabel::Supported => "supported",
            VerificationLabel::NotSupported => "not_supported",
            VerificationLabel::InsufficientInformation => "insufficient_information",
        }
    }

    /// Accepts the snake_case wire names and the title-case judge names.
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "supported" | "Supported" => Some(VerificationLabel::Supported),
            "not_supported" | "Not Supported" => Some(VerificationLabel::NotSupported),
            "insufficient_information" | "Insufficient Information" => {
                Some(VerificationLabel::InsufficientInformation)
            }
            _ => None,
        }
    }
}

/// An annotation before it has been matched against the completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSpan {
    pub text: String,
    pub label: VerificationLabel,
    #[serde(default)]
    pub note: String,
    /// Byte offsets claimed by the producer, if any. Claimed offsets are
    /// checked, never trusted.
    #[serde(default)]
    pub char_range: Option<(usize, usize)>,
}

impl RawSpan {
    pub fn new(text: impl Into<String>, label: VerificationLabel) -> Self {
        RawSpan { text: text.into(), label, note: String::new(), char_range: None }
    }
}

/// An entity span matched byte-for-byte against its completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub text: String,
    /// Half-open byte range into the completion.
    pub char_start: usize,
    pub char_end: usize,
    /// Inclusive token range; `None` until aligned to a tokenization.
    pub token_start: Option<usize>,
    pub token_end: Option<usize>,
    pub label: VerificationLabel,
    pub note: String,
}

impl EntitySpan {
    pub fn token_range(&self) -> Option<(usize, usize)> {
        Some((self.token_start?, self.token_end?))
    }

    pub fn y(&self) -> f64 {
        f64::from(self.label.binary())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub id: String,
    pub prompt: String,
    pub completion: String,
    /// Completion tokenization; tiles `completion` exactly.
    pub tokens: Vec<TokenOffset>,
    pub spans: Vec<EntitySpan>,
    pub source_tag: String,
    /// Whole-completion label for the reasoning protocol (1 = incorrect).
    pub completion_label: Option<u8>,
}

impl LabeledSample {
    pub fn n_tokens(&self) -> usize {
        self.tokens.len()
    }

    /// Check tokenization tiling and every span's byte and token invariants.
    pub fn validate(&self) -> Result<()> {
        let mut cursor = 0;
        for (i, t) in self.tokens.iter().enumerate() {
            if t.start != cursor || t.end <= t.start {
                return Err(invalid(alloc::format!(
                    "sample {}: token {i} does not tile the completion",
                    self.id
                )));
            }
            cursor = t.end;
        }
        if cursor != self.completion.len() {
            return Err(invalid(alloc::format!(
                "sample {}: tokens cover {cursor} of {} bytes",
                self.id,
                self.completion.len()
            )));
        }
        for (k, s) in self.spans.iter().enumerate() {
            if s.char_start >= s.char_end
                || self.completion.get(s.char_start..s.char_end) != Some(s.text.as_str())
            {
                return Err(invalid(alloc::format!(
                    "sample {}: span {k} text does not match completion bytes",
                    self.id
                )));
            }
            if let Some((a, b)) = s.token_range() {
                if a > b || b >= self.tokens.len() {
                    return Err(invalid(alloc::format!(
                        "sample {}: span {k} token range out of bounds",
                        self.id
                    )));
                }
                if self.tokens[a].start > s.char_start || self.tokens[b].end < s.char_end {
                    return Err(invalid(alloc::format!(
                        "sample {}: span {k} token range does not cover its bytes",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Merge spans sharing an identical token range. The first span is kept;
/// a hallucinated label wins any conflict. Returns the number of spans
/// merged away.
pub fn merge_duplicate_spans(spans: &mut Vec<EntitySpan>) -> usize {
    let before = spans.len();
    let mut kept: Vec<EntitySpan> = Vec::with_capacity(spans.len());
    for s in spans.drain(..) {
        let key = s.token_range();
        match kept.iter_mut().find(|k| key.is_some() && k.token_range() == key) {
            Some(existing) => {
                if s.label.is_hallucinated() && !existing.label.is_hallucinated() {
                    existing.label = s.label;
                }
            }
            None => kept.push(s),
        }
    }
    *spans = kept;
    before - spans.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_mapping_follows_label() {
        assert_eq!(VerificationLabel::Supported.binary(), 0);
        assert_eq!(VerificationLabel::NotSupported.binary(), 1);
        assert_eq!(VerificationLabel::InsufficientInformation.binary(), 1);
    }

    #[test]
    fn label_parsing() {
        assert_eq!(VerificationLabel::parse("Not Supported"), Some(VerificationLabel::NotSupported));
        assert_eq!(
            VerificationLabel::parse("insufficient_information"),
            Some(VerificationLabel::InsufficientInformation)
        );
        assert_eq!(VerificationLabel::parse("Maybe"), None);
    }
}
