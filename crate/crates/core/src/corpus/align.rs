use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::tokenizer::TokenOffset;
use super::types::{merge_duplicate_spans, EntitySpan, RawSpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionReason {
    Empty,
    /// No unconsumed verbatim occurrence in the completion.
    NotFound,
    /// Claimed offsets do not select the span text.
    OffsetMismatch,
    /// Claimed offsets split a UTF-8 character.
    NotCharBoundary,
    /// No token intersects the span.
    NoTokens,
}

/// A discarded annotation. Rejections are data, not errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub index: usize,
    pub text: String,
    pub reason: RejectionReason,
}

/// Matches annotations against one completion in document order.
///
/// Each verbatim occurrence of a text can be claimed once; later annotations
/// with the same text move on to the next unclaimed occurrence.
pub struct SpanAligner<'a> {
    completion: &'a str,
    tokens: &'a [TokenOffset],
    consumed: BTreeSet<(usize, usize)>,
    seen: usize,
}

impl<'a> SpanAligner<'a> {
    pub fn new(completion: &'a str, tokens: &'a [TokenOffset]) -> Self {
        SpanAligner { completion, tokens, consumed: BTreeSet::new(), seen: 0 }
    }

    pub fn align(&mut self, raw: &RawSpan) -> Result<EntitySpan, Rejection> {
        let index = self.seen;
        self.seen += 1;
        let reject = |reason| Rejection { index, text: raw.text.clone(), reason };
        if raw.text.is_empty() {
            return Err(reject(RejectionReason::Empty));
        }
        let (start, end) = match raw.char_range {
            Some((a, b)) => {
                if a >= b || b > self.completion.len() {
                    return Err(reject(RejectionReason::OffsetMismatch));
                }
                if !self.completion.is_char_boundary(a) || !self.completion.is_char_boundary(b) {
                    return Err(reject(RejectionReason::NotCharBoundary));
                }
                if &self.completion[a..b] != raw.text.as_str() {
                    return Err(reject(RejectionReason::OffsetMismatch));
                }
                (a, b)
            }
            None => self.first_unconsumed(&raw.text).ok_or_else(|| reject(RejectionReason::NotFound))?,
        };
        let (tok_a, tok_b) =
            token_cover(self.tokens, start, end).ok_or_else(|| reject(RejectionReason::NoTokens))?;
        self.consumed.insert((start, end));
        Ok(EntitySpan {
            text: raw.text.clone(),
            char_start: start,
            char_end: end,
            token_start: Some(tok_a),
            token_end: Some(tok_b),
            label: raw.label,
            note: raw.note.clone(),
        })
    }

    fn first_unconsumed(&self, needle: &str) -> Option<(usize, usize)> {
        let mut from = 0;
        while let Some(pos) = self.completion[from..].find(needle) {
            let start = from + pos;
            let range = (start, start + needle.len());
            if !self.consumed.contains(&range) {
                return Some(range);
            }
            // advance one character past the match start
            let step = self.completion[start..].chars().next().map_or(1, char::len_utf8);
            from = start + step;
        }
        None
    }
}

/// Inclusive range of tokens whose byte interval intersects `[start, end)`.
fn token_cover(tokens: &[TokenOffset], start: usize, end: usize) -> Option<(usize, usize)> {
    let first = tokens.partition_point(|t| t.end <= start);
    let last = tokens.partition_point(|t| t.start < end);
    (first < last).then(|| (first, last - 1))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AlignReport {
    pub spans: Vec<EntitySpan>,
    pub rejections: Vec<Rejection>,
    /// Aligned spans folded into an earlier span with the same token range.
    pub merged: usize,
}

impl AlignReport {
    pub fn aligned_count(&self) -> usize {
        self.spans.len() + self.merged
    }
}

/// Align a document-ordered list of annotations and merge duplicates.
pub fn align_spans(completion: &str, tokens: &[TokenOffset], raws: &[RawSpan]) -> AlignReport {
    let mut aligner = SpanAligner::new(completion, tokens);
    let mut report = AlignReport::default();
    for raw in raws {
        match aligner.align(raw) {
            Ok(span) => report.spans.push(span),
            Err(rej) => report.rejections.push(rej),
        }
    }
    report.merged = merge_duplicate_spans(&mut report.spans);
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ByteTokenizer, Tokenizer, VerificationLabel};
    use alloc::vec;

    fn words(text: &str) -> Vec<TokenOffset> {
        // whitespace-attached word tokens, to exercise multi-byte tokens
        let mut out = Vec::new();
        let mut start = 0;
        for (i, ch) in text.char_indices() {
            if ch == ' ' && i > start {
                out.push(TokenOffset { id: out.len() as u32, start, end: i });
                start = i;
            }
        }
        out.push(TokenOffset { id: out.len() as u32, start, end: text.len() });
        out
    }

    #[test]
    fn unique_substring_aligns() {
        let text = "born in 2002";
        let toks = words(text);
        let mut al = SpanAligner::new(text, &toks);
        let s = al.align(&RawSpan::new("2002", VerificationLabel::NotSupported)).unwrap();
        assert_eq!((s.char_start, s.char_end), (8, 12));
        assert_eq!(s.token_range(), Some((2, 2)));
    }

    #[test]
    fn absent_text_is_rejected() {
        let text = "Facebook raised money in 2005.";
        let toks = ByteTokenizer.encode(text);
        let mut al = SpanAligner::new(text, &toks);
        let err = al.align(&RawSpan::new("Accel Partners", VerificationLabel::NotSupported)).unwrap_err();
        assert_eq!(err.reason, RejectionReason::NotFound);
    }

    #[test]
    fn repeated_text_consumes_left_to_right() {
        let text = "Paris, Paris";
        let toks = ByteTokenizer.encode(text);
        let raws = vec![
            RawSpan::new("Paris", VerificationLabel::Supported),
            RawSpan::new("Paris", VerificationLabel::NotSupported),
            RawSpan::new("Paris", VerificationLabel::NotSupported),
        ];
        // oracle: scan left to right collecting match starts
        let starts: Vec<usize> = text.match_indices("Paris").map(|(i, _)| i).collect();
        let rep = align_spans(text, &toks, &raws);
        assert_eq!(rep.spans.len(), 2);
        assert_eq!(rep.spans[0].char_start, starts[0]);
        assert_eq!(rep.spans[1].char_start, starts[1]);
        assert_eq!(rep.rejections.len(), 1);
        assert_eq!(rep.aligned_count() + rep.rejections.len(), raws.len());
    }

    #[test]
    fn partial_token_overlap_is_included() {
        let text = "in 2002 ok";
        let toks = words(text); // "in", " 2002", " ok"
        let mut al = SpanAligner::new(text, &toks);
        let s = al.align(&RawSpan::new("02", VerificationLabel::NotSupported)).unwrap();
        assert_eq!(s.token_range(), Some((1, 1)));
        let s = al.align(&RawSpan::new("2002 o", VerificationLabel::NotSupported)).unwrap();
        assert_eq!(s.token_range(), Some((1, 2)));
    }

    #[test]
    fn claimed_offsets_are_checked() {
        let text = "héllo world";
        let toks = ByteTokenizer.encode(text);
        let mut al = SpanAligner::new(text, &toks);
        let mut raw = RawSpan::new("world", VerificationLabel::Supported);
        raw.char_range = Some((7, 12));
        assert!(al.align(&raw).is_ok());
        raw.char_range = Some((6, 11));
        assert_eq!(al.align(&raw).unwrap_err().reason, RejectionReason::OffsetMismatch);
        let mut split = RawSpan::new("x", VerificationLabel::Supported);
        split.char_range = Some((2, 3));
        assert_eq!(al.align(&split).unwrap_err().reason, RejectionReason::NotCharBoundary);
    }

    #[test]
    fn duplicate_ranges_merge_to_hallucinated() {
        let text = "Ada Lovelace";
        let toks = ByteTokenizer.encode(text);
        let mut a = RawSpan::new("Lovelace", VerificationLabel::Supported);
        a.char_range = Some((4, 12));
        let mut b = RawSpan::new("Lovelace", VerificationLabel::InsufficientInformation);
        b.char_range = Some((4, 12));
        let rep = align_spans(text, &toks, &[a, b]);
        assert_eq!(rep.spans.len(), 1);
        assert_eq!(rep.merged, 1);
        assert!(rep.spans[0].label.is_hallucinated());
    }

    #[test]
    fn alignment_is_deterministic() {
        let text = "a b a b a";
        let toks = ByteTokenizer.encode(text);
        let raws = vec![
            RawSpan::new("a", VerificationLabel::Supported),
            RawSpan::new("b", VerificationLabel::NotSupported),
            RawSpan::new("a", VerificationLabel::Supported),
        ];
        assert_eq!(align_spans(text, &toks, &raws), align_spans(text, &toks, &raws));
    }
}
