use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::{align_spans, AlignReport, LabeledSample, RawSpan, VerificationLabel};
use crate::error::{invalid, Error, Result};

/// System prompt sent to the judge. `{instruction}` and `{completion}` are
/// substituted once each.
pub const JUDGE_TEMPLATE: &str = r#"You are a fact-checker. Your task is to fact-check a model's completion to some given
instruction.

Here's the instruction:
<instruction>{instruction}</instruction>

Here's the completion you'll have to fact-check:
<completion>{completion}</completion>

Focus on verifying:
- People (names, affiliations)
- Organizations
- Locations
- Dates and events
- Specific quantities/statistics
- Citations and references

For each entity:
1. Extract the minimal text span (just the entity itself, not surrounding context)
2. Use web search to verify if it's real
3. Label as:
   - "Supported": Verified as correct
   - "Not Supported": Appears to be fabricated or incorrect
   - "Insufficient Information": Cannot verify with available information

Guidelines:
- An entity is correct not only if it is real and it exists (i.e. it isn't fabricated)
but also if it's correct in the context of the sentence and the instruction
- We're interested, not in spotting errors due to small technicalities, but rather in
finding things that the model has clearly bullshitted
- Be skeptical and cautious about highly specific or obscure claims: if you cannot
recall the fact with confidence from your own knowledge or the sources, do not guess;
use "Insufficient Information."
- The extracted span should contain only the specific name, number, citation, etc.
Please do not include anything else within the sentence in the extracted spans
- The spans you extract (the "text" field) should match word-for-word with the original
span in the completion.

Return the output strictly as a JSON array of objects (ordered by the index in which
they appear in the text) following this schema:
```json
[
  {
    "text": "The minimal span containing just the entity (e.g., 'Sarah Chen',
    not 'Dr. Sarah Chen from MIT')",
    "label": "Whether the entity/fact is verified as real, fabricated, or unverifiable",
    "verification_note": "Brief explanation of the verification result"
  },
  ...
]
```"#;

pub fn render_system_prompt(instruction: &str, completion: &str) -> String {
    // Substitute in one pass so braces inside the instruction are left alone.
    let (head, rest) = JUDGE_TEMPLATE.split_once("{instruction}").expect("template slot");
    let (mid, tail) = rest.split_once("{completion}").expect("template slot");
    let mut out = String::with_capacity(JUDGE_TEMPLATE.len() + instruction.len() + completion.len());
    out.push_str(head);
    out.push_str(instruction);
    out.push_str(mid);
    out.push_str(completion);
    out.push_str(tail);
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeRequest {
    pub system_prompt: String,
    pub instruction: String,
    pub completion: String,
}

impl JudgeRequest {
    pub fn new(instruction: &str, completion: &str) -> Self {
        JudgeRequest {
            system_prompt: render_system_prompt(instruction, completion),
            instruction: instruction.into(),
            completion: completion.into(),
        }
    }
}

/// Anything that answers a [`JudgeRequest`] with a raw payload.
pub trait Judge {
    fn judge(&mut self, request: &JudgeRequest) -> Result<String>;
}

impl<J: Judge + ?Sized> Judge for &mut J {
    fn judge(&mut self, request: &JudgeRequest) -> Result<String> {
        (**self).judge(request)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParsedJudgment {
    pub spans: Vec<RawSpan>,
    /// Entries that were not objects or lacked a string `text`/`label`.
    pub malformed: usize,
    /// Entries whose label is not one of the three verification labels.
    pub unknown_label: usize,
}

impl ParsedJudgment {
    pub fn dropped(&self) -> usize {
        self.malformed + self.unknown_label
    }
}

fn strip_fence(payload: &str) -> &str {
    let t = payload.trim();
    let Some(body) = t.strip_prefix("```") else { return t };
    let body = body.strip_prefix("json").unwrap_or(body);
    body.strip_suffix("```").unwrap_or(body).trim()
}

/// Parse a judge payload. A payload that is not a JSON array is an error;
/// bad entries inside the array are dropped and counted.
///
/// Besides the three documented fields, an entry may carry integer
/// `char_start`/`char_end` byte offsets; they are verified at alignment.
pub fn parse_judge_response(payload: &str) -> Result<ParsedJudgment> {
    let value: Value = serde_json::from_str(strip_fence(payload))
        .map_err(|e| Error::External(alloc::format!("judge payload is not JSON: {e}")))?;
    let Value::Array(entries) = value else {
        return Err(Error::External("judge payload is not a JSON array".into()));
    };
    let mut out = ParsedJudgment::default();
    for entry in entries {
        let Value::Object(obj) = entry else {
            out.malformed += 1;
            continue;
        };
        let (Some(text), Some(label)) = (obj.get("text").and_then(Value::as_str), obj.get("label").and_then(Value::as_str))
        else {
            out.malformed += 1;
            continue;
        };
        let Some(label) = VerificationLabel::parse(label) else {
            out.unknown_label += 1;
            continue;
        };
        let note = obj.get("verification_note").and_then(Value::as_str).unwrap_or("");
        let start = obj.get("char_start").and_then(Value::as_u64);
        let end = obj.get("char_end").and_then(Value::as_u64);
        out.spans.push(RawSpan {
            text: text.into(),
            label,
            note: note.into(),
            char_range: start.zip(end).map(|(a, b)| (a as usize, b as usize)),
        });
    }
    Ok(out)
}

pub fn annotate_completion<J: Judge>(instruction: &str, completion: &str, judge: &mut J) -> Result<ParsedJudgment> {
    if completion.is_empty() {
        return Err(invalid("cannot annotate an empty completion"));
    }
    let payload = judge.judge(&JudgeRequest::new(instruction, completion))?;
    parse_judge_response(&payload)
}

/// Attach raw annotations to a tokenized sample through the exact-match
/// aligner. Existing spans are replaced.
pub fn attach_annotations(mut sample: LabeledSample, raws: &[RawSpan]) -> (LabeledSample, AlignReport) {
    let report = align_spans(&sample.completion, &sample.tokens, raws);
    sample.spans = report.spans.clone();
    (sample, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ByteTokenizer, RejectionReason, Tokenizer};

    #[test]
    fn prompt_substitution_is_literal() {
        let p = render_system_prompt("say {completion}", "x");
        assert!(p.contains("<instruction>say {completion}</instruction>"));
        assert!(p.contains("<completion>x</completion>"));
        assert!(p.starts_with("You are a fact-checker."));
    }

    #[test]
    fn parse_drops_and_counts() {
        let payload = r#"```json
[{"text":"Paris","label":"Supported","verification_note":"ok"},
 {"text":"1999","label":"Maybe"},
 {"label":"Not Supported"},
 7,
 {"text":"Bob","label":"Not Supported"}]
```"#;
        let p = parse_judge_response(payload).unwrap();
        assert_eq!(p.spans.len(), 2);
        assert_eq!(p.unknown_label, 1);
        assert_eq!(p.malformed, 2);
        assert_eq!(p.spans[1].label, VerificationLabel::NotSupported);
        assert!(parse_judge_response("not json").is_err());
        assert!(parse_judge_response("{}").is_err());
    }

    fn blank(completion: &str) -> LabeledSample {
        LabeledSample {
            id: "a".into(),
            prompt: String::new(),
            completion: completion.into(),
            tokens: ByteTokenizer.encode(completion),
            spans: Vec::new(),
            source_tag: String::new(),
            completion_label: None,
        }
    }

    #[test]
    fn safeguard_rejects_unmatched_text() {
        let raws = [
            RawSpan::new("Accel Partners", VerificationLabel::NotSupported),
            RawSpan::new("Sequoia", VerificationLabel::Supported),
        ];
        let (s, rep) = attach_annotations(blank("Funded by Sequoia in 2004."), &raws);
        assert_eq!(s.spans.len(), 1);
        assert_eq!(rep.rejections.len(), 1);
        assert_eq!(rep.rejections[0].reason, RejectionReason::NotFound);
        assert_eq!((s.spans[0].char_start, s.spans[0].char_end), (10, 17));
    }
}
