//! Dataset JSONL: one sample per line. Token offsets are recomputed on load
//! and never stored.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use spanprobe_core::corpus::{
    merge_duplicate_spans, ByteTokenizer, LabeledSample, RawSpan, Rejection, SpanAligner, Tokenizer, VerificationLabel,
};

use crate::error::{Error, Result};
use crate::fsio;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanRecord {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub char_start: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub char_end: Option<usize>,
    pub label: String,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    #[serde(default)]
    pub prompt: String,
    pub completion: String,
    #[serde(default)]
    pub source_tag: String,
    #[serde(default)]
    pub completion_label: Option<u8>,
    #[serde(default)]
    pub spans: Vec<SpanRecord>,
}

impl From<&LabeledSample> for SampleRecord {
    fn from(s: &LabeledSample) -> Self {
        SampleRecord {
            id: s.id.clone(),
            prompt: s.prompt.clone(),
            completion: s.completion.clone(),
            source_tag: s.source_tag.clone(),
            completion_label: s.completion_label,
            spans: s
                .spans
                .iter()
                .map(|sp| SpanRecord {
                    text: sp.text.clone(),
                    char_start: Some(sp.char_start),
                    char_end: Some(sp.char_end),
                    label: sp.label.as_str().into(),
                    note: sp.note.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineIssue {
    pub line: usize,
    pub id: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RejectedSpan {
    pub line: usize,
    pub sample_id: String,
    pub span_index: usize,
    pub text: String,
    pub reason: String,
}

impl RejectedSpan {
    fn new(line: usize, id: &str, r: &Rejection) -> Self {
        RejectedSpan {
            line,
            sample_id: id.into(),
            span_index: r.index,
            text: r.text.clone(),
            reason: format!("{:?}", r.reason),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct LoadReport {
    #[serde(skip)]
    pub samples: Vec<LabeledSample>,
    pub n_samples: usize,
    pub n_spans: usize,
    pub issues: Vec<LineIssue>,
    pub rejected: Vec<RejectedSpan>,
    pub merged: usize,
}

impl LoadReport {
    fn summary(&self) -> String {
        let mut lines: Vec<String> = self
            .issues
            .iter()
            .map(|i| format!("line {}: {}", i.line, i.message))
            .chain(self.rejected.iter().map(|r| {
                format!("line {}: span {} {:?} rejected ({})", r.line, r.span_index, r.text, r.reason)
            }))
            .collect();
        if lines.len() > 20 {
            let more = lines.len() - 20;
            lines.truncate(20);
            lines.push(format!("... and {more} more"));
        }
        lines.join("\n")
    }
}

fn parse_line(line: usize, text: &str, report: &mut LoadReport, seen: &mut HashSet<String>) -> Option<LabeledSample> {
    let issue = |message: String, id: Option<&str>| LineIssue { line, id: id.map(Into::into), message };
    let rec: SampleRecord = match serde_json::from_str(text) {
        Ok(r) => r,
        Err(e) => {
            report.issues.push(issue(format!("invalid record: {e}"), None));
            return None;
        }
    };
    if !seen.insert(rec.id.clone()) {
        report.issues.push(issue(format!("duplicate id {:?}", rec.id), Some(&rec.id)));
        return None;
    }
    if rec.completion_label.is_some_and(|l| l > 1) {
        report.issues.push(issue("completion_label must be 0, 1 or null".into(), Some(&rec.id)));
        return None;
    }
    let mut raws = Vec::with_capacity(rec.spans.len());
    for (k, sp) in rec.spans.iter().enumerate() {
        let Some(label) = VerificationLabel::parse(&sp.label) else {
            report.issues.push(issue(format!("span {k}: unknown label {:?}", sp.label), Some(&rec.id)));
            return None;
        };
        let char_range = match (sp.char_start, sp.char_end) {
            (Some(a), Some(b)) => Some((a, b)),
            (None, None) => None,
            _ => {
                report.issues.push(issue(format!("span {k}: char_start and char_end come together"), Some(&rec.id)));
                return None;
            }
        };
        raws.push(RawSpan { text: sp.text.clone(), label, note: sp.note.clone(), char_range });
    }
    let tokens = ByteTokenizer.encode(&rec.completion);
    let mut aligner = SpanAligner::new(&rec.completion, &tokens);
    let mut spans = Vec::with_capacity(raws.len());
    for raw in &raws {
        match aligner.align(raw) {
            Ok(s) => spans.push(s),
            Err(r) => report.rejected.push(RejectedSpan::new(line, &rec.id, &r)),
        }
    }
    report.merged += merge_duplicate_spans(&mut spans);
    report.n_spans += spans.len();
    Some(LabeledSample {
        id: rec.id,
        prompt: rec.prompt,
        completion: rec.completion,
        tokens,
        spans,
        source_tag: rec.source_tag,
        completion_label: rec.completion_label,
    })
}

/// Parse every line, collecting issues instead of stopping at the first.
/// Spans that fail alignment are dropped and listed in `rejected`.
pub fn parse_dataset(text: &str) -> LoadReport {
    let mut report = LoadReport::default();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(s) = parse_line(i + 1, line, &mut report, &mut seen) {
            report.samples.push(s);
        }
    }
    report.n_samples = report.samples.len();
    report
}

/// Lenient load: malformed records are reported, rejected spans dropped.
pub fn load_dataset_report(path: &Path) -> Result<LoadReport> {
    Ok(parse_dataset(&fsio::read_string(path)?))
}

/// Strict load: any malformed record or unalignable span is a data error
/// listing the offending lines.
pub fn load_dataset(path: &Path) -> Result<Vec<LabeledSample>> {
    let report = load_dataset_report(path)?;
    if !report.issues.is_empty() || !report.rejected.is_empty() {
        return Err(Error::Data(format!("{}:\n{}", path.display(), report.summary())));
    }
    if report.samples.is_empty() {
        return Err(Error::Data(format!("{}: no samples", path.display())));
    }
    Ok(report.samples)
}

pub fn dataset_to_string(samples: &[LabeledSample]) -> String {
    let mut out = String::new();
    for s in samples {
        out.push_str(&serde_json::to_string(&SampleRecord::from(s)).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn save_dataset(samples: &[LabeledSample], path: &Path) -> Result<()> {
    fsio::write_atomic(path, dataset_to_string(samples).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_identity() {
        let text = concat!(
            r#"{"id":"a","prompt":"Q","completion":"born in 2002","source_tag":"t","completion_label":null,"spans":[{"text":"2002","char_start":8,"char_end":12,"label":"not_supported","note":"n"}]}"#,
            "\n",
            r#"{"id":"b","prompt":"","completion":"ok","source_tag":"","completion_label":1,"spans":[]}"#,
            "\n"
        );
        let rep = parse_dataset(text);
        assert!(rep.issues.is_empty() && rep.rejected.is_empty());
        assert_eq!(rep.samples[0].spans[0].token_range(), Some((8, 11)));
        assert_eq!(dataset_to_string(&rep.samples), text);
    }

    #[test]
    fn issues_carry_line_numbers() {
        let text = "{\"id\":\"a\",\"completion\":\"x\"}\n\nnot json\n{\"id\":\"a\",\"completion\":\"y\"}\n{\"id\":\"c\",\"completion\":\"z\",\"spans\":[{\"text\":\"z\",\"label\":\"Maybe\"}]}\n";
        let rep = parse_dataset(text);
        let lines: Vec<usize> = rep.issues.iter().map(|i| i.line).collect();
        assert_eq!(lines, [3, 4, 5]);
        assert_eq!(rep.samples.len(), 1);
    }

    #[test]
    fn missing_offsets_align_by_search() {
        let text = r#"{"id":"p","completion":"Paris, Paris","spans":[{"text":"Paris","label":"supported"},{"text":"Paris","label":"not_supported"},{"text":"Lyon","label":"supported"}]}"#;
        let rep = parse_dataset(text);
        let s = &rep.samples[0];
        assert_eq!((s.spans[0].char_start, s.spans[1].char_start), (0, 7));
        assert_eq!(rep.rejected.len(), 1);
        assert_eq!(rep.rejected[0].text, "Lyon");
    }
}
