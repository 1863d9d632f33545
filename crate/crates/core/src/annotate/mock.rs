use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use rand::Rng as _;
use serde_json::{json, Value};

use super::inject::{find_sites, InjectionRecord};
use super::judge::{Judge, JudgeRequest};
use crate::error::Result;
use crate::seed;

fn entry(text: &str, start: usize, end: usize, hallucinated: bool) -> Value {
    json!({
        "text": text,
        "label": if hallucinated { "Not Supported" } else { "Supported" },
        "verification_note": "mock",
        "char_start": start,
        "char_end": end,
    })
}

/// Knows the injected edits: labels every edit hallucinated and every other
/// detected site supported.
#[derive(Debug, Clone, Default)]
pub struct OracleJudge {
    edits: BTreeMap<String, Vec<(usize, usize)>>,
}

impl OracleJudge {
    pub fn new(records: &[InjectionRecord]) -> Self {
        let edits = records
            .iter()
            .map(|r| (r.perturbed.clone(), r.edits.iter().map(|e| (e.start, e.end)).collect()))
            .collect();
        OracleJudge { edits }
    }

    /// Entries as `(start, end, is_edit)`, in passage order.
    fn entries(&self, completion: &str) -> Vec<(usize, usize, bool)> {
        let edits = self.edits.get(completion).cloned().unwrap_or_default();
        let mut out: Vec<(usize, usize, bool)> = edits.iter().map(|&(a, b)| (a, b, true)).collect();
        for s in find_sites(completion) {
            if !edits.iter().any(|&(a, b)| s.start < b && a < s.end) {
                out.push((s.start, s.end, false));
            }
        }
        out.sort_unstable();
        out
    }
}

impl Judge for OracleJudge {
    fn judge(&mut self, req: &JudgeRequest) -> Result<String> {
        let arr: Vec<Value> = self
            .entries(&req.completion)
            .into_iter()
            .map(|(a, b, hal)| entry(&req.completion[a..b], a, b, hal))
            .collect();
        Ok(Value::Array(arr).to_string())
    }
}

/// The oracle judge with each label flipped independently with probability
/// `rate`. Flip counts are kept so tests can predict recall and FPR.
#[derive(Debug)]
pub struct FlipJudge {
    oracle: OracleJudge,
    rng: seed::Rng,
    rate: f64,
    pub flipped_edits: usize,
    pub flipped_clean: usize,
}

impl FlipJudge {
    pub fn new(records: &[InjectionRecord], seed: u64, rate: f64) -> Self {
        FlipJudge {
            oracle: OracleJudge::new(records),
            rng: seed::named_rng(seed, "flip-judge"),
            rate,
            flipped_edits: 0,
            flipped_clean: 0,
        }
    }
}

impl Judge for FlipJudge {
    fn judge(&mut self, req: &JudgeRequest) -> Result<String> {
        let mut arr = Vec::new();
        for (a, b, is_edit) in self.oracle.entries(&req.completion) {
            let flip = self.rng.random_bool(self.rate);
            if flip {
                if is_edit {
                    self.flipped_edits += 1;
                } else {
                    self.flipped_clean += 1;
                }
            }
            arr.push(entry(&req.completion[a..b], a, b, is_edit != flip));
        }
        Ok(Value::Array(arr).to_string())
    }
}

/// Returns entities absent from the completion, wrong offsets, unknown
/// labels and malformed entries, alongside whatever `inner` reports.
#[derive(Debug, Default)]
pub struct AdversarialJudge<J> {
    pub inner: J,
}

impl<J: Judge> Judge for AdversarialJudge<J> {
    fn judge(&mut self, req: &JudgeRequest) -> Result<String> {
        let inner = self.inner.judge(req)?;
        let mut arr = match serde_json::from_str::<Value>(&inner) {
            Ok(Value::Array(a)) => a,
            _ => Vec::new(),
        };
        let n = req.completion.len();
        arr.push(json!({"text": "Accel Partners", "label": "Not Supported", "verification_note": "invented"}));
        arr.push(json!({"text": req.completion.get(..1).unwrap_or(""), "label": "Maybe"}));
        arr.push(json!({"label": "Supported"}));
        arr.push(json!({"text": "zzqx-never", "label": "Supported", "char_start": 0, "char_end": n.min(10)}));
        Ok(Value::Array(arr).to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::super::{annotate_completion, attach_annotations, evaluate_pipeline, inject_errors, InjectionConfig};
    use super::*;
    use crate::corpus::{ByteTokenizer, LabeledSample, Tokenizer};

    const PASSAGES: &[&str] = &[
        "In 1887 the engineer Gustave built a tower of 300 metres in Paris for 6 years.",
        "The river Danube flows through Vienna and Budapest, passing 10 countries since 1920.",
        "Her novel was published in 1962 by Penguin and sold 40 thousand copies in London.",
        "Composer Ravel wrote Bolero in 1928 for the dancer Ida, who premiered it in Paris.",
    ];

    fn run<J: Judge>(judge: &mut J, records: &[InjectionRecord]) -> Vec<Vec<crate::corpus::EntitySpan>> {
        records
            .iter()
            .map(|r| {
                let parsed = annotate_completion("Write a passage.", &r.perturbed, judge).unwrap();
                let sample = LabeledSample {
                    id: String::new(),
                    prompt: String::new(),
                    completion: r.perturbed.clone(),
                    tokens: ByteTokenizer.encode(&r.perturbed),
                    spans: Vec::new(),
                    source_tag: String::new(),
                    completion_label: None,
                };
                attach_annotations(sample, &parsed.spans).0.spans
            })
            .collect()
    }

    fn records() -> Vec<InjectionRecord> {
        PASSAGES
            .iter()
            .enumerate()
            .map(|(i, p)| inject_errors(p, &InjectionConfig { seed: i as u64, rate: 0.15 }).unwrap())
            .collect()
    }

    #[test]
    fn oracle_judge_is_perfect() {
        let recs = records();
        let spans = run(&mut OracleJudge::new(&recs), &recs);
        let ev = evaluate_pipeline(&recs, &spans).unwrap();
        assert_eq!(ev.recall, Some(1.0));
        assert_eq!(ev.fpr, Some(0.0));
    }

    #[test]
    fn flip_judge_matches_flip_counts() {
        let recs = records();
        let mut judge = FlipJudge::new(&recs, 3, 0.2);
        let spans = run(&mut judge, &recs);
        let ev = evaluate_pipeline(&recs, &spans).unwrap();
        assert_eq!(ev.edits_detected, ev.edits_total - judge.flipped_edits);
        assert_eq!(ev.clean_flagged, judge.flipped_clean);
        assert!(judge.flipped_edits + judge.flipped_clean > 0);
    }

    #[test]
    fn adversarial_entries_never_attach() {
        let recs = records();
        let honest = run(&mut OracleJudge::new(&recs), &recs);
        let hostile = run(&mut AdversarialJudge { inner: OracleJudge::new(&recs) }, &recs);
        assert_eq!(honest, hostile);
    }
}
