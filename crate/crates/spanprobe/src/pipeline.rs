//! Glue between the loaded artifacts and the core algorithms.

use std::path::Path;

use rand::seq::SliceRandom;
use spanprobe_core::annotate::{
    annotate_completion, evaluate_pipeline, inject_errors, InjectionConfig, InjectionRecord, Judge, PipelineEval,
};
use spanprobe_core::baselines::{
    cluster_by_entailment, semantic_entropy, span_semantic_entropy, token_perplexity, AnswerExtractor, CachedOracle,
    ContinuationSampler, Identity, ModelSampler, NormalizedMatch,
};
use spanprobe_core::corpus::{ByteTokenizer, LabeledSample, Tokenizer, BOS};
use spanprobe_core::evalproto::{score_spans, Protocol, ScoredSpan, SpanId};
use spanprobe_core::probe::{score_sample, Features};
use spanprobe_core::refmodel::{ModelInput, ModelParams};
use spanprobe_core::seed;
use spanprobe_core::trace::{export_trace, ActivationTrace};

use crate::checkpoint::ProbeCheckpoint;
use crate::error::{Error, Result};
use crate::extract::RegexExtractor;
use crate::fsio;

/// Seeded shuffle, then the first `test_fraction` of samples form the test split.
pub fn split(samples: &[LabeledSample], test_fraction: f64, seed_: u64) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Usage("--test-fraction must lie strictly between 0 and 1".into()));
    }
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    idx.shuffle(&mut seed::named_rng(seed_, seed::stream::SPLIT));
    let n_test = ((samples.len() as f64) * test_fraction).round() as usize;
    let (te, tr) = idx.split_at(n_test);
    let mut tr = tr.to_vec();
    let mut te = te.to_vec();
    tr.sort_unstable();
    te.sort_unstable();
    Ok((tr.iter().map(|&i| samples[i].clone()).collect(), te.iter().map(|&i| samples[i].clone()).collect()))
}

/// Passage `i` is perturbed with child seed `i` of the injection seed.
pub fn inject_all(passages: &[&str], seed_: u64, rate: f64) -> Result<Vec<InjectionRecord>> {
    passages
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let cfg = InjectionConfig { seed: seed::child(seed_, i as u64), rate };
            Ok(inject_errors(p, &cfg)?)
        })
        .collect()
}

/// Ask `judge` about each perturbed passage and score the returned spans.
pub fn judge_records<J: Judge + ?Sized>(records: &[InjectionRecord], judge: &mut J) -> Result<PipelineEval> {
    let mut annotations = Vec::with_capacity(records.len());
    for r in records {
        let parsed = annotate_completion("", &r.perturbed, &mut &mut *judge)?;
        let sample = passage_sample(&r.perturbed);
        let (labeled, _) = spanprobe_core::annotate::attach_annotations(sample, &parsed.spans);
        annotations.push(labeled.spans);
    }
    Ok(evaluate_pipeline(records, &annotations)?)
}

fn passage_sample(text: &str) -> LabeledSample {
    LabeledSample {
        id: String::new(),
        prompt: String::new(),
        completion: text.to_string(),
        tokens: ByteTokenizer.encode(text),
        spans: Vec::new(),
        source_tag: "inject".into(),
        completion_label: None,
    }
}

pub fn export_traces(model: &ModelParams, samples: &[LabeledSample], layer: usize) -> Result<Vec<ActivationTrace>> {
    samples
        .iter()
        .map(|s| Ok(export_trace(model, None, &ModelInput::from_text(&s.prompt, &s.completion), &s.id, layer)?))
        .collect()
}

pub fn score(
    probe: &ProbeCheckpoint,
    features: &Features<'_>,
    samples: &[LabeledSample],
    protocol: Protocol,
    method: &str,
) -> Result<Vec<ScoredSpan>> {
    let mut rows = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        let p = score_sample(&probe.head, probe.adapters.as_ref(), features, i, s)?;
        rows.extend(score_spans(&p, s, protocol, method)?);
    }
    Ok(rows)
}

/// Predictive entropy and chosen-token perplexity, span-max pooled.
pub fn token_baselines(samples: &[LabeledSample], traces: &[ActivationTrace], protocol: Protocol) -> Result<Vec<ScoredSpan>> {
    let mut ent_rows = Vec::new();
    let mut ppl_rows = Vec::new();
    for (s, t) in samples.iter().zip(traces) {
        let ent = t.next_token_entropy.clone();
        let ppl = t.chosen_logprob.iter().map(|&lp| token_perplexity(lp)).collect::<Result<Vec<_>, _>>()?;
        ent_rows.extend(score_spans(&ent, s, protocol, "token_entropy")?);
        ppl_rows.extend(score_spans(&ppl, s, protocol, "token_perplexity")?);
    }
    ent_rows.extend(ppl_rows);
    Ok(ent_rows)
}

/// Semantic entropy per span (or per completion under the reasoning
/// protocol) with the model as sampler and normalized string match as the
/// equivalence judge.
pub fn semantic_baseline(
    model: &ModelParams,
    samples: &[LabeledSample],
    protocol: Protocol,
    k: usize,
    temperature: f64,
    seed_: u64,
) -> Result<Vec<ScoredSpan>> {
    let base = seed::substream(seed_, seed::stream::SAMPLING);
    let mut rows = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        let mut sampler = ModelSampler { params: model, adapters: None, temperature, seed: seed::child(base, i as u64) };
        let mut oracle = CachedOracle::new(NormalizedMatch);
        match protocol {
            Protocol::Reasoning => {
                let label = s
                    .completion_label
                    .ok_or_else(|| Error::Data(format!("sample {} has no completion_label", s.id)))?;
                let x = RegexExtractor::default();
                let cap = s.completion.len().max(4);
                let mut outs = Vec::with_capacity(k);
                for j in 0..k {
                    outs.push(x.extract(&sampler.sample(&s.prompt, cap, j)?));
                }
                let h = semantic_entropy(&cluster_by_entailment(&outs, &mut oracle)?);
                rows.push(ScoredSpan {
                    sample_id: s.id.clone(),
                    span_id: SpanId::Completion,
                    method: "semantic_entropy".into(),
                    score: h,
                    label,
                });
            }
            _ => {
                if protocol == Protocol::ShortForm && s.spans.len() != 1 {
                    return Err(Error::Data(format!("sample {} needs exactly one span under short_form", s.id)));
                }
                for (j, sp) in s.spans.iter().enumerate() {
                    let h = span_semantic_entropy(s, j, &mut sampler, k, &mut oracle, &Identity)?;
                    rows.push(ScoredSpan {
                        sample_id: s.id.clone(),
                        span_id: SpanId::Index(j),
                        method: "semantic_entropy".into(),
                        score: h,
                        label: sp.label.binary(),
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// `(id, prompt)` pairs from JSONL; lines need a `prompt` field and may carry
/// an `id`.
pub fn load_prompts(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fsio::read_string(path)?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| Error::Data(format!("{}:{}: {e}", path.display(), n + 1)))?;
        let prompt = v
            .get("prompt")
            .and_then(|p| p.as_str())
            .ok_or_else(|| Error::Data(format!("{}:{}: missing string field \"prompt\"", path.display(), n + 1)))?;
        let id = v.get("id").and_then(|p| p.as_str()).map(str::to_string).unwrap_or_else(|| format!("prompt-{n}"));
        out.push((id, prompt.to_string()));
    }
    Ok(out)
}

pub fn prompt_tokens(prompt: &str) -> Vec<u32> {
    let mut t = vec![BOS];
    t.extend(ByteTokenizer::ids(prompt));
    t
}
