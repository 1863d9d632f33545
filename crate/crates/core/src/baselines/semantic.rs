use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::ControlFlow;

use crate::corpus::{ByteTokenizer, LabeledSample, BOS, EOS};
use crate::error::{invalid, Error, Result};
use crate::math;
use crate::refmodel::{generate, AdapterSet, GenerateConfig, ModelParams};
use crate::seed;

pub const DEFAULT_K: usize = 10;

/// Directed entailment judgment `u ⊨ v`.
pub trait EntailmentOracle {
    fn entails(&mut self, u: &str, v: &str) -> Result<bool>;
}

impl<O: EntailmentOracle + ?Sized> EntailmentOracle for &mut O {
    fn entails(&mut self, u: &str, v: &str) -> Result<bool> {
        (**self).entails(u, v)
    }
}

/// Entails iff the strings are byte-identical.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactMatch;

impl EntailmentOracle for ExactMatch {
    fn entails(&mut self, u: &str, v: &str) -> Result<bool> {
        Ok(u == v)
    }
}

/// Entails iff the strings agree after lowercasing, dropping punctuation
/// and collapsing whitespace.
#[derive(Debug, Clone, Copy, Default)]
pub struct NormalizedMatch;

impl NormalizedMatch {
    pub fn normalize(s: &str) -> String {
        let mut out = String::with_capacity(s.len());
        for word in s.split_whitespace() {
            let w: String = word.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect();
            if w.is_empty() {
                continue;
            }
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(&w);
        }
        out
    }
}

impl EntailmentOracle for NormalizedMatch {
    fn entails(&mut self, u: &str, v: &str) -> Result<bool> {
        Ok(Self::normalize(u) == Self::normalize(v))
    }
}

/// Memoizes judgments by ordered pair and counts calls reaching the inner
/// oracle.
#[derive(Debug)]
pub struct CachedOracle<O> {
    inner: O,
    cache: BTreeMap<(String, String), bool>,
    calls: usize,
}

impl<O: EntailmentOracle> CachedOracle<O> {
    pub fn new(inner: O) -> Self {
        CachedOracle { inner, cache: BTreeMap::new(), calls: 0 }
    }

    pub fn calls(&self) -> usize {
        self.calls
    }

    pub fn into_inner(self) -> O {
        self.inner
    }
}

impl<O: EntailmentOracle> EntailmentOracle for CachedOracle<O> {
    fn entails(&mut self, u: &str, v: &str) -> Result<bool> {
        let key = (String::from(u), String::from(v));
        if let Some(&hit) = self.cache.get(&key) {
            return Ok(hit);
        }
        self.calls += 1;
        let out = self.inner.entails(u, v)?;
        self.cache.insert(key, out);
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticClustering {
    pub k: usize,
    /// Cluster of each sample; clusters are numbered by first appearance.
    pub assignment: Vec<usize>,
    pub sizes: Vec<usize>,
    /// Unordered pairs that needed a bidirectional judgment.
    pub pair_judgments: usize,
}

impl SemanticClustering {
    pub fn probs(&self) -> Vec<f64> {
        self.sizes.iter().map(|&s| s as f64 / self.k as f64).collect()
    }

    pub fn n_clusters(&self) -> usize {
        self.sizes.len()
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Connected components of the bidirectional-entailment graph. Identical
/// strings are joined without consulting the oracle, and pairs already in
/// one component are skipped.
pub fn cluster_by_entailment<O: EntailmentOracle>(samples: &[String], oracle: &mut O) -> Result<SemanticClustering> {
    let k = samples.len();
    if k == 0 {
        return Err(invalid("clustering needs at least one sample"));
    }
    let mut uf = UnionFind((0..k).collect());
    let mut first: BTreeMap<&str, usize> = BTreeMap::new();
    let mut reps = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        match first.get(s.as_str()) {
            Some(&j) => uf.union(i, j),
            None => {
                first.insert(s, i);
                reps.push(i);
            }
        }
    }
    let mut pair_judgments = 0;
    for (a, &i) in reps.iter().enumerate() {
        for &j in &reps[a + 1..] {
            if uf.find(i) == uf.find(j) {
                continue;
            }
            pair_judgments += 1;
            let (u, v) = (samples[i].as_str(), samples[j].as_str());
            let wrap = |e: Error| Error::External(alloc::format!("entailment oracle failed on ({u:?}, {v:?}): {e}"));
            if oracle.entails(u, v).map_err(wrap)? && oracle.entails(v, u).map_err(wrap)? {
                uf.union(i, j);
            }
        }
    }
    let mut ids: BTreeMap<usize, usize> = BTreeMap::new();
    let mut sizes = Vec::new();
    let mut assignment = Vec::with_capacity(k);
    for i in 0..k {
        let root = uf.find(i);
        let next = ids.len();
        let c = *ids.entry(root).or_insert(next);
        if c == sizes.len() {
            sizes.push(0);
        }
        sizes[c] += 1;
        assignment.push(c);
    }
    Ok(SemanticClustering { k, assignment, sizes, pair_judgments })
}

pub fn semantic_entropy(clustering: &SemanticClustering) -> f64 {
    let h: f64 = clustering
        .probs()
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * math::ln(p))
        .sum();
    h.max(0.0)
}

/// Produces the `index`-th continuation of `prefix`, at most `max_tokens`
/// tokens long.
pub trait ContinuationSampler {
    fn sample(&mut self, prefix: &str, max_tokens: usize, index: usize) -> Result<String>;
}

/// Reduces a free-form continuation to the part that is compared, such as
/// a final numeric answer.
pub trait AnswerExtractor {
    fn extract(&self, text: &str) -> String;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl AnswerExtractor for Identity {
    fn extract(&self, text: &str) -> String {
        String::from(text)
    }
}

/// Samples continuations from the reference model. Continuation `i` uses
/// its own child seed, so the set is reproducible and order-free.
pub struct ModelSampler<'a> {
    pub params: &'a ModelParams,
    pub adapters: Option<&'a AdapterSet>,
    pub temperature: f64,
    pub seed: u64,
}

impl ContinuationSampler for ModelSampler<'_> {
    fn sample(&mut self, prefix: &str, max_tokens: usize, index: usize) -> Result<String> {
        let mut prompt = alloc::vec![BOS];
        prompt.extend(ByteTokenizer::ids(prefix));
        let room = self.params.config.max_seq_len.saturating_sub(prompt.len());
        let cfg = GenerateConfig {
            max_new: max_tokens.min(room),
            temperature: self.temperature,
            seed: seed::child(self.seed, index as u64),
            probe_layer: None,
        };
        if cfg.max_new == 0 {
            return Err(invalid("prefix leaves no room for a continuation"));
        }
        let g = generate(self.params, self.adapters, &prompt, &cfg, |_| ControlFlow::Continue(()))?;
        let body: Vec<u32> = g.tokens.into_iter().filter(|&t| t != EOS).collect();
        Ok(ByteTokenizer::decode(&body))
    }
}

/// Semantic entropy of `k` resamplings of one span. Continuations start at
/// the completion prefix before the span and are capped at twice the span's
/// token length (at least 4 tokens).
pub fn span_semantic_entropy<S: ContinuationSampler, O: EntailmentOracle, X: AnswerExtractor>(
    sample: &LabeledSample,
    span: usize,
    sampler: &mut S,
    k: usize,
    oracle: &mut O,
    extractor: &X,
) -> Result<f64> {
    if k == 0 {
        return Err(invalid("k must be positive"));
    }
    let s = sample
        .spans
        .get(span)
        .ok_or_else(|| invalid(alloc::format!("sample {} has no span {span}", sample.id)))?;
    let (a, b) = s
        .token_range()
        .ok_or_else(|| invalid(alloc::format!("sample {} span {span} is unaligned", sample.id)))?;
    let cap = (2 * (b - a + 1)).max(4);
    let mut prefix = sample.prompt.clone();
    prefix.push_str(&sample.completion[..s.char_start]);
    let mut outs = Vec::with_capacity(k);
    for i in 0..k {
        let text = sampler
            .sample(&prefix, cap, i)
            .map_err(|e| Error::External(alloc::format!("continuation {i} of {}: {e}", sample.id)))?;
        outs.push(extractor.extract(&text));
    }
    Ok(semantic_entropy(&cluster_by_entailment(&outs, oracle)?))
}
