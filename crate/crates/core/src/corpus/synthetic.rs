//! Seeded toy corpus with a planted, token-visible hallucination signal.
//!
//! Entities are names, places and counts. Supported entities are built from
//! a restricted alphabet; hallucinated ones always contain a marker byte
//! (`x`, `z`, `8` or `9`) that never occurs in background text. A probe that
//! learns to fire on marker tokens separates the classes under span-max
//! scoring, which makes the corpus a fixed target for end-to-end runs.

use alloc::string::String;
use alloc::vec::Vec;
use rand::Rng as _;

use super::align::SpanAligner;
use super::tokenizer::{ByteTokenizer, Tokenizer};
use super::types::{LabeledSample, RawSpan, VerificationLabel};
use crate::seed::{self, Rng};

pub const MARKER_BYTES: &[u8] = b"xz89";

const CONSONANTS: &[u8] = b"bdfglmnprst";
const VOWELS: &[u8] = b"aeiou";
const MARKER_LETTERS: &[u8] = b"xz";
const CLEAN_DIGITS: &[u8] = b"123456";
const MARKER_DIGITS: &[u8] = b"89";

#[derive(Debug, Clone, Copy)]
pub struct SyntheticConfig {
    pub n_samples: usize,
    /// Probability that an entity is hallucinated.
    pub hallucination_rate: f64,
    /// Share of hallucinated entities labeled insufficient_information.
    pub insufficient_share: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig { n_samples: 200, hallucination_rate: 0.35, insufficient_share: 0.25, seed: 0 }
    }
}

#[derive(Clone, Copy)]
enum Kind {
    Name,
    Place,
    Count,
}

fn word(rng: &mut Rng, syllables: usize, marker: bool) -> String {
    let mut bytes = Vec::with_capacity(syllables * 2);
    let marker_at = rng.random_range(0..syllables);
    for s in 0..syllables {
        let c = if marker && s == marker_at {
            MARKER_LETTERS[rng.random_range(0..MARKER_LETTERS.len())]
        } else {
            CONSONANTS[rng.random_range(0..CONSONANTS.len())]
        };
        bytes.push(c);
        bytes.push(VOWELS[rng.random_range(0..VOWELS.len())]);
    }
    bytes[0] = bytes[0].to_ascii_uppercase();
    String::from_utf8(bytes).expect("ascii")
}

fn count(rng: &mut Rng, marker: bool) -> String {
    let len = rng.random_range(2..=3);
    let marker_at = rng.random_range(0..len);
    (0..len)
        .map(|i| {
            let pool = if marker && i == marker_at { MARKER_DIGITS } else { CLEAN_DIGITS };
            pool[rng.random_range(0..pool.len())] as char
        })
        .collect()
}

struct Builder<'r> {
    rng: &'r mut Rng,
    cfg: SyntheticConfig,
    text: String,
    spans: Vec<RawSpan>,
}

impl Builder<'_> {
    fn lit(&mut self, s: &str) {
        self.text.push_str(s);
    }

    fn entity(&mut self, kind: Kind) -> String {
        let hallucinated = self.rng.random_bool(self.cfg.hallucination_rate);
        let text = match kind {
            Kind::Name => {
                let first = word(self.rng, 2, false);
                let last = word(self.rng, 2, hallucinated);
                alloc::format!("{first} {last}")
            }
            Kind::Place => {
                let n = self.rng.random_range(2..=3);
                word(self.rng, n, hallucinated)
            }
            Kind::Count => count(self.rng, hallucinated),
        };
        let label = if !hallucinated {
            VerificationLabel::Supported
        } else if self.rng.random_bool(self.cfg.insufficient_share) {
            VerificationLabel::InsufficientInformation
        } else {
            VerificationLabel::NotSupported
        };
        let start = self.text.len();
        self.text.push_str(&text);
        let mut raw = RawSpan::new(text.clone(), label);
        raw.char_range = Some((start, self.text.len()));
        self.spans.push(raw);
        text
    }
}

/// Generate `cfg.n_samples` aligned samples.
pub fn generate(cfg: &SyntheticConfig) -> Vec<LabeledSample> {
    let mut rng = seed::named_rng(cfg.seed, "synthetic");
    (0..cfg.n_samples).map(|i| one(&mut rng, *cfg, i)).collect()
}

fn one(rng: &mut Rng, cfg: SyntheticConfig, index: usize) -> LabeledSample {
    let pronoun = ["She", "He", "They"][rng.random_range(0..3)];
    let template = rng.random_range(0..3);
    let mut b = Builder { rng, cfg, text: String::new(), spans: Vec::new() };
    let subject;
    match template {
        0 => {
            subject = b.entity(Kind::Name);
            b.lit(" was born in ");
            b.entity(Kind::Place);
            b.lit(" in the spring of ");
            b.entity(Kind::Count);
            b.lit(". ");
            b.lit(pronoun);
            b.lit(" later studied with ");
            b.entity(Kind::Name);
            b.lit(" and published ");
            b.entity(Kind::Count);
            b.lit(" essays.");
        }
        1 => {
            subject = b.entity(Kind::Name);
            b.lit(" founded a school in ");
            b.entity(Kind::Place);
            b.lit(" with ");
            b.entity(Kind::Count);
            b.lit(" students. After ");
            b.entity(Kind::Count);
            b.lit(" terms ");
            b.lit(&pronoun.to_ascii_lowercase());
            b.lit(" met ");
            b.entity(Kind::Name);
            b.lit(" in ");
            b.entity(Kind::Place);
            b.lit(".");
        }
        _ => {
            b.lit("In ");
            b.entity(Kind::Place);
            b.lit(", ");
            subject = b.entity(Kind::Name);
            b.lit(" wrote ");
            b.entity(Kind::Count);
            b.lit(" essays on the history of ");
            b.entity(Kind::Place);
            b.lit(". ");
            b.lit(pronoun);
            b.lit(" taught alongside ");
            b.entity(Kind::Name);
            b.lit(".");
        }
    }
    let Builder { text: completion, spans: raws, .. } = b;
    let tokens = ByteTokenizer.encode(&completion);
    let mut aligner = SpanAligner::new(&completion, &tokens);
    let spans = raws.iter().map(|r| aligner.align(r).expect("offsets built in place")).collect();
    LabeledSample {
        id: alloc::format!("toy-{index:04}"),
        prompt: alloc::format!("Write a short biography of {subject}."),
        completion,
        tokens,
        spans,
        source_tag: "synthetic".into(),
        completion_label: None,
    }
}


#[derive(Debug, Clone, Copy)]
pub struct PlantedConfig {
    pub n_samples: usize,
    pub tokens_per_sample: usize,
    pub d: usize,
    /// Signal strength along the planted direction.
    pub shift: f64,
    pub positive_rate: f64,
    /// Draws labels and noise.
    pub seed: u64,
    /// Draws `v`; share it between train and test sets.
    pub direction_seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig { n_samples: 100, tokens_per_sample: 20, d: 16, shift: 3.0, positive_rate: 0.5, seed: 0, direction_seed: 0 }
    }
}

/// Samples whose every token is its own one-token span, paired with traces
/// `h_i = ε_i + y_i·shift·v`, `ε_i ~ N(0, I)`, `v` a fixed unit vector.
/// Returns the samples, the traces and `v`.
pub fn planted_traces(cfg: &PlantedConfig) -> (Vec<LabeledSample>, Vec<crate::trace::ActivationTrace>, Vec<f64>) {
    use rand_distr::StandardNormal;
    let mut dir_rng = seed::named_rng(cfg.direction_seed, "planted-direction");
    let raw: Vec<f64> = (0..cfg.d).map(|_| dir_rng.sample(StandardNormal)).collect();
    let mut rng = seed::named_rng(cfg.seed, "planted");
    let norm = crate::math::sqrt(raw.iter().map(|v| v * v).sum());
    let v: Vec<f64> = raw.iter().map(|x| x / norm).collect();
    let n = cfg.tokens_per_sample;
    let completion: String = (0..n).map(|i| char::from(b'a' + (i % 26) as u8)).collect();
    let tokens = ByteTokenizer.encode(&completion);
    let mut samples = Vec::with_capacity(cfg.n_samples);
    let mut traces = Vec::with_capacity(cfg.n_samples);
    for s in 0..cfg.n_samples {
        let id = alloc::format!("planted-{}-{s:05}", cfg.seed);
        let mut spans = Vec::with_capacity(n);
        let mut hidden = Vec::with_capacity(n * cfg.d);
        for i in 0..n {
            let y = rng.random_bool(cfg.positive_rate);
            let label = if y { VerificationLabel::NotSupported } else { VerificationLabel::Supported };
            spans.push(super::types::EntitySpan {
                text: completion[i..i + 1].into(),
                char_start: i,
                char_end: i + 1,
                token_start: Some(i),
                token_end: Some(i),
                label,
                note: String::new(),
            });
            for vk in &v {
                let z: f64 = rng.sample(StandardNormal);
                hidden.push((z + if y { cfg.shift * vk } else { 0.0 }) as f32);
            }
        }
        traces.push(crate::trace::ActivationTrace {
            sample_id: id.clone(),
            layer: 0,
            d: cfg.d as u32,
            n: n as u32,
            hidden,
            chosen_logprob: alloc::vec![0.0; n],
            next_token_entropy: alloc::vec![0.0; n],
        });
        samples.push(LabeledSample {
            id,
            prompt: String::new(),
            completion: completion.clone(),
            tokens: tokens.clone(),
            spans,
            source_tag: String::from("planted"),
            completion_label: None,
        });
    }
    (samples, traces, v)
}
