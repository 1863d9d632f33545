use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::align::SpanAligner;
use super::tokenizer::Tokenizer;
use super::types::{LabeledSample, RawSpan, VerificationLabel};
use crate::error::{invalid, Result};
use crate::seed;

pub const SHORTFORM_VERDICTS: usize = 5;

/// A short-answer question with five judged samples and one test completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortformQuestion {
    pub id: String,
    pub prompt: String,
    pub completion: String,
    /// The answer entity inside `completion`.
    pub answer_text: String,
    /// Judge verdicts for the sampled generations; `true` = correct.
    pub verdicts: Vec<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ShortformSplit {
    pub samples: Vec<LabeledSample>,
    pub dropped_mixed: usize,
    pub dropped_unaligned: usize,
    pub dropped_balance: usize,
}

/// Keep unanimously correct or unanimously incorrect questions and
/// downsample the larger class (seeded) so both classes are equal.
pub fn build_shortform_split(
    questions: &[ShortformQuestion],
    tokenizer: &impl Tokenizer,
    seed: u64,
) -> Result<ShortformSplit> {
    let mut split = ShortformSplit::default();
    let mut correct = Vec::new();
    let mut incorrect = Vec::new();
    for (idx, q) in questions.iter().enumerate() {
        if q.verdicts.len() != SHORTFORM_VERDICTS {
            return Err(invalid(alloc::format!(
                "question {}: expected {SHORTFORM_VERDICTS} verdicts, found {}",
                q.id,
                q.verdicts.len()
            )));
        }
        let n_ok = q.verdicts.iter().filter(|&&v| v).count();
        let label = match n_ok {
            SHORTFORM_VERDICTS => VerificationLabel::Supported,
            0 => VerificationLabel::NotSupported,
            _ => {
                split.dropped_mixed += 1;
                continue;
            }
        };
        let tokens = tokenizer.encode(&q.completion);
        let mut aligner = SpanAligner::new(&q.completion, &tokens);
        let span = match aligner.align(&RawSpan::new(q.answer_text.clone(), label)) {
            Ok(s) => s,
            Err(_) => {
                split.dropped_unaligned += 1;
                continue;
            }
        };
        let sample = LabeledSample {
            id: q.id.clone(),
            prompt: q.prompt.clone(),
            completion: q.completion.clone(),
            tokens,
            spans: alloc::vec![span],
            source_tag: "shortform".into(),
            completion_label: None,
        };
        if label.is_hallucinated() {
            incorrect.push((idx, sample));
        } else {
            correct.push((idx, sample));
        }
    }
    let keep = correct.len().min(incorrect.len());
    let mut rng = seed::named_rng(seed, seed::stream::SPLIT);
    for class in [&mut correct, &mut incorrect] {
        if class.len() > keep {
            class.shuffle(&mut rng);
            split.dropped_balance += class.len() - keep;
            class.truncate(keep);
        }
    }
    let mut kept: Vec<(usize, LabeledSample)> = correct.into_iter().chain(incorrect).collect();
    kept.sort_by_key(|(idx, _)| *idx);
    split.samples = kept.into_iter().map(|(_, s)| s).collect();
    Ok(split)
}
