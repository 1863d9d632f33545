//! Labeled samples, byte tokenization, span alignment and token targets.

mod align;
mod shortform;
pub mod synthetic;
mod targets;
mod tokenizer;
mod types;

pub use align::{align_spans, AlignReport, Rejection, RejectionReason, SpanAligner};
pub use shortform::{build_shortform_split, ShortformQuestion, ShortformSplit, SHORTFORM_VERDICTS};
pub use targets::{build_targets, TokenTargets};
pub use tokenizer::{ByteTokenizer, TokenOffset, Tokenizer, BOS, EOS, PAD};
pub use types::{
    merge_duplicate_spans, EntitySpan, LabeledSample, RawSpan, VerificationLabel,
};
