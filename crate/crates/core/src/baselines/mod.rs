//! Uncertainty baselines: per-token entropy and perplexity, and semantic
//! entropy over sampled continuations.

mod semantic;
mod token;

pub use semantic::{
    cluster_by_entailment, semantic_entropy, span_semantic_entropy, AnswerExtractor, CachedOracle,
    ContinuationSampler, EntailmentOracle, ExactMatch, Identity, ModelSampler, NormalizedMatch,
    SemanticClustering, DEFAULT_K,
};
pub use token::{span_max_score, token_entropy, token_perplexity};
