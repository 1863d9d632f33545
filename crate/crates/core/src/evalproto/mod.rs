//! Span scoring protocols and the classification metrics shared by probes
//! and baselines.

mod roc;
mod scoring;
mod selective;

pub use roc::{auc, evaluate, metrics, recall_at_fpr, roc, roc_from_scores, MethodMetrics, RocCurve, RocPoint};
pub use scoring::{score_spans, span_max, Protocol, ScoredSpan, SpanId};
pub use selective::{selective_curve, SelectivePoint};
