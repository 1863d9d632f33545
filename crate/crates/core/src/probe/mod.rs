//! Logistic value head over one residual stream, the composite
//! token-wise / span-max objective and the training loop.

mod head;
mod loss;
mod objective;
mod optim;
mod train;

pub use head::{head_logits, head_scores, ProbeHead};
pub use loss::{anneal_omega, probe_loss, span_max_loss, span_targets, token_loss, total_loss, SpanTarget};
pub use objective::{
    feature_batch, model_batch, probe_objective, BatchItem, Gradients, LossBreakdown, ObjectiveConfig,
    ProbeObjective,
};
pub use optim::{Optimizer, OptimizerKind};
pub use train::{
    sample_features, score_sample, train, Features, OmegaSchedule, Regularizer, TrainConfig, TrainOutcome,
    TrainReport,
};
