//! Judge-based annotation, the verbatim-match safeguard, and the controlled
//! error-injection harness used to measure label quality.

mod inject;
mod judge;
mod mock;

pub use inject::{
    evaluate_pipeline, find_sites, inject_errors, invert, EditKind, InjectedEdit, InjectionConfig, InjectionRecord,
    PipelineEval, Site, DECOY_NAMES,
};
pub use judge::{
    annotate_completion, attach_annotations, parse_judge_response, render_system_prompt, Judge, JudgeRequest,
    ParsedJudgment, JUDGE_TEMPLATE,
};
pub use mock::{AdversarialJudge, FlipJudge, OracleJudge};
