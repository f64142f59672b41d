//! Confidence-guided self-training for reasoning models.
//!
//! * [`tasks`]: prompts, output parsing and answer checking per task format.
//! * [`gateway`]: model access over an OpenAI-compatible API, plus a
//!   fixture-driven mock and an in-process mock server.
//! * [`confidence`]: P(True) scoring of reasoning and answers.
//! * [`pairs`]: preference pairs from scored samples.
//! * [`dpo`]: the pairwise preference loss, its gradient on a tabular
//!   policy, and an online training loop.
//! * [`selection`]: best-of-N selectors and confidence/accuracy tables.
//! * [`pipeline`]: the stages above over JSONL records.

pub mod confidence;
pub mod dpo;
pub mod gateway;
pub mod pairs;
pub mod pipeline;
pub mod prompts;
pub mod selection;
pub mod tasks;

pub use confidence::{
    combined_confidence, p_true, vote_confidence, ConfidenceError, ConfidenceOptions,
    ConfidenceReport, ReasoningMethod, TrueFalseLogprobs,
};
pub use dpo::{
    dpo_grad, dpo_loss, online_dpo_step, sequence_logprob, DpoConfig, DpoError, LossForm,
    PairLogprobs, StepReport, ToyPolicy,
};
pub use gateway::{
    Completion, Gateway, GatewayError, LogprobRequest, SamplingConfig, TokenLogprob,
};
pub use pairs::{
    build_core_pair, build_sc_pair, PairError, PairRule, PreferencePair, PreferenceRecord,
    ScoreKind, ScoredSample,
};
pub use pipeline::{PipelineError, SampleRecord, Selector};
pub use selection::{
    confidence_accuracy_curve, select_best_by, select_ptrue, select_sc, Candidate, CurvePoint,
    CurveRow, Metric,
};
pub use tasks::{OutputSample, Question, TaskKind, Verdict};
