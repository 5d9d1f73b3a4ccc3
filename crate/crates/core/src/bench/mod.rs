//! Breeding benchmark scoring: accuracy, stability and reasoning over
//! recorded model answers and human judgments.

mod records;
mod score;
mod task;

pub use records::{
    load_ballots, load_trials, read_ballots, read_trials, ReasoningBallot, StabilityProtocol,
    TrialRecord, DEFAULT_AXIS, REASONING_AXES,
};
pub use score::{
    build_report, score_accuracy, score_reasoning, score_stability, stability_pass, write_report,
    AccuracyRow, AccuracyScore, BenchmarkReport, ExcludedTrial, ReasoningRow, ReasoningScore,
    StabilityReport, StabilityRow, StabilityScore,
};
pub use task::{AnswerKind, Subtask, Task, TaskSpec};
