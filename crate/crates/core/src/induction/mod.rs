//! Iterative rule induction from null nodes.
//!
//! Each iteration parses the corpus, generalizes every null node into a
//! candidate rule, and promotes the most frequent candidate for review.

mod generalize;
mod propose;
mod session;
mod trigger;

use thiserror::Error;

pub use generalize::{
    generalize_bottom_up, generalize_layers, generalize_layers_spanned, BottomUp, LayerPriority,
};
pub use propose::{generalize_node, propose_rules, rank, CandidateRule, SAMPLE_COUNT};
pub use session::{
    decision_log, history_csv, run_scripted, sources_parsed, Decision, DecisionScript,
    InductionSession, IterationStats, Mode, SessionConfig, StopReason, HISTORY_HEADER,
};
pub use trigger::{estimate_trigger_probability, term_count, DEFAULT_TP_SAMPLES};

use crate::grammar::GrammarError;
use crate::parser::StatsError;

#[derive(Debug, Error)]
pub enum InductionError {
    #[error("cannot estimate trigger probability on an empty corpus")]
    EmptyCorpus,
    #[error("sample size must be at least 1")]
    ZeroSamples,
    #[error("a candidate is already awaiting a decision")]
    PendingDecision,
    #[error("no candidate is awaiting a decision")]
    NoPending,
    #[error("session has stopped ({0})")]
    Stopped(StopReason),
    #[error("decision script line {line}: {message}")]
    Script { line: usize, message: String },
    #[error(
        "decision script expects iteration {found} but the session is at iteration {expected}"
    )]
    ScriptMismatch { expected: u32, found: u32 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
