//! Event mining: pattern matching, co-occurrence heatmaps and hypothesis
//! verification.

pub mod heatmap;
pub mod matching;
pub mod occurrences;
pub mod pattern;
pub mod stats;
pub mod verify;

pub use heatmap::{cooccurrence_matrix, generate_candidates, Candidate, CategorySpec, Heatmap};
pub use matching::{contextual_match, Binning, Confounder, ConfounderValue, ContextGroup, MatchStrategy, Unit};
pub use occurrences::{find_occurrences, find_occurrences_in, matches_ending_at, Occurrence};
pub use pattern::{AttrConstraint, ChronicleStats, Cmp, EventPattern, Gap, PatternContext, Scale, Step, TimeWindow};
pub use verify::{
    build_units, verify, ContextResult, Direction, Hypothesis, OutcomeSelector, TemporalCondition, UnitSet, VerifiedRule,
    VerifyParams,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MiningError {
    #[error("window must be > 0")]
    InvalidWindow,
    #[error("bad category spec `{0}`")]
    BadCategorySpec(String),
    #[error("unit {0} has no value for a confounder")]
    MissingConfounderValue(String),
    #[error("invalid hypothesis: {}", .0.join("; "))]
    InvalidHypothesis(Vec<String>),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("chronicle is empty")]
    EmptyChronicle,
    #[error("input pattern has no occurrences")]
    NoOccurrences,
    #[error("no occurrence is followed by an outcome inside the window")]
    NoOutcomes,
    #[error("no control periods with an outcome")]
    NoControls,
}

impl MiningError {
    pub fn code(&self) -> &'static str {
        match self {
            MiningError::InvalidWindow => "invalid_window",
            MiningError::BadCategorySpec(_) => "bad_category_spec",
            MiningError::MissingConfounderValue(_) => "missing_confounder_value",
            MiningError::InvalidHypothesis(_) => "invalid_hypothesis",
            MiningError::InvalidParameter(_) => "invalid_parameter",
            MiningError::EmptyChronicle => "empty_chronicle",
            MiningError::NoOccurrences => "no_occurrences",
            MiningError::NoOutcomes => "no_outcomes",
            MiningError::NoControls => "no_controls",
        }
    }
}
