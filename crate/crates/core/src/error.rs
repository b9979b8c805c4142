use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by model loading, synthesis and learning.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("LTL syntax error at byte {offset}: {msg}")]
    Ltl { offset: usize, msg: String },

    #[error("formula outside the supported fragment ({0}); supply a DRA file with --dra instead")]
    UnsupportedFragment(String),

    #[error("dead state {0}: no action is defined after composition")]
    DeadState(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid automaton: {0}")]
    InvalidAutomaton(String),

    #[error("action {action} is not available in state {state}")]
    UnavailableAction { state: String, action: String },

    #[error("assumption {assumption} violated: {detail}")]
    AssumptionViolation { assumption: u8, detail: String },

    #[error("average cost per cycle diverges: {0}")]
    Divergent(String),

    #[error("observed transition outside the declared structure: {0}")]
    StructureViolation(String),

    #[error("budget exhausted: {0}")]
    BudgetExhausted(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub(crate) fn assumption(assumption: u8, detail: impl Into<String>) -> Self {
        Error::AssumptionViolation { assumption, detail: detail.into() }
    }

    /// Number of the violated assumption, if this is an assumption violation.
    pub fn violated_assumption(&self) -> Option<u8> {
        match self {
            Error::AssumptionViolation { assumption, .. } => Some(*assumption),
            _ => None,
        }
    }
}
