//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the game, solver, agent, and harness layers.
#[derive(Debug, Error)]
pub enum SiError {
    /// A caller violated an operation's precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration document failed to parse or failed validation.
    #[error("parse error: {0}")]
    Parse(String),

    /// Two catalog entries share a type id.
    #[error("duplicate type id `{0}`")]
    DuplicateTypeId(String),

    /// A referenced type id is not present in the catalog.
    #[error("unknown type id `{0}`")]
    UnknownTypeId(String),

    /// The equilibrium solver does not handle games of this size.
    #[error("unsupported game size: {n} actions exceeds the solver cap of {max}")]
    UnsupportedSize { n: usize, max: usize },

    /// The equilibrium solver failed outright.
    #[error("solver failure: {0}")]
    Solver(String),

    /// An agent specification is malformed for its kind.
    #[error("invalid agent spec: {0}")]
    AgentSpec(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SiError>;

impl SiError {
    /// Exit-code class for the CLI: 2 = input error, 3 = solver/internal.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            SiError::UnsupportedSize { .. } | SiError::Solver(_)
        )
    }
}
