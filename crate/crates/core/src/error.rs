use thiserror::Error;

pub type Result<T> = std::result::Result<T, AttribError>;

/// Errors raised by path construction, simulation and decomposition.
///
/// Variants are split into two families: input/format problems and
/// mathematical precondition violations. The CLI maps the first family to
/// exit code 1 and the second to exit code 2 (see [`AttribError::is_precondition`]).
#[derive(Debug, Error)]
pub enum AttribError {
    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("index out of range: {what} = {index} (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("dimension mismatch: payoff has {payoff} factors, path has {path}")]
    DimensionMismatch { payoff: usize, path: usize },

    #[error("selector has length {got}, expected {expected}")]
    SelectorLength { got: usize, expected: usize },

    #[error("not a permutation of 1..={d}: {detail}")]
    InvalidPermutation { d: usize, detail: String },

    #[error("{d}! permutations exceed the enumeration cap d <= {cap}; use the two-permutation or portfolio route")]
    PermutationCap { d: usize, cap: usize },

    #[error("simultaneous jumps present at {count} grid point(s) (first at index {first})")]
    SimultaneousJumpsPresent { count: usize, first: usize },

    #[error("path carries jump flags; a continuous path is required")]
    JumpsPresent,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("scheduled jump at t = {time} is not on the grid")]
    JumpOffGrid { time: f64 },

    #[error("payoff term {term} depends on factor {factor} outside its declared support")]
    SupportViolation { term: usize, factor: usize },

    #[error("{0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl AttribError {
    /// True for mathematical precondition violations, false for I/O and parse failures.
    pub fn is_precondition(&self) -> bool {
        !matches!(self, AttribError::Io(_) | AttribError::Parse(_))
    }
}
