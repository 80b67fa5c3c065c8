//! Crate-wide error type.

/// Everything that can go wrong across construction, sampling and
/// enumeration. Payloads are state/label indices into the owning structures.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("kernel is reducible: no unique stationary distribution")]
    ReducibleChain,

    #[error("state {state} has zero stationary mass; time reversal is undefined there")]
    ZeroMassState { state: usize },

    #[error("distribution is not stationary for the kernel")]
    NotStationary,

    #[error("independent-transitions label count {count} exceeds cap {cap}")]
    StateSpaceTooLarge { count: u128, cap: u128 },

    #[error("down-set count exceeds cap {cap}")]
    PosetTooLarge { cap: u64 },

    #[error("transition rule is not monotone: label {label} maps states {x} <= {y} out of order")]
    NotMonotone { x: usize, y: usize, label: usize },

    #[error("upward kernel for pair ({x},{y}) conditions on unreachable state {x_prime}")]
    UnreachableConditioning { x: usize, y: usize, x_prime: usize },

    #[error("undefined upward kernel row consulted: pair ({x},{y}), row {x_prime}")]
    UndefinedUpwardRow { x: usize, y: usize, x_prime: usize },

    #[error("transition {from} -> {to} has zero probability; backward trajectory is inconsistent")]
    ImpossibleTransition { from: usize, to: usize },

    #[error("enumeration exceeds the configured cap of {cap} terms")]
    EnumerationTooLarge { cap: u64 },

    #[error("{n} records exceeds the move-to-front limit of {max}")]
    TooManyRecords { n: usize, max: usize },

    #[error("seed state {state} has zero stationary mass")]
    ZeroMassSeed { state: usize },

    #[error("bottom element has zero stationary mass")]
    ZeroBottomMass,

    #[error("no acceptance within {attempts} attempts")]
    MaxAttemptsExceeded { attempts: u32 },

    #[error("no coalescence within the horizon of {limit}")]
    HorizonExceeded { limit: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("parse error: {0}")]
    ParseError(String),

    #[error("invalid chain spec at `{path}`: {message}")]
    ValidationError { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Validation failure located at a chain-spec field path.
    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::ValidationError {
            path: path.into(),
            message: message.into(),
        }
    }
}
