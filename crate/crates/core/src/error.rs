use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("expected {expected} entries, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("entry {index} is not strictly positive ({value})")]
    NonPositiveEntry { index: usize, value: f64 },
    #[error("entry {index} is not finite")]
    NonFinite { index: usize },
    #[error("outcome space must have at least two outcomes, got {0}")]
    SpaceTooSmall(usize),
    #[error("invalid outcome labels: {0}")]
    InvalidLabels(String),
    #[error("operands live on different outcome spaces")]
    SpaceMismatch,
    #[error("expected {expected} items, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("event must be a nonempty proper subset of the outcome space")]
    EmptyOrFullEvent,
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("children do not pool to the parent (discrepancy {discrepancy:e})")]
    NotAPoolWitness { discrepancy: f64 },
    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(String),
    #[error("operation requires a {expected} pool")]
    KindMismatch { expected: &'static str },
    #[error("welfare gap cross-check failed: direct {direct:e} vs identity {identity:e}")]
    IdentityMismatch { direct: f64, identity: f64 },
    #[error("parameter out of range: {0}")]
    ParamOutOfRange(String),
    #[error("weights put all mass on a single agent")]
    DegenerateWeights,
    #[error("search failed: {0}")]
    NotFound(String),
    #[error("fewer than two strictly positive weights")]
    WeightTooConcentrated,
    #[error("could not produce pairwise-distinct children after {attempts} attempts")]
    DistinctnessFailure { attempts: usize },
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
    #[error("parent is uniform; the tilt counterexample is void")]
    UniformParent,
    #[error("decomposition is not strictly unanimous (min gap {min_gap:e})")]
    NotStrictlyUnanimous { min_gap: f64 },
    #[error("no positive openness radius could be certified")]
    OpennessNotCertified,
    #[error("tilts are not centered: max |sum_i beta_i h_i| = {max_violation:e}")]
    TiltsNotCentered { max_violation: f64 },
    #[error("log profile is not centered under its base (mean {mean:e})")]
    ProfileNotCentered { mean: f64 },
    #[error("weight change does not sum to zero (sum {sum:e})")]
    DbetaNotZeroSum { sum: f64 },
    #[error("inconsistent weight change: {0}")]
    DbetaInconsistent(String),
    #[error("log deviation norm {norm:e} exceeds budget {budget:e}")]
    BudgetViolated { norm: f64, budget: f64 },
    #[error("every profile in the span is zero")]
    DegenerateSpan,
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
