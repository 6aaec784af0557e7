use thiserror::Error;

/// Violations of the dataset invariants. Instance indices are 0-based
/// positions; class labels are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("dataset has no instances")]
    Empty,
    #[error("shape error: {0}")]
    Shape(String),
    #[error("instance {0} has an empty candidate set")]
    EmptyCandidateSet(usize),
    #[error("instance {instance} has candidate label {label} outside 1..={q}")]
    LabelOutOfRange { instance: usize, label: usize, q: usize },
    #[error("instance {0}: true label is not among its candidates")]
    TruthNotInCandidates(usize),
    #[error("instance {0}, feature {1} is not finite")]
    NonFiniteFeature(usize, usize),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dataset is not supervised: instance {0} does not have exactly its true label as candidate")]
    NotSupervised(usize),
    #[error("r must be ≤ q−1 (r = {r}, q = {q})")]
    RTooLarge { r: usize, q: usize },
    #[error("proportion p must lie in [0, 1], got {0}")]
    InvalidProportion(f64),
    #[error("class counts sum to {got}, expected {expected}")]
    CountMismatch { got: usize, expected: usize },
    #[error("lambda must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dataset has no ground-truth labels")]
    NoGroundTruth,
    #[error("too few instances: {n} instances for {folds} folds")]
    TooFewInstances { n: usize, folds: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
