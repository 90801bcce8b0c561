use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report. The variant name is part of the
/// public contract: the CLI and the C interface surface it verbatim.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("CapacityExceedsMinDemand: capacity {capacity} exceeds T*d_lb = {limit}")]
    CapacityExceedsMinDemand { capacity: f64, limit: f64 },
    #[error("NonPositiveBound: {what} must be positive, got {value}")]
    NonPositiveBound { what: &'static str, value: f64 },
    #[error("InvertedBounds: d_lb {lower} exceeds d_ub {upper}")]
    InvertedBounds { lower: f64, upper: f64 },
    #[error("ZeroHorizon: the horizon must contain at least one slot")]
    ZeroHorizon,
    #[error("NegativeCapacity: capacity must be nonnegative, got {0}")]
    NegativeCapacity(f64),
    #[error("NonFinite: {0} must be finite")]
    NonFinite(&'static str),
    #[error("LengthMismatch: expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("DemandOutOfBounds: slot {slot} demand {value} outside [{lower}, {upper}]")]
    DemandOutOfBounds {
        slot: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("PrefixOutOfBounds: {0}")]
    PrefixOutOfBounds(String),
    #[error("BudgetExceedsTotalDemand: budget {budget} exceeds total demand {total}")]
    BudgetExceedsTotalDemand { budget: f64, total: f64 },
    #[error("InfeasibleSchedule: {0}")]
    InfeasibleSchedule(String),
    #[error("WeightsViolateAssumption: peak weight {peak_weight} is below T*max spread = {required}")]
    WeightsViolateAssumption { peak_weight: f64, required: f64 },
    #[error("NumericalFailure: {0}")]
    NumericalFailure(String),
    #[error("MalformedProgram: {0}")]
    MalformedProgram(String),
    #[error("DenominatorNotPositive: minimum of the denominator over the feasible set is {0}")]
    DenominatorNotPositive(f64),
    #[error("EmptyIndexSet: the index set must be nonempty")]
    EmptyIndexSet,
    #[error("InvalidIndexSet: {0}")]
    InvalidIndexSet(String),
    #[error("DegenerateInstance: {0}")]
    DegenerateInstance(String),
    #[error("HorizonTooLarge: brute force supports at most {max} slots, got {actual}")]
    HorizonTooLarge { max: usize, actual: usize },
    #[error("DegenerateOfflinePeak: the offline peak of the reference profile is zero")]
    DegenerateOfflinePeak,
    #[error("NegativeSlack: remaining inventory {remaining} is below the worst-case requirement {required}")]
    NegativeSlack { remaining: f64, required: f64 },
    #[error("InvalidParameter: {0}")]
    InvalidParameter(String),
    #[error("MalformedRecord: line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("EmptyTrace: no usable demand data")]
    EmptyTrace,
    #[error("MismatchedLengths: {0}")]
    MismatchedLengths(String),
    #[error("Io: {0}")]
    Io(String),
}

impl Error {
    /// The variant name, e.g. `"CapacityExceedsMinDemand"`.
    pub fn name(&self) -> &'static str {
        match self {
            Error::CapacityExceedsMinDemand { .. } => "CapacityExceedsMinDemand",
            Error::NonPositiveBound { .. } => "NonPositiveBound",
            Error::InvertedBounds { .. } => "InvertedBounds",
            Error::ZeroHorizon => "ZeroHorizon",
            Error::NegativeCapacity(_) => "NegativeCapacity",
            Error::NonFinite(_) => "NonFinite",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::DemandOutOfBounds { .. } => "DemandOutOfBounds",
            Error::PrefixOutOfBounds(_) => "PrefixOutOfBounds",
            Error::BudgetExceedsTotalDemand { .. } => "BudgetExceedsTotalDemand",
            Error::InfeasibleSchedule(_) => "InfeasibleSchedule",
            Error::WeightsViolateAssumption { .. } => "WeightsViolateAssumption",
            Error::NumericalFailure(_) => "NumericalFailure",
            Error::MalformedProgram(_) => "MalformedProgram",
            Error::DenominatorNotPositive(_) => "DenominatorNotPositive",
            Error::EmptyIndexSet => "EmptyIndexSet",
            Error::InvalidIndexSet(_) => "InvalidIndexSet",
            Error::DegenerateInstance(_) => "DegenerateInstance",
            Error::HorizonTooLarge { .. } => "HorizonTooLarge",
            Error::DegenerateOfflinePeak => "DegenerateOfflinePeak",
            Error::NegativeSlack { .. } => "NegativeSlack",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::MalformedRecord { .. } => "MalformedRecord",
            Error::EmptyTrace => "EmptyTrace",
            Error::MismatchedLengths(_) => "MismatchedLengths",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
