use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library reports. `code()` gives a stable identifier for scripts.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("enumeration cap exceeded: {what} needs {needed} items but the cap is {cap}")]
    CapExceeded { what: String, needed: String, cap: u64 },
    #[error("index {index} out of range (size {size})")]
    IndexOutOfRange { index: String, size: String },
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("policy is not deterministic: {0}")]
    NotDeterministic(String),
    #[error("secret value {0} has an empty class")]
    EmptyClass(String),
    #[error("negative-cost cycle reachable at node {0}")]
    NegativeCycle(String),
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("parameter not in space: {0}")]
    NotInSpace(String),
    #[error("empty release set: {0}")]
    EmptyReleaseSet(String),
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("bound not applicable: {0}")]
    NotApplicable(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("malformed csv: {0}")]
    Csv(String),
    #[error("unknown column: {0}")]
    UnknownColumn(String),
    #[error("empty result: {0}")]
    EmptyResult(String),
    #[error("precision {tau} does not rescale {n} rows exactly")]
    NonIntegralRescale { n: u64, tau: u64 },
    #[error("zero group denominator: {0}")]
    ZeroDenominator(String),
    #[error("support sets inconsistent: {0}")]
    SupportViolation(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::CapExceeded { .. } => "cap_exceeded",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::InvalidPolicy(_) => "invalid_policy",
            Error::NotDeterministic(_) => "not_deterministic",
            Error::EmptyClass(_) => "empty_class",
            Error::NegativeCycle(_) => "negative_cycle",
            Error::InvalidNetwork(_) => "invalid_network",
            Error::NotInSpace(_) => "not_in_space",
            Error::EmptyReleaseSet(_) => "empty_release_set",
            Error::AlphabetMismatch(_) => "alphabet_mismatch",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NotApplicable(_) => "not_applicable",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::UnknownColumn(_) => "unknown_column",
            Error::EmptyResult(_) => "empty_result",
            Error::NonIntegralRescale { .. } => "non_integral_rescale",
            Error::ZeroDenominator(_) => "zero_denominator",
            Error::SupportViolation(_) => "support_violation",
            Error::Parse(_) => "parse",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
