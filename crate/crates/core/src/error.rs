use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("coupling product alpha*beta is not positive at index {index}")]
    NonPositiveProduct { index: i64 },
    #[error("eigenvalue index {k} outside 1..={m}")]
    IndexOutOfRange { k: usize, m: usize },
    #[error("backward recursion requires a nonzero coupling strength")]
    EpsilonZero,
    #[error("invalid period class: {0}")]
    InvalidPeriodClass(String),
    #[error("no sign change of delta(eps)-eps on [0, {eps_hi}]")]
    NoSignChange { eps_hi: f64 },
    #[error("band midpoint at delta={delta} is transitional")]
    AmbiguousBand { delta: f64 },
    #[error("level {0} exceeds the supported maximum of 10")]
    LevelTooLarge(usize),
    #[error("argument {0} outside the branch domain x <= 25/4")]
    DomainError(f64),
    #[error("eigenvalue {0} is forbidden for extension")]
    ForbiddenEigenvalue(f64),
    #[error("eigenvalue {0} not present in the level-2 spectrum")]
    EigenvalueAbsent(f64),
    #[error("degenerate spacing of sqrt(lambda) at index {0}")]
    DegenerateSpacing(usize),
    #[error("normal equations singular after damping")]
    SingularNormalEquations,
    #[error("need at least {need} data points, got {got}")]
    InsufficientData { need: usize, got: usize },
    #[error("unknown dataset kind: {0}")]
    UnknownDatasetKind(String),
    #[error("sequence not available beyond index {0}")]
    SequenceExhausted(i64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Variant name, printed by the CLI on numeric failure.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NonPositiveProduct { .. } => "NonPositiveProduct",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::EpsilonZero => "EpsilonZero",
            Error::InvalidPeriodClass(_) => "InvalidPeriodClass",
            Error::NoSignChange { .. } => "NoSignChange",
            Error::AmbiguousBand { .. } => "AmbiguousBand",
            Error::LevelTooLarge(_) => "LevelTooLarge",
            Error::DomainError(_) => "DomainError",
            Error::ForbiddenEigenvalue(_) => "ForbiddenEigenvalue",
            Error::EigenvalueAbsent(_) => "EigenvalueAbsent",
            Error::DegenerateSpacing(_) => "DegenerateSpacing",
            Error::SingularNormalEquations => "SingularNormalEquations",
            Error::InsufficientData { .. } => "InsufficientData",
            Error::UnknownDatasetKind(_) => "UnknownDatasetKind",
            Error::SequenceExhausted(_) => "SequenceExhausted",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
