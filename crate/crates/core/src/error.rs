use crate::records::GroupId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report. Variant names double as the stable
/// error identifiers printed by the CLI.
#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum Error {
    #[error("input is empty")]
    EmptyInput,
    #[error("non-finite input value {0}")]
    NonFiniteInput(f64),
    #[error("weight at index {index} is not positive ({value})")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("quantile level {0} is outside [0, 1]")]
    OutOfRangeU(f64),

    #[error("declared group {0} has no records")]
    MissingGroup(GroupId),
    #[error("query {query_id} has more than one item at position {position}")]
    DuplicatePosition { query_id: u64, position: u32 },
    #[error("query {query_id} positions do not form 1..J (missing position {missing})")]
    NonContiguousPositions { query_id: u64, missing: u32 },
    #[error("position must be >= 1 (query {query_id}, item {item_id})")]
    InvalidPosition { query_id: u64, item_id: u64 },
    #[error("label {label} exceeds the schema maximum {max}")]
    LabelOutOfRange { label: u32, max: u32 },

    #[error("no impressions at position {0}")]
    NoImpressionsAtPosition(u32),
    #[error("no positive responses at position 1")]
    ZeroBaseCtr,
    #[error("no records at position {0}")]
    EmptyPosition(u32),
    #[error("no positive responses at position {0}")]
    NoPositivesAtPosition(u32),
    #[error("score density at position {0} is degenerate")]
    DegenerateDensity(u32),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("group {0} has no positive-label records")]
    NoPositivesInGroup(GroupId),
    #[error("group {0} is not known to the model")]
    UnknownGroup(GroupId),
    #[error("model artifact does not match the expected schema: {0}")]
    SchemaMismatch(String),

    #[error("score {0} is outside [0, 1)")]
    ScoreOutOfUnitInterval(f64),
    #[error("no weight for position {0}")]
    MissingWeightForPosition(u32),
    #[error("stratum (group {group}, label {label}) has no mass")]
    EmptyStratum { group: GroupId, label: u32 },
    #[error("at least two groups are required")]
    SingleGroup,
    #[error("inconsistent dimensions: {0}")]
    InconsistentDimensions(String),
    #[error("bin {bin} is out of range for {bins} bins")]
    BinOutOfRange { bin: usize, bins: usize },
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex hit the iteration limit ({0} pivots)")]
    IterationLimit(usize),
    #[error("malformed linear program: {0}")]
    MalformedProblem(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("slots ({slots}) exceed population size ({population})")]
    SlotsExceedPopulation { slots: usize, population: usize },
    #[error("scorer failed on query {query_id}, item {item_id}: {message}")]
    ScorerFailure {
        query_id: u64,
        item_id: u64,
        message: String,
    },
    #[error("record references item {0} missing from the truth table")]
    MissingTruth(u64),
    #[error("binary labels are required")]
    NonBinaryLabels,

    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Stable identifier, identical to the variant name.
    pub fn name(&self) -> &'static str {
        match self {
            Error::EmptyInput => "EmptyInput",
            Error::NonFiniteInput(_) => "NonFiniteInput",
            Error::NonPositiveWeight { .. } => "NonPositiveWeight",
            Error::OutOfRangeU(_) => "OutOfRangeU",
            Error::MissingGroup(_) => "MissingGroup",
            Error::DuplicatePosition { .. } => "DuplicatePosition",
            Error::NonContiguousPositions { .. } => "NonContiguousPositions",
            Error::InvalidPosition { .. } => "InvalidPosition",
            Error::LabelOutOfRange { .. } => "LabelOutOfRange",
            Error::NoImpressionsAtPosition(_) => "NoImpressionsAtPosition",
            Error::ZeroBaseCtr => "ZeroBaseCTR",
            Error::EmptyPosition(_) => "EmptyPosition",
            Error::NoPositivesAtPosition(_) => "NoPositivesAtPosition",
            Error::DegenerateDensity(_) => "DegenerateDensity",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::NoPositivesInGroup(_) => "NoPositivesInGroup",
            Error::UnknownGroup(_) => "UnknownGroup",
            Error::SchemaMismatch(_) => "SchemaMismatch",
            Error::ScoreOutOfUnitInterval(_) => "ScoreOutOfUnitInterval",
            Error::MissingWeightForPosition(_) => "MissingWeightForPosition",
            Error::EmptyStratum { .. } => "EmptyStratum",
            Error::SingleGroup => "SingleGroup",
            Error::InconsistentDimensions(_) => "InconsistentDimensions",
            Error::BinOutOfRange { .. } => "BinOutOfRange",
            Error::Infeasible => "Infeasible",
            Error::Unbounded => "Unbounded",
            Error::IterationLimit(_) => "IterationLimit",
            Error::MalformedProblem(_) => "MalformedProblem",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::SlotsExceedPopulation { .. } => "SlotsExceedPopulation",
            Error::ScorerFailure { .. } => "ScorerFailure",
            Error::MissingTruth(_) => "MissingTruth",
            Error::NonBinaryLabels => "NonBinaryLabels",
            Error::Io(_) => "Io",
            Error::Parse(_) => "Parse",
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
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
