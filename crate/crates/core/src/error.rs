use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: cannot parse {value:?}")]
    UnparseableValue {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column `{column}`: value is not finite")]
    NonFiniteValue { row: usize, column: String },

    #[error("row {row}: wcp must be positive, got {value}")]
    NonPositiveResponse { row: usize, value: f64 },

    #[error("duplicate week {0}")]
    DuplicateWeek(NaiveDate),

    #[error("duplicate record for ticker `{ticker}` in week {week}")]
    DuplicateRecord { ticker: String, week: NaiveDate },

    #[error("week {0} has company data but no matching macro row")]
    MissingWeek(NaiveDate),

    #[error("input is empty")]
    EmptyInput,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("market returns have zero variance")]
    ZeroMarketVariance,

    #[error("zero denominator")]
    ZeroDenominator,

    #[error("column `{0}` is constant")]
    ConstantColumn(String),

    #[error("dataset too small: need at least {required} rows, got {actual}")]
    DatasetTooSmall { required: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("value {x} is outside the open support ({lower}, {upper})")]
    OutOfSupport { x: f64, lower: f64, upper: f64 },

    #[error("sample too small: need at least {required} values, got {actual}")]
    SampleTooSmall { required: usize, actual: usize },

    #[error("sample is degenerate (all values equal)")]
    DegenerateSample,

    #[error("no grid candidate produced a valid Johnson SB fit")]
    NoValidFit,

    #[error("sample size {n} outside the valid range [{min}, {max}]")]
    SampleSizeOutOfRange { n: usize, min: usize, max: usize },

    #[error("design matrix is rank deficient: column `{column}` is linearly dependent on earlier columns")]
    RankDeficient { column: String },

    #[error("need more observations than parameters: {n_obs} observations, {n_params} parameters")]
    InsufficientObservations { n_obs: usize, n_params: usize },

    #[error("response has zero total variance")]
    ZeroTotalVariance,

    #[error("degrees of freedom exhausted: n = {n}, k = {k}")]
    DegreesOfFreedomExhausted { n: usize, k: usize },

    #[error("starting model is not fittable: {n_obs} observations, {n_params} parameters")]
    UnfittableStart { n_obs: usize, n_params: usize },

    #[error("observed value at index {index} is zero")]
    ZeroObserved { index: usize },

    #[error("predicted values are all zero")]
    ZeroPredictedNorm,

    #[error("fold too small: {n_train} training rows for {n_params} parameters")]
    FoldTooSmall { n_train: usize, n_params: usize },

    #[error("all contributions are zero")]
    ZeroContributionTotal,

    #[error("non-finite input")]
    NonFiniteInput,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ZeroMarketVariance
                | Error::ZeroDenominator
                | Error::DegenerateSample
                | Error::NoValidFit
                | Error::RankDeficient { .. }
                | Error::InsufficientObservations { .. }
                | Error::ZeroTotalVariance
                | Error::DegreesOfFreedomExhausted { .. }
                | Error::UnfittableStart { .. }
                | Error::ZeroPredictedNorm
                | Error::FoldTooSmall { .. }
                | Error::ZeroContributionTotal
                | Error::ConstantColumn(_)
        )
    }
}
