use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown family token `{0}`")]
    UnknownFamily(String),

    #[error("invalid family parameters: {0}")]
    InvalidFamily(String),

    #[error("mean {value} at ({row}, {col}) is outside the family's mean domain")]
    MeanOutOfDomain { row: usize, col: usize, value: f64 },

    #[error("multinomial row {row} has mean sum {sum} >= 1")]
    RowSumTooLarge { row: usize, sum: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid tau matrix: {0}")]
    InvalidTau(String),

    #[error("tau + nu2 = {0} is not positive")]
    DegenerateDenominator(f64),

    #[error("at least {required} rows are required, got {got}")]
    TooFewRows { required: usize, got: usize },

    #[error("infeasible shrinkage parameters: {0}")]
    Infeasible(String),

    #[error("negative weight {weight} at index {index}")]
    NegativeWeight { index: usize, weight: f64 },

    #[error("grid oracle limited to n <= {max_n} and p <= {max_p}")]
    OracleTooLarge { max_n: usize, max_p: usize },

    #[error("the oracle-loss competitor requires the true means")]
    MissingTheta,

    #[error("non-positive value {0} cannot be log-transformed")]
    NonPositive(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
