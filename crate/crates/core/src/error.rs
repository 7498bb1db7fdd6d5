use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("tree contains a cycle")]
    CycleDetected,
    #[error("node `{0}` has more than one parent")]
    MultipleParents(String),
    #[error("unknown node label `{0}`")]
    UnknownLabel(String),
    #[error("duplicate node label `{0}`")]
    DuplicateLabel(String),
    #[error("edge {parent} -> {child} has zero weight")]
    ZeroWeightEdge { parent: String, child: String },
    #[error("edge {parent} -> {child} has a non-finite weight")]
    NonFiniteWeight { parent: String, child: String },
    #[error("edge endpoint {index} is out of range for {node_count} nodes")]
    InvalidIndex { index: usize, node_count: usize },
    #[error("a tree needs at least one node")]
    EmptyTree,
    #[error("binary tree needs at least one level, got {0}")]
    InvalidLevels(usize),
    #[error("standard deviation of node {index} is not strictly positive ({value})")]
    NonpositiveSd { index: usize, value: f64 },
    #[error("sample covariance is not positive definite")]
    CovarianceNotPd,
    #[error("matrix is not unit upper triangular")]
    NotUnitTriangular,
    #[error("penalty mixing weight must be nonnegative, got {0}")]
    NegativeAlpha(f64),
    #[error("tuning parameter lambda must be nonnegative, got {0}")]
    NegativeLambda(f64),
    #[error("elastic net l1 fraction must lie in [0, 1], got {0}")]
    InvalidL1Ratio(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("penalized normal equations are singular")]
    SingularSystem,
    #[error("X^T Y lies outside the row space of the penalty matrix")]
    InfeasibleSystem,
    #[error("linear program failed: {0}")]
    LinearProgram(String),
    #[error("noise variance must be strictly positive, got {0}")]
    NonpositiveSigma(f64),
    #[error("residual sum of squares is zero with n <= p; noise variance cannot be estimated")]
    DegenerateResidual,
    #[error("support set is empty")]
    EmptySupport,
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("label mismatch: {0}")]
    LabelMismatch(String),
    #[error("missing value in row {row}, column `{column}`")]
    MissingValues { row: usize, column: String },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("lambda grid must be strictly decreasing and positive")]
    InvalidGrid,
    #[error("no replication succeeded")]
    AllReplicationsFailed,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code: 2 for invalid input, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::CovarianceNotPd
            | Error::InfeasibleSystem
            | Error::SingularSystem
            | Error::LinearProgram(_)
            | Error::DegenerateResidual
            | Error::AllReplicationsFailed => 3,
            _ => 2,
        }
    }
}
