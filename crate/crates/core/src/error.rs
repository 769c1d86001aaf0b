use thiserror::Error;

use crate::model::OpClass;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),

    #[error("edge references unknown node `{0}`")]
    DanglingEdge(String),

    #[error("duplicate edge `{0}` -> `{1}`")]
    DuplicateEdge(String, String),

    #[error("dependency cycle through node `{0}`")]
    Cycle(String),

    #[error("duplicate resource version `{0}`")]
    DuplicateVersion(String),

    #[error("resource `{name}`: {message}")]
    InvalidVersion { name: String, message: String },

    #[error("no resource version implements {0} operations")]
    UncoveredClass(OpClass),

    #[error("unknown resource version `{0}`")]
    UnknownVersion(String),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("node `{node}` is {class} but version `{version}` implements {version_class}")]
    ClassMismatch {
        node: String,
        class: OpClass,
        version: String,
        version_class: OpClass,
    },

    #[error("no version assigned to node `{0}`")]
    PartialAssignment(String),

    #[error("unknown benchmark `{0}` (expected fir16, ew or diffeq)")]
    UnknownBenchmark(String),

    #[error("latency bound {bound} is below the minimum achievable latency {minimum}")]
    InfeasibleBound { bound: u32, minimum: u32 },

    #[error("redundancy factor must be odd and positive, got {0}")]
    InvalidNmr(u32),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("calibration is degenerate: {0}")]
    Calibration(String),

    #[error("reference component `{0}` not among the inputs")]
    MissingReference(String),

    #[error("inconsistent design: {0}")]
    InconsistentDesign(String),

    #[error("instance exceeds oracle limits: {0}")]
    OracleLimit(String),
}
