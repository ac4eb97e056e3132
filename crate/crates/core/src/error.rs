use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("unknown mode label `{0}`")]
    UnknownMode(String),
    #[error("mode label `{0}` used more than once")]
    DuplicateMode(String),
    #[error("{name} = {value} is outside [0, 1]")]
    ProbabilityOutOfRange { name: &'static str, value: f64 },
    #[error("detection pattern references unmeasured mode `{0}`")]
    UnmeasuredMode(String),
    #[error("malformed circuit: {0}")]
    MalformedCircuit(String),
    #[error("total excitation {total} exceeds cutoff {cutoff}")]
    CutoffExceeded { total: usize, cutoff: usize },
    #[error("state has zero trace")]
    ZeroTrace,
    #[error("state is not normalized (trace {0})")]
    NotNormalized(f64),
    #[error("scheme mismatch: {0}")]
    SchemeMismatch(String),
    #[error("mode map incomplete: {0}")]
    IncompleteModeMap(String),
    #[error("invalid nesting: {0}")]
    InvalidNesting(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
