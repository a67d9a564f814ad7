use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("basis index {index} out of range 1..={count}")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("coordinate {coord:?} outside the domain of {family}")]
    OutsideDomain { family: &'static str, coord: Vec<f64> },

    #[error("{0} is not a constraint-force shape family")]
    NotAConstraintFamily(&'static str),

    #[error("unsupported quadrature dimension {0}")]
    UnsupportedDimension(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("measurement point {index} at {coord:?} sees no basis function")]
    ZeroMeasurementRow { index: usize, coord: Vec<f64> },

    #[error("singular jacobian (pivot {pivot:.3e} below threshold {threshold:.3e})")]
    SingularJacobian { pivot: f64, threshold: f64 },

    #[error("singular augmented system: {0}")]
    SingularAugmentedSystem(String),

    #[error("newton did not converge in {iterations} iterations (residual {residual:.3e})")]
    MaxItersExceeded { iterations: usize, residual: f64 },

    #[error("newton diverged after {iterations} iterations (residual {residual:.3e})")]
    Diverged { iterations: usize, residual: f64 },

    #[error("time step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("initial data inconsistent with the initial condition (mismatch {0:.3e})")]
    InconsistentInitialData(f64),

    #[error("non-finite gradient at iteration {0}")]
    NonFiniteGradient(usize),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("linear algebra failure: {0}")]
    LinearAlgebraFailure(String),

    #[error("optimizer did not converge in {0} iterations")]
    OptimizerMaxIters(usize),

    #[error("invalid probability {0}")]
    InvalidProbability(f64),

    #[error("negative predicted variance {0:.3e}")]
    NegativeVariance(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) => 2,
            Error::Infeasible(_) => 4,
            Error::StepFailed { source, .. } => source.exit_code(),
            _ => 3,
        }
    }
}
