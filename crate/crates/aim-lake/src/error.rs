use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("bottom topography must be positive (min sampled b = {min})")]
    NonPositiveDepth { min: f64 },
    #[error("viscosity must be positive (min sampled nu = {min})")]
    NonPositiveViscosity { min: f64 },
    #[error("friction must be nonnegative (min sampled eta = {min})")]
    NegativeFriction { min: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("gram matrix condition number {cond:.3e} exceeds 1e12")]
    SingularGram { cond: f64 },
    #[error("index {index} outside 0..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("operator has a non-positive eigenvalue {0}")]
    SingularOperator(f64),
    #[error("H-norm {norm:.3e} blew up at t = {time}")]
    BlowUp { time: f64, norm: f64 },
    #[error("norms still growing at horizon {horizon}: {detail}")]
    NoAbsorption { horizon: f64, detail: String },
    #[error("backward Euler iterate left the 1e6*rho1 ball at step {step} (V-norm {norm:.3e})")]
    BackwardBlowUp { step: usize, norm: f64 },
    #[error("evaluation budget of {0} exceeded")]
    BudgetExceeded(usize),
    #[error("unsupported mollifier: {0}")]
    UnsupportedMollifier(String),
    #[error("gram inverse is ill-conditioned")]
    IllConditioned,
    #[error("fixed-point iteration diverged at y = {y}")]
    NoConvergence { y: f64 },
    #[error("expression `{expr}`: {message}")]
    Expr { expr: String, message: String },
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("malformed file {path}: {message}")]
    Format { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { key: key.into(), message: message.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
