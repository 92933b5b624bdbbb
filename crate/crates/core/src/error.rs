use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is not an integer multiple of dt = {dt}")]
    NonCommensurate { what: &'static str, value: f64, dt: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient history: need index {needed}, earliest available is {available}")]
    InsufficientHistory { needed: i64, available: i64 },

    #[error("{len} increments cannot be aggregated by a factor of {kappa}")]
    NotDivisible { len: usize, kappa: usize },

    #[error("state magnitude {value:e} exceeded cap {cap:e} at step {step} of path {path}")]
    NumericalBlowup { path: usize, step: usize, value: f64, cap: f64 },

    #[error("no sample interval brackets grid time {t}")]
    GapTooLarge { t: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("quadrature failed to reach tolerance {tol:e}")]
    QuadratureFailure { tol: f64 },

    #[error("path of {len} points is too short for {p} lags and horizon {horizon}")]
    PathTooShort { len: usize, p: usize, horizon: usize },

    #[error("training of the {net} diverged at iteration {iteration}")]
    Divergence { net: &'static str, iteration: usize },

    #[error("no OOD source segment satisfied the range guard after {retries} retries")]
    GuardUnsatisfiable { retries: usize },

    #[error("singular design matrix in least-squares fit")]
    SingularDesign,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("ROCAUC needs both classes present")]
    SingleClass,

    #[error("no convergence point had a positive error difference")]
    NegativeLogArgument,

    #[error("missing column(s): {0}")]
    MissingColumns(String),

    #[error("series is not uniformly sampled near t = {t}")]
    NonUniformSampling { t: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
