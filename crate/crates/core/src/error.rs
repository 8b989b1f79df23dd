use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("spin index {index} out of range 1..={spins}")]
    SpinIndex { index: usize, spins: usize },

    #[error("invalid index set: {0}")]
    IndexSet(String),

    #[error("invalid spin pair ({a}, {b}) for {spins} spins")]
    Pair { a: usize, b: usize, spins: usize },

    #[error("matrix is not Hermitian (‖A − A†‖ = {0:e})")]
    NotHermitian(f64),

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("density matrix has eigenvalue {value:e} below the admissible floor (ε = {floor:e})")]
    NegativeEigenvalue { value: f64, floor: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("step size underflow at t = {t} (dt = {dt:e})")]
    StepUnderflow { t: f64, dt: f64 },

    #[error("PSD repairs on {repairs} of {steps} accepted steps exceed 1%; tighten the integrator tolerances")]
    ExcessiveRepairs { repairs: usize, steps: usize },

    #[error("config parse error at line {line}, column {column}: {message}")]
    ConfigParse { line: usize, column: usize, message: String },

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("config value out of range: {0}")]
    ConfigRange(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error writing {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{experiment}: {source}")]
    Experiment {
        experiment: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { context: context.into(), source }
    }

    pub fn is_config_error(&self) -> bool {
        match self {
            Error::ConfigParse { .. } | Error::UnknownKey(_) | Error::ConfigRange(_) => true,
            Error::Experiment { source, .. } => source.is_config_error(),
            _ => false,
        }
    }
}
