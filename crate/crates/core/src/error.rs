use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    Domain(String),

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("adaptive quadrature did not converge: estimate {estimate:e}, error {error:e}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("right-hand side has nonzero mean {mean:e} (norm {norm:e})")]
    NonzeroMean { mean: f64, norm: f64 },

    #[error("saddle-point solve stalled after {iterations} iterations, residual {residual:e}")]
    SolverStall { iterations: usize, residual: f64 },

    #[error("time step {dt:e} violates stability limit {limit:e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("negative density {value:e} at cell {cell} (t = {t})")]
    NegativeDensity { cell: usize, value: f64, t: f64 },

    #[error("non-finite value produced in {0}")]
    NonFinite(String),

    #[error("I/O error on {path}: {reason}")]
    Io { path: String, reason: String },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            reason: err.to_string(),
        }
    }
}
