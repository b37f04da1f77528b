use std::fmt;
use std::path::Path;

use thiserror::Error;

/// A configuration problem tied to a key path such as `phys.gamma`.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| format!("\n  {x}")).collect()
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:{}", join(.0))]
    Config(Vec<Violation>),

    #[error("numerical failure in {module}: {source}")]
    Numerical {
        module: &'static str,
        #[source]
        source: holeflow::Error,
    },

    #[error("non-finite value in {field} produced by {module}; nothing written")]
    NonFinite { module: &'static str, field: String },

    #[error("{} acceptance check(s) failed", .0.len())]
    CheckFailed(Vec<String>),

    #[error("I/O error on {path}: {reason}")]
    Io { path: String, reason: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } | CliError::NonFinite { .. } => 3,
            CliError::CheckFailed(_) => 4,
            CliError::Io { .. } => 1,
        }
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            reason: err.to_string(),
        }
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config(vec![Violation::new(path, message)])
    }
}

/// Tags a core error with the module that produced it.
pub trait InModule<T> {
    fn in_module(self, module: &'static str) -> Result<T, CliError>;
}

impl<T> InModule<T> for holeflow::Result<T> {
    fn in_module(self, module: &'static str) -> Result<T, CliError> {
        self.map_err(|source| match source {
            holeflow::Error::Io { path, reason } => CliError::Io { path, reason },
            source => CliError::Numerical { module, source },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let negative: holeflow::Result<()> = Err(holeflow::Error::NegativeDensity { cell: 3, value: -1e-3, t: 0.1 });
        let err = negative.in_module("solver").unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("solver"));
        assert_eq!(CliError::config("a.b", "bad").exit_code(), 2);
        assert_eq!(CliError::CheckFailed(vec!["x".into()]).exit_code(), 4);
        let nf = CliError::NonFinite { module: "cutoff", field: "x".into() };
        assert_eq!(nf.exit_code(), 3);
    }
}
