use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;
use vrm_core::VrmError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] VrmError),

    #[error("assertion failed: {0}")]
    Assertion(String),

    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Machine-readable form printed on stderr.
#[derive(Debug, Serialize)]
pub struct ErrorReport<'a> {
    pub error: &'a str,
    pub exit_code: i32,
    pub message: String,
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Core(VrmError::Precondition(_) | VrmError::Degenerate(_)) => "precondition",
            CliError::Core(_) => "config",
            CliError::Assertion(_) => "assertion",
            CliError::Io { .. } => "io",
        }
    }

    /// 2 config, 3 precondition, 4 assertion, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "config" => 2,
            "precondition" => 3,
            "assertion" => 4,
            _ => 1,
        }
    }

    pub fn report(&self) -> ErrorReport<'_> {
        ErrorReport { error: self.kind(), exit_code: self.exit_code(), message: self.to_string() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Core(VrmError::InvalidParameter("x".into())).exit_code(), 2);
        assert_eq!(CliError::Core(VrmError::Precondition("x".into())).exit_code(), 3);
        assert_eq!(CliError::Assertion("x".into()).exit_code(), 4);
        let io = CliError::Io { path: "p".into(), source: std::io::Error::other("x") };
        assert_eq!(io.exit_code(), 1);
        assert_eq!(CliError::Assertion("x".into()).report().error, "assertion");
    }
}
