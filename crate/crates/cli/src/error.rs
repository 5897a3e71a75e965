use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad command line: exit 2.
    #[error("{0}")]
    Usage(String),
    /// Unreadable, malformed or invalid configuration: exit 2.
    #[error("{0}")]
    Config(String),
    /// Failure inside a computation: exit 1.
    #[error(transparent)]
    Domain(#[from] spingate::Error),
    /// Input or output file failure: exit 1.
    #[error("{0}")]
    Io(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Domain(_) | CliError::Io(_) => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Domain(_) => "domain",
            CliError::Io(_) => "io",
        }
    }

    /// Single-line JSON written to stderr.
    pub fn to_json(&self) -> String {
        json!({
            "error": {
                "kind": self.kind(),
                "message": self.to_string(),
                "exit_code": self.exit_code(),
            }
        })
        .to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_by_kind() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Io("x".into()).exit_code(), 1);
        assert_eq!(CliError::from(spingate::Error::Degenerate("x".into())).exit_code(), 1);
    }

    #[test]
    fn json_shape() {
        let v: serde_json::Value = serde_json::from_str(&CliError::Config("bad".into()).to_json()).unwrap();
        assert_eq!(v["error"]["kind"], "config");
        assert_eq!(v["error"]["message"], "bad");
        assert_eq!(v["error"]["exit_code"], 2);
    }
}
