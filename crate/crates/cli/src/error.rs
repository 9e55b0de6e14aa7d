use std::fmt;

/// Failure of a CLI run, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or unwritable file: exit 1.
    Io { path: String, source: std::io::Error },
    /// Bad configuration; `key` is the dotted path of the offending entry: exit 2.
    Config { key: String, message: String },
    /// Divergence or non-convergence: exit 3.
    Numerical(String),
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl fmt::Display, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }

    /// Core errors: invalid parameters become config errors under `section`,
    /// the rest are numerical.
    pub fn from_core(section: &str, err: rcs_core::Error) -> Self {
        match err {
            rcs_core::Error::InvalidParameter { name, reason } => {
                let key = if section.is_empty() {
                    name.to_string()
                } else {
                    format!("{section}.{name}")
                };
                CliError::config(key, reason)
            }
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io { path, source } => write!(f, "I/O error on {path}: {source}"),
            CliError::Config { key, message } => write!(f, "config error at `{key}`: {message}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}
