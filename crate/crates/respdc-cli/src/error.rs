use std::fmt;

/// CLI failure split by exit code: usage problems (bad flags, unreadable or
/// incomplete configs, unwritable output) exit 2, physics-domain errors from
/// the core exit 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(respdc_core::Error),
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage(message.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            // A missing or unreadable data file is an environment problem,
            // not a physics result.
            CliError::Domain(respdc_core::Error::Io { .. }) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Domain(err) => write!(f, "{err}"),
        }
    }
}

impl From<respdc_core::Error> for CliError {
    fn from(err: respdc_core::Error) -> Self {
        CliError::Domain(err)
    }
}

pub type CliResult<T> = Result<T, CliError>;
