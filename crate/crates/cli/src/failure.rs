use std::fmt;
use std::path::Path;

use serde::Serialize;

/// Exit codes: 2 for usage and validation problems, 3 for runtime failures.
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Usage,
    Input,
    Validation,
    Runtime,
    Divergence,
}

/// A command failure, printed as one JSON line on stderr.
#[derive(Debug, Serialize)]
pub struct Failure {
    pub kind: Kind,
    pub message: String,
}

pub type CliResult<T> = std::result::Result<T, Failure>;

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            kind: Kind::Usage,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Failure {
            kind: Kind::Runtime,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        Failure {
            kind: Kind::Runtime,
            message: format!("{}: {err}", path.display()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            Kind::Usage | Kind::Input | Kind::Validation => EXIT_USAGE,
            Kind::Runtime | Kind::Divergence => EXIT_RUNTIME,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_else(|_| self.message.clone())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ubauc::Error> for Failure {
    fn from(e: ubauc::Error) -> Self {
        use ubauc::Error as E;
        let kind = match &e {
            E::Parse { .. } | E::Format { .. } | E::Io { .. } | E::NonBinaryLabel(_) | E::SingleClass { .. } => {
                Kind::Input
            }
            E::DimensionMismatch { .. } | E::InvalidArgument(_) | E::Validation(_) | E::CapExceeded { .. } => {
                Kind::Validation
            }
            E::Divergence { .. } | E::NonFinite(_) => Kind::Divergence,
            E::Stream(_) | E::Ties(_) | E::RetriesExhausted { .. } => Kind::Runtime,
        };
        Failure {
            kind,
            message: e.to_string(),
        }
    }
}
