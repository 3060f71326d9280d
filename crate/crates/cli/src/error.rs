use std::fmt;
use std::path::Path;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 1,
    Data = 2,
    Numeric = 3,
}

/// A failed run: exit class plus a context chain.
#[derive(Debug)]
pub struct Failure {
    pub kind: ExitKind,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(msg: impl fmt::Display) -> Self {
        Self {
            kind: ExitKind::Usage,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn data(msg: impl fmt::Display) -> Self {
        Self {
            kind: ExitKind::Data,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn numeric(msg: impl fmt::Display) -> Self {
        Self {
            kind: ExitKind::Numeric,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn code(&self) -> i32 {
        self.kind as i32
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub type CliResult<T> = Result<T, Failure>;

/// Attaches a path (and optionally a record) to lower-level errors.
pub trait Context<T> {
    fn at(self, kind: ExitKind, path: &Path) -> CliResult<T>;
    fn data_at(self, path: &Path) -> CliResult<T>
    where
        Self: Sized,
    {
        self.at(ExitKind::Data, path)
    }
}

impl<T, E: fmt::Display> Context<T> for Result<T, E> {
    fn at(self, kind: ExitKind, path: &Path) -> CliResult<T> {
        self.map_err(|e| Failure {
            kind,
            error: anyhow::anyhow!("{}: {e}", path.display()),
        })
    }
}
