//! Mapping of errors to exit codes.

use std::fmt;

use actigeo_core::Error as CoreError;

/// A failed command: bad input or configuration (exit 2) or a failure
/// while running (exit 1).
#[derive(Debug)]
pub enum Failure {
    Invalid(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Invalid(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Invalid(e) => write!(f, "invalid input: {e:#}"),
            Failure::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

pub type CmdResult<T> = Result<T, Failure>;

/// Whether a core error describes malformed input rather than a numerical
/// or I/O failure.
pub fn is_input_error(e: &CoreError) -> bool {
    match e {
        CoreError::Parse { .. }
        | CoreError::DuplicateRecord { .. }
        | CoreError::Config(_)
        | CoreError::InvalidCurve(_)
        | CoreError::Dimension(_) => true,
        CoreError::Subject { source, .. } => is_input_error(source),
        _ => false,
    }
}

pub trait Classify<T> {
    fn invalid(self) -> CmdResult<T>;
    fn runtime(self) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn invalid(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Invalid(e.into()))
    }

    fn runtime(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

pub trait ClassifyCore<T> {
    /// Classifies by [`is_input_error`], prefixing `context`.
    fn classify(self, context: &str) -> CmdResult<T>;
}

impl<T> ClassifyCore<T> for Result<T, CoreError> {
    fn classify(self, context: &str) -> CmdResult<T> {
        self.map_err(|e| {
            let input = is_input_error(&e);
            let err = anyhow::Error::new(e).context(context.to_string());
            if input {
                Failure::Invalid(err)
            } else {
                Failure::Runtime(err)
            }
        })
    }
}

/// Checks that an input file exists, naming it otherwise.
pub fn require_file(path: &std::path::Path, what: &str) -> CmdResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Invalid(anyhow::anyhow!("{what} not found: {}", path.display())))
    }
}
