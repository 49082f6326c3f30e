use std::fmt;

/// One validation failure, tagged with the config field it concerns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error at line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("invalid configuration: {}", join(.0))]
    Config(Vec<FieldError>),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("capacity exceeded: {what} needs {requested}, limit is {limit}")]
    Capacity {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    #[error("numeric failure at step {step} (t = {time}){}", trajectory_suffix(.trajectory))]
    Divergence {
        step: usize,
        time: f64,
        trajectory: Option<(u64, u64)>,
    },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("observable not accumulated: {0}")]
    Query(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("malformed Pauli string {input:?}: {reason}")]
    PauliParse { input: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config(vec![FieldError::new(field, message)])
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Syntax { .. } | Error::Config(_) => 2,
            Error::Capacity { .. } => 3,
            Error::Divergence { .. } | Error::Fit(_) => 4,
            _ => 1,
        }
    }
}

fn join(errors: &[FieldError]) -> String {
    errors
        .iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

fn trajectory_suffix(trajectory: &Option<(u64, u64)>) -> String {
    match trajectory {
        Some((index, seed)) => format!(" in trajectory {index} (master seed {seed})"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
