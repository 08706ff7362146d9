use std::fmt;

use crate::config::ConfigError;

/// Failure of a batch run, mapped onto a process exit code.
#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    NonConvergence { step: u64, message: String },
    Io(String),
    Internal(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::NonConvergence { .. } => 3,
            RunError::Io(_) => 4,
            RunError::Internal(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config",
            RunError::NonConvergence { .. } => "nonconvergence",
            RunError::Io(_) => "io",
            RunError::Internal(_) => "internal",
        }
    }

    /// One-line JSON description for stderr.
    pub fn to_json(&self) -> String {
        let mut obj = serde_json::Map::new();
        obj.insert("error".into(), self.kind().into());
        obj.insert("message".into(), self.to_string().into());
        match self {
            RunError::Config(c) => {
                if let Some(f) = &c.field {
                    obj.insert("field".into(), f.clone().into());
                }
                if let Some(l) = c.line {
                    obj.insert("line".into(), l.into());
                }
            }
            RunError::NonConvergence { step, .. } => {
                obj.insert("step".into(), (*step).into());
            }
            _ => {}
        }
        serde_json::Value::Object(obj).to_string()
    }

    pub(crate) fn from_core(err: spinpic::Error, step: u64) -> Self {
        match err {
            spinpic::Error::Config { field, reason } => RunError::Config(ConfigError {
                field: Some(field),
                line: None,
                message: reason,
            }),
            spinpic::Error::UnsupportedOrder { .. } => RunError::Config(ConfigError {
                field: Some("grid.degree".into()),
                line: None,
                message: err.to_string(),
            }),
            e @ spinpic::Error::NonConvergence { .. } => RunError::NonConvergence {
                step,
                message: e.to_string(),
            },
            spinpic::Error::Internal(m) => RunError::Internal(m),
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(c) => write!(f, "configuration error: {c}"),
            RunError::NonConvergence { step, message } => write!(f, "step {step}: {message}"),
            RunError::Io(m) => write!(f, "i/o error: {m}"),
            RunError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

pub(crate) fn io_error(path: &std::path::Path, err: std::io::Error) -> RunError {
    RunError::Io(format!("{}: {err}", path.display()))
}
