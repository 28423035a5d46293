use std::fmt;

use serde::{Deserialize, Serialize};

/// Machine-readable failure record. Library errors keep their own codes
/// (`network.*`, `moments.*`, ...); the runner's own codes start with `cli.`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub code: String,
    pub message: String,
    /// Index of the task that failed, when one did.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<usize>,
}

impl Failure {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Failure {
            code: code.to_string(),
            message: message.into(),
            task: None,
        }
    }

    pub fn at_task(mut self, index: usize) -> Self {
        self.task = Some(index);
        self
    }

    pub fn io(context: &str, err: std::io::Error) -> Self {
        Failure::new("cli.io", format!("{context}: {err}"))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.code, self.message)
    }
}

impl From<gossipfield::Error> for Failure {
    fn from(e: gossipfield::Error) -> Self {
        Failure::new(e.code(), e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::new("cli.io", e.to_string())
    }
}
