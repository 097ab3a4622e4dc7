use std::fmt;
use std::io;

use semnav::a3c::TrainError;
use semnav::evalharness::EvalError;
use semnav::gridscene::SceneError;
use semnav::policynet::NetError;
use semnav::semantics::SemanticsError;

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn config(msg: impl Into<String>) -> CliError {
        CliError::Config(msg.into())
    }

    /// Prefixes the message, typically with a file path.
    pub fn context(self, what: impl fmt::Display) -> CliError {
        match self {
            CliError::Config(m) => CliError::Config(format!("{what}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{what}: {m}")),
            CliError::Numeric(m) => CliError::Numeric(format!("{what}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            CliError::Config(m) | CliError::Io(m) | CliError::Numeric(m) => m,
        };
        // Diagnostics are single-line.
        f.write_str(&msg.replace('\n', " "))
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<SceneError> for CliError {
    fn from(e: SceneError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SemanticsError> for CliError {
    fn from(e: SemanticsError) -> Self {
        match e {
            SemanticsError::Diverged { .. } => CliError::Numeric(e.to_string()),
            SemanticsError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::NonFinite => CliError::Numeric(e.to_string()),
            NetError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Net(n) => n.into(),
            TrainError::Scene(s) => s.into(),
            TrainError::NonFiniteUpdate(_) => CliError::Numeric(e.to_string()),
            TrainError::Io(_) => CliError::Io(e.to_string()),
            TrainError::Config(_) | TrainError::WorkerPanic { .. } => CliError::Config(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Scene(s) => s.into(),
            EvalError::Net(n) => n.into(),
            EvalError::Train(t) => t.into(),
            EvalError::Semantics(s) => s.into(),
            EvalError::Config(m) => CliError::Config(m),
        }
    }
}
