use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("density matrix invariant violated: {0}")]
    InvalidState(String),

    #[error("fringe fit failed: {0}")]
    FitFailure(String),

    #[error("feedforward is undefined for a zero frequency difference")]
    ZeroDeltaOmega,

    #[error("phase-vs-Δt regression needs at least two fitted groups, got {0}")]
    TooFewGroups(usize),

    /// `line` is 0 when the value did not come from a file.
    #[error("config{}: {message}", line_suffix(*.line))]
    Config { line: usize, message: String },

    #[error("event log line {line}: {message}")]
    EventLog { line: usize, message: String },

    #[error("bad strategy spec `{spec}`: {reason}")]
    StrategySpec { spec: String, reason: String },

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

fn line_suffix(line: usize) -> String {
    if line == 0 {
        String::new()
    } else {
        format!(" line {line}")
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn check_probability(name: &'static str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(name, format!("{p} is not a probability in [0, 1]")))
    }
}
