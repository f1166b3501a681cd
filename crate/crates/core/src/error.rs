use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Synthesis,
    Runtime,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Synthesis => 3,
            ErrorCategory::Runtime => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Config => "config",
            ErrorCategory::Synthesis => "synthesis",
            ErrorCategory::Runtime => "runtime",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {message}")]
    Config { path: String, message: String },

    #[error("{path}: dimension mismatch: {message}")]
    Dimension { path: String, message: String },

    #[error("pair is not {property}: eigenvalue {re:.6}{im:+.6}i is not {mode}")]
    Synthesis {
        property: &'static str,
        mode: &'static str,
        re: f64,
        im: f64,
    },

    #[error("synthesized gain misses its target: spectral radius {achieved:.6} > {target:.6}")]
    GainTarget { achieved: f64, target: f64 },

    #[error("unknown input observer does not exist: rank(CE) = {rank_ce} < rank(E) = {rank_e}")]
    UioNonexistence { rank_ce: usize, rank_e: usize },

    #[error("input not reconstructible: output row {row} has no finite relative degree")]
    NoRelativeDegree { row: usize },

    #[error("relative degree rank condition fails: rank {rank} < {inputs} inputs")]
    RelativeDegreeRank { rank: usize, inputs: usize },

    #[error("attacker model is not left-invertible ({regime} regime): {reason}")]
    NotLeftInvertible { regime: &'static str, reason: String },

    #[error("least-squares regime misdeclared: {0}")]
    Regime(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn dimension(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Dimension {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config { .. } | Error::Dimension { .. } | Error::Regime(_) => {
                ErrorCategory::Config
            }
            Error::Synthesis { .. }
            | Error::GainTarget { .. }
            | Error::UioNonexistence { .. }
            | Error::NoRelativeDegree { .. }
            | Error::RelativeDegreeRank { .. }
            | Error::NotLeftInvertible { .. } => ErrorCategory::Synthesis,
            Error::Protocol(_) | Error::Io { .. } => ErrorCategory::Runtime,
        }
    }
}
