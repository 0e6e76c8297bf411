//! Error type shared across the crate.
//!
//! Errors are grouped by how a caller should react: configuration problems
//! (bad input, reject before solving), numerical blow-ups (a solve started
//! and diverged), and I/O or parsing failures from the CLI layer. The
//! [`Error::exit_code`] mapping gives each group a stable process exit code.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: bad grid, mismatched dimensions, off-grid data
    /// times, missing required settings, and similar caller mistakes.
    #[error("configuration error: {0}")]
    Config(String),

    /// A query landed outside the valid time range.
    #[error("time {t} outside grid range [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },

    /// The forward solve produced a non-finite state.
    #[error("numerical blow-up at step {step} (t = {t})")]
    BlowUp { step: usize, t: f64 },

    /// The backward adjoint solve produced a non-finite covector.
    #[error("adjoint blow-up at step {step} (t = {t})")]
    AdjointBlowUp { step: usize, t: f64 },

    /// A finite-difference oracle could not evaluate one of its perturbed
    /// solves; the message names the failing perturbation.
    #[error("oracle error: {0}")]
    Oracle(String),

    /// The fit aborted: repeated blow-ups, or a non-finite gradient.
    #[error("fit failed: {0}")]
    Fit(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    TomlParse(#[from] toml::de::Error),

    #[error("result serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for this error: 2 for usage/configuration problems,
    /// 3 for numerical blow-ups, 1 for everything else that reached a solve.
    /// (0 is reserved for success and never returned here.)
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::OutOfRange { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::TomlParse(_)
            | Error::Json(_) => 2,
            Error::BlowUp { .. } | Error::AdjointBlowUp { .. } => 3,
            Error::Oracle(_) | Error::Fit(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
