//! Experiment harness for the anchorlab core: configuration, run records,
//! reference tables, experiment drivers, analysis pipelines, report files,
//! and an HTTP backend for OpenAI-compatible endpoints.
//!
//! The core crate owns every algorithm; this crate owns everything with a
//! side effect — files, sockets, clocks, and the CLI.

pub mod analyze;
pub mod config;
pub mod probe;
pub mod record;
pub mod reference;
pub mod report;
pub mod runner;
pub mod sweep;
pub mod wire;

use std::fmt;
use std::io;
use std::path::Path;

use anchorlab_core::anchor::AnchorError;
use anchorlab_core::arith::ArithError;
use anchorlab_core::backend::BackendError;
use anchorlab_core::fit::FitError;
use anchorlab_core::sim::SimError;

/// Process exit code for configuration and input errors.
pub const EXIT_CONFIG: u8 = 2;
/// Process exit code for a backend that failed past its retry budget.
pub const EXIT_BACKEND: u8 = 3;

/// Anything the harness can fail with.
#[derive(Debug)]
pub enum HarnessError {
    /// Bad configuration, flags, or input file contents.
    Config {
        /// What was wrong.
        detail: String,
    },
    /// A file could not be read or written.
    Io {
        /// The path involved.
        path: String,
        /// The underlying error.
        source: io::Error,
    },
    /// The backend gave up.
    Backend(BackendError),
    /// A core computation rejected its inputs.
    Fit(FitError),
    /// The simulator rejected its inputs.
    Sim(SimError),
    /// The anchoring estimator rejected its inputs.
    Anchor(AnchorError),
    /// Dataset synthesis or grading rejected its inputs.
    Arith(ArithError),
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessError::Config { detail } => write!(f, "config error: {detail}"),
            HarnessError::Io { path, source } => write!(f, "io error on {path}: {source}"),
            HarnessError::Backend(e) => write!(f, "backend error: {e}"),
            HarnessError::Fit(e) => write!(f, "fit error: {e}"),
            HarnessError::Sim(e) => write!(f, "simulation error: {e}"),
            HarnessError::Anchor(e) => write!(f, "anchor error: {e}"),
            HarnessError::Arith(e) => write!(f, "dataset error: {e}"),
        }
    }
}

impl std::error::Error for HarnessError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            HarnessError::Io { source, .. } => Some(source),
            HarnessError::Backend(e) => Some(e),
            _ => None,
        }
    }
}

impl HarnessError {
    /// Shorthand for a [`HarnessError::Config`].
    pub fn config(detail: impl Into<String>) -> Self {
        HarnessError::Config {
            detail: detail.into(),
        }
    }

    /// Wraps an io error with the path it happened on.
    pub fn io(path: &Path, source: io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// The process exit code this error maps to: `2` for configuration and
    /// input problems, `3` for an exhausted backend, `1` otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Config { .. } => EXIT_CONFIG,
            HarnessError::Backend(BackendError::Exhausted { .. }) => EXIT_BACKEND,
            HarnessError::Backend(BackendError::InvalidConfig { .. })
            | HarnessError::Backend(BackendError::UnknownDomain { .. }) => EXIT_CONFIG,
            // Core domain errors reaching the CLI mean the run was
            // misconfigured, not that the math failed.
            HarnessError::Fit(_) | HarnessError::Sim(_) | HarnessError::Arith(_) => EXIT_CONFIG,
            _ => 1,
        }
    }
}

impl From<BackendError> for HarnessError {
    fn from(e: BackendError) -> Self {
        HarnessError::Backend(e)
    }
}

impl From<FitError> for HarnessError {
    fn from(e: FitError) -> Self {
        HarnessError::Fit(e)
    }
}

impl From<SimError> for HarnessError {
    fn from(e: SimError) -> Self {
        HarnessError::Sim(e)
    }
}

impl From<AnchorError> for HarnessError {
    fn from(e: AnchorError) -> Self {
        HarnessError::Anchor(e)
    }
}

impl From<ArithError> for HarnessError {
    fn from(e: ArithError) -> Self {
        HarnessError::Arith(e)
    }
}
