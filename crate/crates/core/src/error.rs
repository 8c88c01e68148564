//! Crate-wide error type and its exit-code classification.

use thiserror::Error;

use crate::experiments::ExperimentError;
use crate::features::FeaturesError;
use crate::ingest::IngestError;
use crate::metrics::MetricsError;
use crate::models::ModelError;
use crate::physics::PhysicsError;
use crate::report::ReportError;
use crate::table::TableError;
use crate::windowing::WindowError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Features(#[from] FeaturesError),
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Table(#[from] TableError),
}

/// Broad failure class, used by the command line for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad arguments or configuration.
    Usage,
    /// Unreadable, malformed or insufficient input data.
    Data,
    /// Divergence, singular systems, non-finite values.
    Numeric,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => 1,
            ErrorKind::Data => 2,
            ErrorKind::Numeric => 3,
        }
    }
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Ingest(_) | Error::Table(_) | Error::Report(_) => ErrorKind::Data,
            Error::Features(e) => match e {
                FeaturesError::UnknownFeature(_) => ErrorKind::Usage,
                _ => ErrorKind::Data,
            },
            Error::Window(e) => window_kind(e),
            Error::Model(e) => model_kind(e),
            Error::Physics(e) => match e {
                PhysicsError::NegativeSpeed(_) => ErrorKind::Data,
                _ => ErrorKind::Usage,
            },
            Error::Metrics(e) => match e {
                MetricsError::NonFinite { .. } => ErrorKind::Numeric,
                _ => ErrorKind::Data,
            },
            Error::Experiment(e) => e.kind(),
        }
    }
}

pub(crate) fn window_kind(e: &WindowError) -> ErrorKind {
    match e {
        WindowError::InvalidSpec(_) | WindowError::Table(_) => ErrorKind::Usage,
        WindowError::NonFinite { .. } => ErrorKind::Numeric,
        _ => ErrorKind::Data,
    }
}

pub(crate) fn model_kind(e: &ModelError) -> ErrorKind {
    match e {
        ModelError::Diverged { .. } | ModelError::Singular => ErrorKind::Numeric,
        ModelError::Invalid(_) | ModelError::Shape { .. } => ErrorKind::Usage,
        ModelError::Window(w) => window_kind(w),
        _ => ErrorKind::Data,
    }
}
