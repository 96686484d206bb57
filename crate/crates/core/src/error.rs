//! Crate-wide error type aggregating the per-module errors, with the
//! validation/runtime split the CLI maps onto exit codes.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Field(#[from] crate::field::FieldError),
    #[error(transparent)]
    Synth(#[from] crate::synth::SynthError),
    #[error(transparent)]
    Segment(#[from] crate::segment::SegmentError),
    #[error(transparent)]
    Refine(#[from] crate::refine::RefineError),
    #[error(transparent)]
    Kinematics(#[from] crate::kinematics::KinematicsError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error(transparent)]
    Deform(#[from] crate::deform::DeformError),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for errors caused by invalid input rather than runtime failure;
    /// the CLI exits 1 for these and 2 otherwise. A missing input file is
    /// an invocation problem, not a runtime failure.
    pub fn is_validation(&self) -> bool {
        let not_found =
            |source: &std::io::Error| source.kind() == std::io::ErrorKind::NotFound;
        match self {
            Error::Field(e) => match e {
                crate::field::FieldError::Io { source, .. } => not_found(source),
                _ => true,
            },
            Error::Synth(_) => true,
            Error::Config(e) => !matches!(e, crate::config::ConfigError::Io { .. }),
            Error::Metrics(e) => matches!(
                e,
                crate::metrics::MetricsError::NoGroundTruth
                    | crate::metrics::MetricsError::LabelLength(_, _)
                    | crate::metrics::MetricsError::BadState(_, _)
            ),
            Error::Segment(e) => matches!(e, crate::segment::SegmentError::NoGroundTruth),
            Error::Refine(e) => matches!(
                e,
                crate::refine::RefineError::NoGroundTruth
                    | crate::refine::RefineError::LabelLength(_, _)
            ),
            Error::Invalid(_) => true,
            Error::Io { source, .. } => not_found(source),
            Error::Deform(crate::deform::DeformError::Io { source, .. }) => not_found(source),
            _ => false,
        }
    }
}
