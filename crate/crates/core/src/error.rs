use std::path::PathBuf;

use thiserror::Error;

use crate::config::ConfigError;
use crate::foreground::ForegroundError;
use crate::ingest::IngestError;
use crate::report::ReportError;
use crate::scoring::ScoringError;
use crate::selection::SelectionError;
use crate::softlabel::SoftLabelError;
use crate::synthesis::SynthesisError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Foreground(#[from] ForegroundError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    SoftLabel(#[from] SoftLabelError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{image_id}: {source}")]
    AtImage {
        image_id: String,
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes, mapped to process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Inference,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Usage => 1,
            ErrorClass::Data => 2,
            ErrorClass::Inference => 3,
        }
    }
}

fn scoring_class(e: &ScoringError) -> ErrorClass {
    match e {
        ScoringError::Foreground(_) | ScoringError::MaskRequired => ErrorClass::Data,
        _ => ErrorClass::Inference,
    }
}

impl Error {
    pub(crate) fn at(image_id: &str, source: impl Into<Error>) -> Error {
        Error::AtImage {
            image_id: image_id.to_string(),
            source: Box::new(source.into()),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Usage,
            Error::Scoring(e) => scoring_class(e),
            Error::Selection(SelectionError::Scoring(e)) => scoring_class(e),
            Error::Selection(SelectionError::InvalidSampler(_))
            | Error::Selection(SelectionError::NoCandidates)
            | Error::Selection(SelectionError::InvalidPatchSide) => ErrorClass::Usage,
            Error::SoftLabel(SoftLabelError::Teacher(e)) => scoring_class(e),
            Error::Foreground(ForegroundError::SegmenterFailed { .. }) => ErrorClass::Inference,
            Error::Foreground(
                ForegroundError::TemplatePlaceholder(_) | ForegroundError::TemplateSyntax(_),
            ) => ErrorClass::Usage,
            Error::AtImage { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.class().exit_code()
    }
}
