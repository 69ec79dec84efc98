use std::fmt;

use icevision_kit::datastore::DatastoreError;
use icevision_kit::frames::FrameError;
use icevision_kit::harness::HarnessError;
use icevision_kit::kv::KvError;
use icevision_kit::refinement::RefineError;
use icevision_kit::scoring::ScoringError;
use icevision_kit::taxonomy::TaxonomyError;
use icevision_kit::tracking::TrackingError;

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_MISSING_INPUT: i32 = 2;
pub const EXIT_MALFORMED_INPUT: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: message.into() }
    }

    pub fn missing(message: impl Into<String>) -> Self {
        CliError { code: EXIT_MISSING_INPUT, message: message.into() }
    }

    pub fn malformed(message: impl Into<String>) -> Self {
        CliError { code: EXIT_MALFORMED_INPUT, message: message.into() }
    }

    pub fn failure(message: impl Into<String>) -> Self {
        CliError { code: EXIT_FAILURE, message: message.into() }
    }

    /// Prefix the message with what was being processed.
    pub fn context(self, what: impl fmt::Display) -> Self {
        CliError { code: self.code, message: format!("{what}: {}", self.message) }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type CliResult<T> = Result<T, CliError>;

// Reads only; write failures go through `write_failed`.
impl From<DatastoreError> for CliError {
    fn from(e: DatastoreError) -> Self {
        match e {
            DatastoreError::Io { .. } => CliError::missing(e.to_string()),
            DatastoreError::Record { .. } => CliError::malformed(e.to_string()),
            DatastoreError::Unwritable { .. } => CliError::failure(e.to_string()),
        }
    }
}

pub fn write_failed(e: DatastoreError) -> CliError {
    CliError::failure(e.to_string())
}

impl From<FrameError> for CliError {
    fn from(e: FrameError) -> Self {
        CliError::malformed(e.to_string())
    }
}

impl From<KvError> for CliError {
    fn from(e: KvError) -> Self {
        CliError::malformed(e.to_string())
    }
}

impl From<ScoringError> for CliError {
    fn from(e: ScoringError) -> Self {
        CliError::malformed(e.to_string())
    }
}

impl From<TrackingError> for CliError {
    fn from(e: TrackingError) -> Self {
        match e {
            TrackingError::FrameUnavailable { .. } => CliError::missing(e.to_string()),
            _ => CliError::malformed(e.to_string()),
        }
    }
}

impl From<RefineError> for CliError {
    fn from(e: RefineError) -> Self {
        match e {
            RefineError::EmptyGrid(_) | RefineError::InvalidThreshold(_) | RefineError::MalformedList(_) => CliError::usage(e.to_string()),
            _ => CliError::malformed(e.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Placement(_) => CliError::failure(e.to_string()),
            _ => CliError::malformed(e.to_string()),
        }
    }
}

impl From<TaxonomyError> for CliError {
    fn from(e: TaxonomyError) -> Self {
        match e {
            TaxonomyError::Io { .. } => CliError::missing(e.to_string()),
            _ => CliError::malformed(e.to_string()),
        }
    }
}
