//! Text record formats.
//!
//! Every file starts with a one-line header `icevision-kit/v1 <kind>`,
//! followed by whitespace-separated records, one per line. Blank lines and
//! lines starting with `#` are skipped. An empty file is an empty set.
//!
//! ```text
//! icevision-kit/v1 annotations
//! # frame code x_min y_min x_max y_max data temporary
//! 12 3.24 100 100 150 150 40 false
//! 15
//! ```
//!
//! A frame number on its own marks an annotated frame without signs.
//! Detections use `frame dist x_min y_min x_max y_max [data] [temporary]`
//! where `dist` is `code:prob[,code:prob...]` or a bare code (probability
//! 1). Absent data or temporary flags are written as `-`.

mod format;

pub use format::{
    format_annotations, format_detections, format_thresholds, format_tracks, parse_annotations, parse_detections, parse_manifest,
    parse_thresholds, parse_tracks, AnnotationRecord, AnnotationRecords, DetectionRecords,
};

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::detection::{DistributionError, FrameAnnotations, FrameIndex};
use crate::frames::{cfa_green, read_pnm, CfaImage, CfaPattern, GrayImage};
use crate::geometry::GeometryError;
use crate::refinement::LevelThresholds;
use crate::taxonomy::{ClassCode, CodeError, Taxonomy};
use crate::tracking::{FrameSource, Track};
use crate::Detection;

pub const FORMAT_VERSION: &str = "icevision-kit/v1";

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("missing header, expected {expected:?}")]
    MissingHeader { expected: String },
    #[error("expected header {expected:?}, found {found:?}")]
    WrongHeader { expected: String, found: String },
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("invalid class code {text:?}: {source}")]
    InvalidCode { text: String, source: CodeError },
    #[error("class code {0} is not in the taxonomy")]
    UnknownCode(ClassCode),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(#[from] DistributionError),
    #[error("invalid box: {0}")]
    InvalidBox(#[from] GeometryError),
    #[error("duplicate record for frame {0}")]
    DuplicateRecord(FrameIndex),
    #[error("frame {frame} does not follow {previous}")]
    FrameOrder { frame: FrameIndex, previous: FrameIndex },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum DatastoreError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Record {
        path: String,
        line: usize,
        #[source]
        source: RecordError,
    },
    #[error("cannot write {what}: {reason}")]
    Unwritable { what: &'static str, reason: String },
}

impl DatastoreError {
    /// True when the input file could not be opened because it is absent.
    pub fn is_not_found(&self) -> bool {
        matches!(self, DatastoreError::Io { source, .. } if source.kind() == io::ErrorKind::NotFound)
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            DatastoreError::Record { line, .. } => Some(*line),
            _ => None,
        }
    }
}

/// How readers treat class codes.
#[derive(Debug, Clone, Default)]
pub struct ReadOptions {
    /// When set, codes must be known to the taxonomy.
    pub taxonomy: Option<Taxonomy>,
    /// Skip records with bad or unknown codes instead of failing.
    pub permissive: bool,
}

/// Ordered frame list of one sequence.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SequenceManifest {
    pub sequence_id: String,
    pub frames: Vec<(FrameIndex, PathBuf)>,
    pub annotations: Vec<PathBuf>,
}

/// Frames of a manifest decoded from disk on request. Raw sensor frames
/// are reduced to their demosaiced green channel when a pattern is given.
#[derive(Debug, Clone)]
pub struct ManifestFrames {
    frames: BTreeMap<FrameIndex, PathBuf>,
    pattern: Option<CfaPattern>,
}

impl ManifestFrames {
    pub fn new(manifest: &SequenceManifest, pattern: Option<CfaPattern>) -> Self {
        ManifestFrames { frames: manifest.frames.iter().cloned().collect(), pattern }
    }
}

impl FrameSource for ManifestFrames {
    fn frame(&self, index: FrameIndex) -> Result<Arc<GrayImage>, Box<dyn std::error::Error + Send + Sync>> {
        let path = self.frames.get(&index).ok_or("not listed in the manifest")?;
        let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let img = read_pnm(&bytes).map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(Arc::new(match self.pattern {
            Some(p) => cfa_green(&CfaImage::new(img, p)),
            None => img,
        }))
    }
}

fn open(path: &Path) -> Result<BufReader<File>, DatastoreError> {
    File::open(path).map(BufReader::new).map_err(|source| DatastoreError::Io { path: path.display().to_string(), source })
}

fn read_to_string(path: &Path) -> Result<String, DatastoreError> {
    std::fs::read_to_string(path).map_err(|source| DatastoreError::Io { path: path.display().to_string(), source })
}

pub fn read_annotations(path: &Path, opts: &ReadOptions) -> Result<Vec<FrameAnnotations>, DatastoreError> {
    format::collect_annotations(AnnotationRecords::new(open(path)?, path.display().to_string(), opts.clone()))
}

pub fn read_detections(path: &Path, opts: &ReadOptions) -> Result<std::collections::BTreeMap<FrameIndex, Vec<Detection>>, DatastoreError> {
    format::collect_detections(DetectionRecords::new(open(path)?, path.display().to_string(), opts.clone()))
}

pub fn read_tracks(path: &Path, opts: &ReadOptions) -> Result<Vec<Track>, DatastoreError> {
    parse_tracks(&read_to_string(path)?, &path.display().to_string(), opts)
}

pub fn read_thresholds(path: &Path) -> Result<LevelThresholds, DatastoreError> {
    parse_thresholds(&read_to_string(path)?, &path.display().to_string())
}

/// Relative frame and annotation paths are resolved against the manifest's
/// directory.
pub fn read_manifest(path: &Path) -> Result<SequenceManifest, DatastoreError> {
    let mut m = parse_manifest(&read_to_string(path)?, &path.display().to_string())?;
    if let Some(dir) = path.parent() {
        for (_, p) in &mut m.frames {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        for p in &mut m.annotations {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }
    Ok(m)
}

/// Write through a temporary file in the target directory and rename it
/// into place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DatastoreError> {
    let io_err = |source| DatastoreError::Io { path: path.display().to_string(), source };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

pub fn write_annotations(annotations: &[FrameAnnotations], path: &Path) -> Result<(), DatastoreError> {
    write_atomic(path, format_annotations(annotations)?.as_bytes())
}

pub fn write_detections<'a>(detections: impl IntoIterator<Item = &'a Detection>, path: &Path) -> Result<(), DatastoreError> {
    write_atomic(path, format_detections(detections)?.as_bytes())
}

pub fn write_tracks(tracks: &[Track], path: &Path) -> Result<(), DatastoreError> {
    write_atomic(path, format_tracks(tracks)?.as_bytes())
}

pub fn write_thresholds(thr: &LevelThresholds, path: &Path) -> Result<(), DatastoreError> {
    write_atomic(path, format_thresholds(thr).as_bytes())
}
