//! Detect-every-N-frames tracking.
//!
//! The detector runs on keyframes only. [`Tracker`] chains keyframe
//! detections into tracks by IoU with each track's last box, and the
//! densifiers fill the frames in between: [`densify_linear`] by linear box
//! interpolation, [`densify_ncc`] by interpolating the size and locating the
//! position with normalized cross-correlation.

mod densify;
mod ncc_interp;

pub use densify::densify_linear;
pub use ncc_interp::{densify_ncc, FrameSource, NccConfig};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::detection::{Detection, FrameIndex, Source};
use crate::geometry::{iou, BoundingBox};
use crate::kv::{KvError, KvFile};

#[derive(Debug, Error)]
pub enum TrackingError {
    #[error("frame {frame} is not after the previous keyframe {previous}")]
    OutOfOrder { frame: FrameIndex, previous: FrameIndex },
    #[error("detection on frame {found} passed to frame {expected}")]
    FrameMismatch { expected: FrameIndex, found: FrameIndex },
    #[error("invalid tracker configuration: {0}")]
    InvalidConfig(String),
    #[error("frame {frame} unavailable: {reason}")]
    FrameUnavailable { frame: FrameIndex, reason: String },
    #[error("frame {frame} is {got:?}, expected {want:?}")]
    FrameSize { frame: FrameIndex, got: (usize, usize), want: (usize, usize) },
    #[error(transparent)]
    Config(#[from] KvError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    /// Minimum IoU between a track's last box and a detection to extend it.
    pub iou_threshold: f64,
    /// The detector runs on every `keyframe_stride`-th frame.
    pub keyframe_stride: u32,
    /// Consecutive unmatched keyframes a track survives.
    pub max_missed_keyframes: u32,
    /// Shorter tracks are dropped from [`run_tracker`] output.
    pub min_track_length: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig { iou_threshold: 0.1, keyframe_stride: 3, max_missed_keyframes: 0, min_track_length: 1 }
    }
}

impl TrackerConfig {
    pub const KEYS: [&'static str; 5] = ["iou_threshold", "keyframe_stride", "max_missed_keyframes", "min_track_length", "ncc_margin"];

    /// Tracker and cross-correlation settings from `key=value` text with
    /// any of [`TrackerConfig::KEYS`]. Missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<(TrackerConfig, NccConfig), TrackingError> {
        let kv = KvFile::parse(text)?;
        kv.restrict(&Self::KEYS)?;
        let mut cfg = TrackerConfig::default();
        let mut ncc = NccConfig::default();
        if let Some(v) = kv.get("iou_threshold")? {
            cfg.iou_threshold = v;
        }
        if let Some(v) = kv.get("keyframe_stride")? {
            cfg.keyframe_stride = v;
        }
        if let Some(v) = kv.get("max_missed_keyframes")? {
            cfg.max_missed_keyframes = v;
        }
        if let Some(v) = kv.get("min_track_length")? {
            cfg.min_track_length = v;
        }
        if let Some(v) = kv.get("ncc_margin")? {
            ncc.margin = v;
        }
        cfg.validate()?;
        ncc.validate()?;
        Ok((cfg, ncc))
    }

    pub fn validate(&self) -> Result<(), TrackingError> {
        if !self.iou_threshold.is_finite() || self.iou_threshold < 0.0 {
            return Err(TrackingError::InvalidConfig("iou_threshold must be a non-negative number".into()));
        }
        if self.keyframe_stride == 0 {
            return Err(TrackingError::InvalidConfig("keyframe_stride must be positive".into()));
        }
        if self.min_track_length == 0 {
            return Err(TrackingError::InvalidConfig("min_track_length must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackState {
    Active,
    Finished,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackEntry {
    pub detection: Detection,
    /// Set on interpolated entries whose position could not be established
    /// by correlation (flat image content or a clipped template); such
    /// entries hold the linear position.
    pub flagged: bool,
}

impl TrackEntry {
    pub fn detected(detection: Detection) -> Self {
        TrackEntry { detection, flagged: false }
    }

    pub fn frame_index(&self) -> FrameIndex {
        self.detection.frame_index
    }

    pub fn is_detected(&self) -> bool {
        self.detection.source == Source::Detected
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub entries: Vec<TrackEntry>,
    pub state: TrackState,
}

impl Track {
    pub fn last_box(&self) -> &BoundingBox {
        &self.entries.last().expect("tracks are never empty").detection.bbox
    }

    pub fn first_frame(&self) -> FrameIndex {
        self.entries[0].frame_index()
    }

    pub fn last_frame(&self) -> FrameIndex {
        self.entries.last().expect("tracks are never empty").frame_index()
    }

    pub fn detected_entries(&self) -> impl Iterator<Item = &TrackEntry> {
        self.entries.iter().filter(|e| e.is_detected())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Sequential IoU tracker over keyframes.
#[derive(Debug)]
pub struct Tracker {
    cfg: TrackerConfig,
    // active tracks in creation order, with consecutive missed keyframes
    active: Vec<(Track, u32)>,
    next_id: u64,
    last_frame: Option<FrameIndex>,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig) -> Result<Self, TrackingError> {
        cfg.validate()?;
        Ok(Tracker { cfg, active: Vec::new(), next_id: 0, last_frame: None })
    }

    pub fn active_tracks(&self) -> impl Iterator<Item = &Track> {
        self.active.iter().map(|(t, _)| t)
    }

    /// Feed one keyframe and return the tracks that finished on it.
    ///
    /// `(track, detection)` pairs with positive IoU at or above the threshold
    /// are taken greedily by descending IoU, ties by track age then detection
    /// order. Unassigned detections open new tracks; a track left unassigned
    /// for more than `max_missed_keyframes` keyframes finishes.
    pub fn step(&mut self, frame: FrameIndex, detections: Vec<Detection>) -> Result<Vec<Track>, TrackingError> {
        if let Some(previous) = self.last_frame {
            if frame <= previous {
                return Err(TrackingError::OutOfOrder { frame, previous });
            }
        }
        if let Some(d) = detections.iter().find(|d| d.frame_index != frame) {
            return Err(TrackingError::FrameMismatch { expected: frame, found: d.frame_index });
        }
        self.last_frame = Some(frame);

        let mut pairs = Vec::new();
        for (ti, (track, _)) in self.active.iter().enumerate() {
            let last = track.last_box();
            for (di, det) in detections.iter().enumerate() {
                let v = iou(last, &det.bbox);
                if v > 0.0 && v >= self.cfg.iou_threshold {
                    pairs.push((ti, di, v));
                }
            }
        }
        pairs.sort_by(|a, b| b.2.total_cmp(&a.2));

        let mut assigned: Vec<Option<usize>> = vec![None; self.active.len()];
        let mut det_taken = vec![false; detections.len()];
        for &(ti, di, _) in &pairs {
            if assigned[ti].is_none() && !det_taken[di] {
                assigned[ti] = Some(di);
                det_taken[di] = true;
            }
        }

        let mut slots: Vec<Option<Detection>> = detections.into_iter().map(Some).collect();
        let mut finished = Vec::new();
        let mut survivors = Vec::with_capacity(self.active.len());
        for ((mut track, missed), a) in std::mem::take(&mut self.active).into_iter().zip(assigned) {
            match a {
                Some(di) => {
                    let det = slots[di].take().expect("each detection assigned once");
                    track.entries.push(TrackEntry::detected(det));
                    survivors.push((track, 0));
                }
                None if missed + 1 > self.cfg.max_missed_keyframes => {
                    track.state = TrackState::Finished;
                    finished.push(track);
                }
                None => survivors.push((track, missed + 1)),
            }
        }
        for det in slots.into_iter().flatten() {
            let id = self.next_id;
            self.next_id += 1;
            survivors.push((Track { id, entries: vec![TrackEntry::detected(det)], state: TrackState::Active }, 0));
        }
        self.active = survivors;
        Ok(finished)
    }

    /// Finish every remaining track.
    pub fn finish(self) -> Vec<Track> {
        self.active
            .into_iter()
            .map(|(mut t, _)| {
                t.state = TrackState::Finished;
                t
            })
            .collect()
    }
}

/// Track keyframe detections in ascending frame order. Tracks come back
/// sorted by id, i.e. by creation order.
pub fn run_tracker(keyframes: &BTreeMap<FrameIndex, Vec<Detection>>, cfg: &TrackerConfig) -> Result<Vec<Track>, TrackingError> {
    let mut tracker = Tracker::new(*cfg)?;
    let mut out = Vec::new();
    for (&frame, dets) in keyframes {
        out.extend(tracker.step(frame, dets.clone())?);
    }
    out.extend(tracker.finish());
    out.retain(|t| t.len() >= cfg.min_track_length);
    out.sort_by_key(|t| t.id);
    Ok(out)
}

/// Keep only detections on frames that are multiples of `stride`.
pub fn select_keyframes(detections: &BTreeMap<FrameIndex, Vec<Detection>>, stride: u32) -> BTreeMap<FrameIndex, Vec<Detection>> {
    detections.iter().filter(|(&f, _)| stride > 0 && f % stride == 0).map(|(&f, d)| (f, d.clone())).collect()
}
