//! Scoring, tracking and post-processing toolkit for traffic-sign detection
//! on raw video sequences.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`] and [`detection`]: boxes, IoU, and the per-frame record types.
//! - [`taxonomy`]: hierarchical dot-separated sign codes (`3.24`, `5.19.1`).
//! - [`scoring`]: the competition metric (online and offline stage rules).
//! - [`tracking`]: IoU tracker over keyframe detections, linear and
//!   cross-correlation densification of in-between frames.
//! - [`refinement`]: track-wide class averaging with superclass fallback and
//!   grid-search threshold tuning.
//! - [`frames`]: binary PNM decoding, bilinear demosaicing, histogram
//!   equalization, cropping, and normalized cross-correlation.
//! - [`datastore`]: text record formats for annotations, detections, tracks
//!   and sequence manifests.
//! - [`harness`]: deterministic synthetic scenarios, a mock detector and the
//!   end-to-end benchmark.

pub mod datastore;
pub mod detection;
pub mod frames;
pub mod geometry;
pub mod harness;
pub mod kv;
pub mod refinement;
pub mod scoring;
pub mod taxonomy;
pub mod tracking;

pub use detection::{group_by_frame, ClassDistribution, Detection, FrameAnnotations, FrameIndex, GroundTruthSign, Source};
pub use geometry::BoundingBox;
pub use taxonomy::{ClassCode, Taxonomy};
