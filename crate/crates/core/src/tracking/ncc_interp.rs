use std::collections::BTreeMap;
use std::error::Error;
use std::sync::Arc;

use super::densify::interpolated_entry;
use super::{Track, TrackEntry, TrackingError};
use crate::detection::{Detection, FrameIndex};
use crate::frames::{ncc_match_anchored, search_area, GrayImage};
use crate::geometry::BoundingBox;

/// Random access to grayscale frames by index.
pub trait FrameSource: Sync {
    fn frame(&self, index: FrameIndex) -> Result<Arc<GrayImage>, Box<dyn Error + Send + Sync>>;
}

impl FrameSource for BTreeMap<FrameIndex, Arc<GrayImage>> {
    fn frame(&self, index: FrameIndex) -> Result<Arc<GrayImage>, Box<dyn Error + Send + Sync>> {
        self.get(&index).cloned().ok_or_else(|| "not in frame set".into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NccConfig {
    /// Pixels added on every side of the hull of the two keyframe boxes.
    pub margin: f64,
}

impl Default for NccConfig {
    fn default() -> Self {
        NccConfig { margin: 20.0 }
    }
}

impl NccConfig {
    pub fn validate(&self) -> Result<(), TrackingError> {
        if !self.margin.is_finite() || self.margin < 0.0 {
            return Err(TrackingError::InvalidConfig("margin must be a non-negative number".into()));
        }
        Ok(())
    }
}

fn load(frames: &dyn FrameSource, f: FrameIndex) -> Result<Arc<GrayImage>, TrackingError> {
    frames.frame(f).map_err(|e| TrackingError::FrameUnavailable { frame: f, reason: e.to_string() })
}

// Integer pixel rectangle (x, y, w, h) of a box, or None when it leaves the frame.
fn pixel_rect(b: &BoundingBox, img: &GrayImage) -> Option<(usize, usize, usize, usize)> {
    let (x0, y0, x1, y1) = (b.x_min.round(), b.y_min.round(), b.x_max.round(), b.y_max.round());
    if x0 < 0.0 || y0 < 0.0 || x1 > img.width as f64 || y1 > img.height as f64 || (x1 - x0) * (y1 - y0) < 2.0 {
        return None;
    }
    Some((x0 as usize, y0 as usize, (x1 - x0) as usize, (y1 - y0) as usize))
}

// `a` shifted by (dx, dy) and resized about its center to the size
// interpolated between `a` and `b`; exact when the sizes agree
fn moved(a: &BoundingBox, b: &BoundingBox, t: f64, dx: f64, dy: f64) -> BoundingBox {
    let gx = (a.width() - b.width()) * t / 2.0;
    let gy = (a.height() - b.height()) * t / 2.0;
    BoundingBox { x_min: a.x_min + dx + gx, y_min: a.y_min + dy + gy, x_max: a.x_max + dx - gx, y_max: a.y_max + dy - gy }
}

fn fill_gap(
    a: &Detection,
    b: &Detection,
    frames: &dyn FrameSource,
    cfg: &NccConfig,
    out: &mut Vec<TrackEntry>,
) -> Result<(), TrackingError> {
    if b.frame_index - a.frame_index < 2 {
        return Ok(());
    }
    let key = load(frames, a.frame_index)?;
    let dims = (key.width, key.height);
    let rect = pixel_rect(&a.bbox, &key);
    let template = rect.map(|(x, y, w, h)| key.crop(x, y, w, h));

    let area = search_area(&a.bbox, &b.bbox, cfg.margin);
    let sx0 = area.x_min.floor().max(0.0) as usize;
    let sy0 = area.y_min.floor().max(0.0) as usize;
    let sx1 = (area.x_max.ceil().max(0.0) as usize).min(dims.0);
    let sy1 = (area.y_max.ceil().max(0.0) as usize).min(dims.1);
    let (acx, acy) = a.bbox.center();

    for f in a.frame_index + 1..b.frame_index {
        let linear = interpolated_entry(a, b, f);
        let (Some(template), Some((tx, ty, tw, th))) = (&template, rect) else {
            out.push(TrackEntry { detection: linear, flagged: true });
            continue;
        };
        let img = load(frames, f)?;
        if (img.width, img.height) != dims {
            return Err(TrackingError::FrameSize { frame: f, got: (img.width, img.height), want: dims });
        }
        // the template region lies inside the search area by construction
        debug_assert!(tx >= sx0 && ty >= sy0 && tx + tw <= sx1 && ty + th <= sy1);
        let search = img.crop(sx0, sy0, sx1 - sx0, sy1 - sy0);
        let (lcx, lcy) = linear.bbox.center();
        let anchor = (tx as f64 + (lcx - acx) - sx0 as f64, ty as f64 + (lcy - acy) - sy0 as f64);
        let m = ncc_match_anchored(template, &search, anchor).expect("template fits the search area");
        if m.degenerate {
            out.push(TrackEntry { detection: linear, flagged: true });
            continue;
        }
        let dx = (sx0 + m.offset_x) as f64 - tx as f64;
        let dy = (sy0 + m.offset_y) as f64 - ty as f64;
        let t = (f - a.frame_index) as f64 / (b.frame_index - a.frame_index) as f64;
        let bbox = moved(&a.bbox, &b.bbox, t, dx, dy);
        out.push(TrackEntry { detection: Detection { bbox, ..linear }, flagged: false });
    }
    Ok(())
}

/// Fill the frames between consecutive detected entries. Box size is
/// interpolated linearly; position is the best normalized cross-correlation
/// match of the earlier keyframe's box content within the hull of both boxes
/// grown by `margin`. Ties prefer the placement nearest the linear position.
///
/// When the template is clipped by the frame border or the correlation is
/// undefined (flat content) the entry keeps the linear box and is flagged.
pub fn densify_ncc(track: &Track, frames: &dyn FrameSource, cfg: &NccConfig) -> Result<Track, TrackingError> {
    cfg.validate()?;
    let detected: Vec<&TrackEntry> = track.detected_entries().collect();
    let mut entries = Vec::with_capacity(track.entries.len());
    for (i, entry) in detected.iter().enumerate() {
        entries.push((*entry).clone());
        if let Some(next) = detected.get(i + 1) {
            fill_gap(&entry.detection, &next.detection, frames, cfg, &mut entries)?;
        }
    }
    Ok(Track { id: track.id, entries, state: track.state })
}
