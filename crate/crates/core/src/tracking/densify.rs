use super::{Track, TrackEntry};
use crate::detection::{Detection, FrameIndex, Source};
use crate::geometry::lerp_unchecked;

/// Entry for frame `f` between detected entries `a` and `b`; class data is
/// copied from `a`.
pub(super) fn interpolated_entry(a: &Detection, b: &Detection, f: FrameIndex) -> Detection {
    let t = (f - a.frame_index) as f64 / (b.frame_index - a.frame_index) as f64;
    Detection { frame_index: f, bbox: lerp_unchecked(&a.bbox, &b.bbox, t), source: Source::Interpolated, ..a.clone() }
}

/// Fill every frame between consecutive detected entries, up to
/// `last_frame`, with linearly interpolated boxes. Existing interpolated
/// entries are rebuilt; detected entries are kept as they are. Nothing is
/// extrapolated past the first or last detected entry.
pub fn densify_linear(track: &Track, last_frame: FrameIndex) -> Track {
    let detected: Vec<&TrackEntry> = track.detected_entries().collect();
    let mut entries = Vec::with_capacity(track.entries.len());
    for (i, entry) in detected.iter().enumerate() {
        entries.push((*entry).clone());
        let Some(next) = detected.get(i + 1) else { break };
        let (a, b) = (&entry.detection, &next.detection);
        for f in a.frame_index + 1..b.frame_index {
            if f > last_frame {
                break;
            }
            entries.push(TrackEntry { detection: interpolated_entry(a, b, f), flagged: false });
        }
    }
    Track { id: track.id, entries, state: track.state }
}
