use std::cmp::Ordering;

use super::{k_multiplier, tp_base_score, ScoringConfig, ScoringError};
use crate::detection::{Detection, FrameAnnotations};
use crate::geometry::iou;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FpReason {
    /// No ground truth overlaps at the acceptance threshold.
    Unmatched,
    /// A qualifying ground truth exists but a better detection claimed it.
    Duplicate,
    /// Overlaps ground truth at the threshold, but the class is not acceptable.
    WrongClass,
}

impl FpReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            FpReason::Unmatched => "unmatched",
            FpReason::Duplicate => "duplicate",
            FpReason::WrongClass => "wrong_class",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruePositive {
    pub detection: usize,
    pub ground_truth: usize,
    pub iou: f64,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FalsePositive {
    pub detection: usize,
    pub reason: FpReason,
}

/// Outcome of matching one frame. Entries index into the detection slice and
/// the frame's sign list. `true_positives`, `false_positives` and `ignored`
/// partition the detections; `true_positives`, `missed` and
/// `ignored_ground_truth` partition the signs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchResult {
    pub true_positives: Vec<TruePositive>,
    pub false_positives: Vec<FalsePositive>,
    pub ignored: Vec<usize>,
    pub ignored_ground_truth: Vec<usize>,
    pub missed: Vec<usize>,
}

impl MatchResult {
    pub fn tp_points(&self) -> f64 {
        self.true_positives.iter().fold(0.0, |acc, tp| acc + tp.score)
    }

    pub fn fp_count(&self) -> usize {
        self.false_positives.len()
    }

    pub fn total(&self, cfg: &ScoringConfig) -> f64 {
        self.tp_points() - cfg.fp_penalty * self.fp_count() as f64
    }
}

/// Match one frame's detections against its ground truth.
///
/// All `(detection, sign)` pairs with `iou >= threshold` and an acceptable
/// class are taken greedily by descending IoU, ties by detection then sign
/// input order. Signs smaller than `min_area_px` never take part; a leftover
/// detection whose best overlap is such a sign is ignored. Every other
/// leftover detection is a false positive.
pub fn match_frame(dets: &[Detection], gts: &FrameAnnotations, cfg: &ScoringConfig) -> Result<MatchResult, ScoringError> {
    for d in dets {
        if d.frame_index != gts.frame_index {
            return Err(ScoringError::FrameMismatch { expected: gts.frame_index, found: d.frame_index });
        }
    }
    for g in &gts.signs {
        if g.frame_index != gts.frame_index {
            return Err(ScoringError::FrameMismatch { expected: gts.frame_index, found: g.frame_index });
        }
    }

    let signs = &gts.signs;
    let tiny: Vec<bool> = signs.iter().map(|g| g.bbox.area() < cfg.min_area_px).collect();
    let classes: Vec<_> = dets.iter().map(|d| d.best_class()).collect();

    let overlaps: Vec<Vec<f64>> = dets.iter().map(|d| signs.iter().map(|g| iou(&d.bbox, &g.bbox)).collect()).collect();

    let mut pairs = Vec::new();
    for (di, row) in overlaps.iter().enumerate() {
        for (gi, &v) in row.iter().enumerate() {
            if !tiny[gi] && v >= cfg.iou_threshold && cfg.class_acceptable(&classes[di], &signs[gi].code) {
                pairs.push((di, gi, v));
            }
        }
    }
    // stable sort keeps (det, gt) input order among equal IoU
    pairs.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap_or(Ordering::Equal));

    let mut det_used = vec![false; dets.len()];
    let mut gt_used = vec![false; signs.len()];
    let mut result = MatchResult::default();
    for &(di, gi, v) in &pairs {
        if det_used[di] || gt_used[gi] {
            continue;
        }
        det_used[di] = true;
        gt_used[gi] = true;
        let base = tp_base_score(v, cfg)?;
        let score = base * k_multiplier(&dets[di], &signs[gi], cfg);
        result.true_positives.push(TruePositive { detection: di, ground_truth: gi, iou: v, score });
    }
    result.true_positives.sort_by_key(|tp| tp.detection);

    for di in 0..dets.len() {
        if det_used[di] {
            continue;
        }
        let row = &overlaps[di];
        // best overlapping sign, first index on ties
        let best = row.iter().enumerate().fold(None::<(usize, f64)>, |acc, (gi, &v)| match acc {
            Some((_, bv)) if v <= bv => acc,
            _ => Some((gi, v)),
        });
        if let Some((gi, v)) = best {
            if tiny[gi] && v >= cfg.iou_threshold {
                result.ignored.push(di);
                continue;
            }
        }
        let had_candidate = pairs.iter().any(|p| p.0 == di);
        let reason = if had_candidate {
            FpReason::Duplicate
        } else if row.iter().enumerate().any(|(gi, &v)| !tiny[gi] && v >= cfg.iou_threshold) {
            FpReason::WrongClass
        } else {
            FpReason::Unmatched
        };
        result.false_positives.push(FalsePositive { detection: di, reason });
    }

    for gi in 0..signs.len() {
        if tiny[gi] {
            result.ignored_ground_truth.push(gi);
        } else if !gt_used[gi] {
            result.missed.push(gi);
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{ClassDistribution, GroundTruthSign};
    use crate::geometry::BoundingBox;
    use crate::scoring::Stage;
    use crate::taxonomy::ClassCode;

    fn c(s: &str) -> ClassCode {
        s.parse().unwrap()
    }

    fn bb(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1).unwrap()
    }

    fn det(b: BoundingBox, code: &str) -> Detection {
        Detection::new(7, b, ClassDistribution::certain(c(code)))
    }

    fn sign(b: BoundingBox, code: &str) -> GroundTruthSign {
        GroundTruthSign { frame_index: 7, bbox: b, code: c(code), associated_data: None, temporary: false }
    }

    #[test]
    fn duplicate_detection_is_fp() {
        let cfg = ScoringConfig::online();
        let frame = FrameAnnotations::annotated(7, vec![sign(bb(0., 0., 100., 100.), "3.24")]);
        let dets = [det(bb(0., 0., 100., 100.), "3.24"), det(bb(10., 10., 110., 110.), "3.24")];
        let r = match_frame(&dets, &frame, &cfg).unwrap();
        assert_eq!(r.true_positives.len(), 1);
        assert_eq!(r.true_positives[0].detection, 0);
        assert_eq!(r.true_positives[0].score, 1.0);
        assert_eq!(r.false_positives, vec![FalsePositive { detection: 1, reason: FpReason::Duplicate }]);
        assert_eq!(r.total(&cfg), -1.0);
        // order of detections does not change who wins
        let swapped = [dets[1].clone(), dets[0].clone()];
        let r = match_frame(&swapped, &frame, &cfg).unwrap();
        assert_eq!(r.true_positives[0].detection, 1);
        assert_eq!(r.false_positives[0].detection, 0);
    }

    #[test]
    fn tiny_ground_truth_is_ignored() {
        let cfg = ScoringConfig::online();
        let frame = FrameAnnotations::annotated(7, vec![sign(bb(0., 0., 9., 9.), "3.24")]);
        let r = match_frame(&[det(bb(0., 0., 9., 9.), "3.24")], &frame, &cfg).unwrap();
        assert_eq!(r.ignored, vec![0]);
        assert_eq!(r.ignored_ground_truth, vec![0]);
        assert!(r.missed.is_empty());
        assert_eq!(r.total(&cfg), 0.0);
    }

    #[test]
    fn empty_frame() {
        let cfg = ScoringConfig::online();
        let r = match_frame(&[], &FrameAnnotations::empty(7), &cfg).unwrap();
        assert_eq!(r, MatchResult::default());
        assert_eq!(r.total(&cfg), 0.0);
    }

    #[test]
    fn wrong_class_does_not_shield_gt() {
        let cfg = ScoringConfig::online();
        let frame = FrameAnnotations::annotated(7, vec![sign(bb(0., 0., 50., 50.), "3.24")]);
        let r = match_frame(&[det(bb(0., 0., 50., 50.), "3.25")], &frame, &cfg).unwrap();
        assert_eq!(r.false_positives, vec![FalsePositive { detection: 0, reason: FpReason::WrongClass }]);
        assert_eq!(r.missed, vec![0]);
    }

    #[test]
    fn superclass_only_offline() {
        let frame = FrameAnnotations::annotated(7, vec![sign(bb(0., 0., 50., 50.), "5.19.1")]);
        let dets = [det(bb(0., 0., 50., 50.), "5.19")];
        let online = match_frame(&dets, &frame, &ScoringConfig::online()).unwrap();
        assert_eq!(online.false_positives[0].reason, FpReason::WrongClass);
        let offline_cfg = ScoringConfig::offline();
        let offline = match_frame(&dets, &frame, &offline_cfg).unwrap();
        assert_eq!(offline.true_positives.len(), 1);
        assert_eq!(offline.true_positives[0].score, 1.0 + offline_cfg.k.k1_superclass);
        assert_eq!(offline_cfg.stage, Stage::Offline);
    }

    #[test]
    fn unmatched_far_away() {
        let cfg = ScoringConfig::offline();
        let frame = FrameAnnotations::annotated(7, vec![sign(bb(0., 0., 50., 50.), "1.1")]);
        let r = match_frame(&[det(bb(500., 500., 550., 550.), "1.1")], &frame, &cfg).unwrap();
        assert_eq!(r.false_positives[0].reason, FpReason::Unmatched);
        assert_eq!(r.total(&cfg), -2.0);
    }

    #[test]
    fn frame_mismatch() {
        let cfg = ScoringConfig::offline();
        let mut d = det(bb(0., 0., 50., 50.), "1.1");
        d.frame_index = 8;
        assert!(matches!(match_frame(&[d], &FrameAnnotations::empty(7), &cfg), Err(ScoringError::FrameMismatch { expected: 7, found: 8 })));
    }
}
