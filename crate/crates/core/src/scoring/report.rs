use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;

use super::{match_frame, MatchResult, ScoringConfig, ScoringError};
use crate::detection::{Detection, FrameAnnotations, FrameIndex};
use crate::taxonomy::ClassCode;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameScore {
    pub frame_index: FrameIndex,
    pub tp_points: f64,
    pub tp_count: usize,
    pub fp_count: usize,
    pub ignored: usize,
    pub missed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassScore {
    pub tp_count: usize,
    pub tp_points: f64,
    pub missed: usize,
    /// False positives whose best predicted class is this code.
    pub fp_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub total: f64,
    pub tp_points: f64,
    pub tp_count: usize,
    pub fp_count: usize,
    pub ignored: usize,
    pub missed: usize,
    pub fp_penalty: f64,
    pub frames: Vec<FrameScore>,
    pub classes: BTreeMap<ClassCode, ClassScore>,
}

/// Score detections against sparse annotations.
///
/// Only frames marked annotated contribute; detections on any other frame
/// are discarded without penalty. Frames are matched in parallel and the
/// results are summed in frame order, so the report is deterministic.
pub fn score_dataset(
    detections: &BTreeMap<FrameIndex, Vec<Detection>>,
    annotations: &[FrameAnnotations],
    cfg: &ScoringConfig,
) -> Result<ScoreReport, ScoringError> {
    cfg.validate()?;
    let mut seen = HashSet::new();
    let mut frames: Vec<&FrameAnnotations> = Vec::new();
    for fa in annotations {
        if !seen.insert(fa.frame_index) {
            return Err(ScoringError::DuplicateFrame(fa.frame_index));
        }
        if fa.annotated {
            frames.push(fa);
        }
    }
    frames.sort_by_key(|fa| fa.frame_index);

    let empty: Vec<Detection> = Vec::new();
    let matched: Vec<(&FrameAnnotations, &[Detection], MatchResult)> = frames
        .par_iter()
        .map(|fa| {
            let dets = detections.get(&fa.frame_index).unwrap_or(&empty);
            match_frame(dets, fa, cfg).map(|r| (*fa, dets.as_slice(), r))
        })
        .collect::<Result<_, _>>()?;

    let mut report = ScoreReport {
        total: 0.0,
        tp_points: 0.0,
        tp_count: 0,
        fp_count: 0,
        ignored: 0,
        missed: 0,
        fp_penalty: cfg.fp_penalty,
        frames: Vec::with_capacity(matched.len()),
        classes: BTreeMap::new(),
    };
    for (fa, dets, r) in matched {
        let fs = FrameScore {
            frame_index: fa.frame_index,
            tp_points: r.tp_points(),
            tp_count: r.true_positives.len(),
            fp_count: r.fp_count(),
            ignored: r.ignored.len(),
            missed: r.missed.len(),
        };
        for tp in &r.true_positives {
            let cs = report.classes.entry(fa.signs[tp.ground_truth].code).or_default();
            cs.tp_count += 1;
            cs.tp_points += tp.score;
        }
        for &gi in &r.missed {
            report.classes.entry(fa.signs[gi].code).or_default().missed += 1;
        }
        for fp in &r.false_positives {
            report.classes.entry(dets[fp.detection].best_class()).or_default().fp_count += 1;
        }
        report.tp_points += fs.tp_points;
        report.tp_count += fs.tp_count;
        report.fp_count += fs.fp_count;
        report.ignored += fs.ignored;
        report.missed += fs.missed;
        report.frames.push(fs);
    }
    report.total = report.tp_points - cfg.fp_penalty * report.fp_count as f64;
    Ok(report)
}

impl ScoreReport {
    /// Machine-readable per-frame records.
    pub fn to_records(&self) -> String {
        let mut s = String::from("icevision-kit/v1 score\n");
        s.push_str("# frame_index tp_points fp_count ignored missed\n");
        for f in &self.frames {
            let _ = writeln!(s, "{} {:.6} {} {} {}", f.frame_index, f.tp_points, f.fp_count, f.ignored, f.missed);
        }
        let _ = writeln!(
            s,
            "# total {:.6} tp_points {:.6} tp {} fp {} ignored {} missed {}",
            self.total, self.tp_points, self.tp_count, self.fp_count, self.ignored, self.missed
        );
        s
    }

    /// Human-readable per-class table followed by the totals.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<10} {:>6} {:>10} {:>6} {:>6}", "class", "tp", "points", "missed", "fp");
        for (code, cs) in &self.classes {
            let _ = writeln!(s, "{:<10} {:>6} {:>10.3} {:>6} {:>6}", code.to_string(), cs.tp_count, cs.tp_points, cs.missed, cs.fp_count);
        }
        let _ = writeln!(s, "frames scored:   {}", self.frames.len());
        let _ = writeln!(s, "true positives:  {} ({:.6} points)", self.tp_count, self.tp_points);
        let _ = writeln!(s, "false positives: {} ({:.6} penalty points)", self.fp_count, self.fp_penalty * self.fp_count as f64);
        let _ = writeln!(s, "ignored:         {}", self.ignored);
        let _ = writeln!(s, "missed:          {}", self.missed);
        let _ = writeln!(s, "total:           {:.6}", self.total);
        s
    }
}
