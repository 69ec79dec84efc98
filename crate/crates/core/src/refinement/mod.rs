//! Track-wide class refinement.
//!
//! Per-frame class probabilities along a track are averaged and a single
//! class is chosen for the whole track. When no specific class is confident
//! enough, probability mass is pooled by second-level and then top-level
//! category. The per-level thresholds are tuned by exhaustive grid search.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::detection::{group_by_frame, ClassDistribution, Detection, FrameAnnotations};
use crate::scoring::{score_dataset, ScoringConfig, ScoringError};
use crate::taxonomy::ClassCode;
use crate::tracking::Track;

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("track {0} has no detected entries")]
    NoDetectedEntries(u64),
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("grid level {0} has no candidate values")]
    EmptyGrid(&'static str),
    #[error("malformed threshold list {0:?}")]
    MalformedList(String),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

/// Acceptance thresholds for the three category levels. A level accepts
/// when its best probability is at least the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelThresholds {
    pub specific: f64,
    pub level2: f64,
    pub top: f64,
}

impl Default for LevelThresholds {
    fn default() -> Self {
        LevelThresholds { specific: 0.5, level2: 0.5, top: 0.5 }
    }
}

impl LevelThresholds {
    pub fn new(specific: f64, level2: f64, top: f64) -> Result<Self, RefineError> {
        let t = LevelThresholds { specific, level2, top };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), RefineError> {
        for v in [self.specific, self.level2, self.top] {
            if !(0.0..=1.0).contains(&v) {
                return Err(RefineError::InvalidThreshold(v));
            }
        }
        Ok(())
    }

    fn key(&self) -> [f64; 3] {
        [self.specific, self.level2, self.top]
    }
}

impl fmt::Display for LevelThresholds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6} {:.6} {:.6}", self.specific, self.level2, self.top)
    }
}

/// Mean distribution over the detected entries of a track; a class missing
/// from an entry counts as zero there.
pub fn average_track_distribution(track: &Track) -> Result<ClassDistribution, RefineError> {
    let mut sums: BTreeMap<ClassCode, f64> = BTreeMap::new();
    let mut n = 0usize;
    for e in track.detected_entries() {
        n += 1;
        for (&c, &p) in e.detection.distribution.iter() {
            *sums.entry(c).or_insert(0.0) += p;
        }
    }
    if n == 0 {
        return Err(RefineError::NoDetectedEntries(track.id));
    }
    for v in sums.values_mut() {
        *v /= n as f64;
    }
    Ok(ClassDistribution::from_map(sums))
}

// Best (code, mass) in canonical order; ties keep the smaller code.
fn argmax(m: &BTreeMap<ClassCode, f64>) -> Option<(ClassCode, f64)> {
    let mut best: Option<(ClassCode, f64)> = None;
    for (&c, &p) in m {
        if best.is_none_or(|(_, bp)| p > bp) {
            best = Some((c, p));
        }
    }
    best
}

/// Mass pooled by ancestor at `level`. Codes shallower than `level` do not
/// contribute.
pub fn level_sums(dist: &ClassDistribution, level: usize) -> BTreeMap<ClassCode, f64> {
    let mut m = BTreeMap::new();
    for (c, &p) in dist.iter() {
        if let Some(a) = c.truncate(level) {
            *m.entry(a).or_insert(0.0) += p;
        }
    }
    m
}

/// Pick the most probable specific class if it reaches `thr.specific`, else
/// the best second-level category if its pooled mass reaches `thr.level2`,
/// else the best top-level category against `thr.top`. Returns the code and
/// its (pooled) probability, or `None` when every level fails.
pub fn hierarchical_select(dist: &ClassDistribution, thr: &LevelThresholds) -> Option<(ClassCode, f64)> {
    if let Some((c, p)) = argmax(dist.as_map()) {
        if p >= thr.specific {
            return Some((c, p));
        }
    }
    for (level, t) in [(2, thr.level2), (1, thr.top)] {
        if let Some((c, p)) = argmax(&level_sums(dist, level)) {
            if p >= t {
                return Some((c, p));
            }
        }
    }
    None
}

// Majority value; ties go to the value seen first.
fn vote<T: PartialEq + Clone>(values: impl Iterator<Item = T>) -> Option<T> {
    let mut counts: Vec<(T, usize)> = Vec::new();
    for v in values {
        match counts.iter_mut().find(|(x, _)| *x == v) {
            Some((_, n)) => *n += 1,
            None => counts.push((v, 1)),
        }
    }
    let mut best: Option<(T, usize)> = None;
    for (v, n) in counts {
        if best.as_ref().is_none_or(|(_, bn)| n > *bn) {
            best = Some((v, n));
        }
    }
    best.map(|(v, _)| v)
}

/// Majority associated data over the detected entries that carry any.
pub fn vote_associated_data(track: &Track) -> Option<String> {
    vote(track.detected_entries().filter_map(|e| e.detection.associated_data.clone()))
}

/// Majority temporary flag over the detected entries that carry one.
pub fn vote_temporary(track: &Track) -> Option<bool> {
    vote(track.detected_entries().filter_map(|e| e.detection.temporary))
}

fn emit(track: &Track, avg: &ClassDistribution, thr: &LevelThresholds) -> Vec<Detection> {
    let Some((code, p)) = hierarchical_select(avg, thr) else {
        return Vec::new();
    };
    let p = p.clamp(0.0, 1.0);
    let dist = ClassDistribution::single(code, p).expect("clamped probability");
    let data = vote_associated_data(track);
    let temporary = vote_temporary(track);
    track
        .entries
        .iter()
        .map(|e| Detection {
            frame_index: e.frame_index(),
            bbox: e.detection.bbox,
            distribution: dist.clone(),
            confidence: p,
            associated_data: data.clone(),
            temporary,
            source: e.detection.source,
        })
        .collect()
}

/// Relabel every entry of every accepted track with the track's selected
/// class. Rejected tracks emit nothing. Output follows track order, then
/// entry order.
pub fn refine_tracks(tracks: &[Track], thr: &LevelThresholds) -> Result<Vec<Detection>, RefineError> {
    thr.validate()?;
    let per_track: Vec<Vec<Detection>> =
        tracks.par_iter().map(|t| average_track_distribution(t).map(|avg| emit(t, &avg, thr))).collect::<Result<_, _>>()?;
    Ok(per_track.into_iter().flatten().collect())
}

/// Candidate values per level.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdGrid {
    pub specific: Vec<f64>,
    pub level2: Vec<f64>,
    pub top: Vec<f64>,
}

impl ThresholdGrid {
    pub fn uniform(values: &[f64]) -> Self {
        ThresholdGrid { specific: values.to_vec(), level2: values.to_vec(), top: values.to_vec() }
    }

    /// Comma-separated list of thresholds, e.g. `0.3,0.5,0.7`.
    pub fn parse_list(s: &str) -> Result<Vec<f64>, RefineError> {
        if s.trim().is_empty() {
            return Ok(Vec::new());
        }
        s.split(',')
            .map(|v| {
                let x = f64::from_str(v.trim()).map_err(|_| RefineError::MalformedList(s.to_string()))?;
                if !(0.0..=1.0).contains(&x) {
                    return Err(RefineError::InvalidThreshold(x));
                }
                Ok(x)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), RefineError> {
        for (name, values) in [("specific", &self.specific), ("level2", &self.level2), ("top", &self.top)] {
            if values.is_empty() {
                return Err(RefineError::EmptyGrid(name));
            }
            for &v in values {
                if !(0.0..=1.0).contains(&v) {
                    return Err(RefineError::InvalidThreshold(v));
                }
            }
        }
        Ok(())
    }

    /// Every triple, in lexicographic order of grid position.
    pub fn triples(&self) -> Vec<LevelThresholds> {
        let mut out = Vec::with_capacity(self.specific.len() * self.level2.len() * self.top.len());
        for &specific in &self.specific {
            for &level2 in &self.level2 {
                for &top in &self.top {
                    out.push(LevelThresholds { specific, level2, top });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub thresholds: LevelThresholds,
    pub score: f64,
    /// Total score of every evaluated triple, in grid order.
    pub evaluations: Vec<(LevelThresholds, f64)>,
}

/// Evaluate every threshold triple by refining `tracks` and scoring against
/// `annotations`. The best total wins; ties go to the lexicographically
/// smallest `(specific, level2, top)`. The winning score is recomputed from
/// scratch through [`refine_tracks`] and [`score_dataset`].
pub fn grid_search_thresholds(
    tracks: &[Track],
    annotations: &[FrameAnnotations],
    grid: &ThresholdGrid,
    cfg: &ScoringConfig,
) -> Result<GridSearchResult, RefineError> {
    grid.validate()?;
    let averages: Vec<ClassDistribution> = tracks.par_iter().map(average_track_distribution).collect::<Result<_, _>>()?;

    let evaluations: Vec<(LevelThresholds, f64)> = grid
        .triples()
        .into_par_iter()
        .map(|thr| {
            let dets: Vec<Detection> = tracks.iter().zip(&averages).flat_map(|(t, a)| emit(t, a, &thr)).collect();
            let report = score_dataset(&group_by_frame(dets), annotations, cfg)?;
            Ok((thr, report.total))
        })
        .collect::<Result<_, ScoringError>>()?;

    let (best, _) = evaluations
        .iter()
        .copied()
        .reduce(|a, b| {
            let better = b.1 > a.1 || (b.1 == a.1 && b.0.key().partial_cmp(&a.0.key()) == Some(std::cmp::Ordering::Less));
            if better {
                b
            } else {
                a
            }
        })
        .expect("grid is non-empty");

    let verified = score_dataset(&group_by_frame(refine_tracks(tracks, &best)?), annotations, cfg)?.total;
    Ok(GridSearchResult { thresholds: best, score: verified, evaluations })
}
