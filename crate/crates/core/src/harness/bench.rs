use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::{mock_detector, HarnessError, NoiseModel, SyntheticScenario};
use crate::detection::group_by_frame;
use crate::refinement::{refine_tracks, LevelThresholds};
use crate::scoring::{score_dataset, ScoreReport, ScoringConfig};
use crate::tracking::{densify_linear, run_tracker, Track, TrackerConfig};

/// 100 000 frames in five hours.
pub const DEFAULT_BUDGET_FPS: f64 = 100_000.0 / (5.0 * 3600.0);

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub tracker: TrackerConfig,
    pub thresholds: LevelThresholds,
    pub scoring: ScoringConfig,
    pub budget_fps: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            tracker: TrackerConfig::default(),
            thresholds: LevelThresholds::default(),
            scoring: ScoringConfig::offline(),
            budget_fps: DEFAULT_BUDGET_FPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub frames: u32,
    pub keyframes: usize,
    pub tracks: usize,
    /// Keyframe detections scored as they are (argmax class per box).
    pub raw: ScoreReport,
    /// Track, densify and refine, then score.
    pub refined: ScoreReport,
    /// Every annotated sign at its best multiplier.
    pub max_attainable: f64,
    /// Wall time of tracking, densification, refinement and scoring.
    pub elapsed: Duration,
    pub fps: f64,
    pub budget_fps: f64,
    pub meets_budget: bool,
}

impl BenchmarkReport {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "frames          {}", self.frames);
        let _ = writeln!(s, "keyframes       {}", self.keyframes);
        let _ = writeln!(s, "tracks          {}", self.tracks);
        let _ = writeln!(s, "max attainable  {:.6}", self.max_attainable);
        let _ = writeln!(s, "raw score       {:.6}  (tp {}, fp {})", self.raw.total, self.raw.tp_count, self.raw.fp_count);
        let _ = writeln!(s, "refined score   {:.6}  (tp {}, fp {})", self.refined.total, self.refined.tp_count, self.refined.fp_count);
        let _ = writeln!(s, "elapsed         {:.3} s", self.elapsed.as_secs_f64());
        let _ = writeln!(
            s,
            "throughput      {:.1} frames/s (budget {:.2}: {})",
            self.fps,
            self.budget_fps,
            if self.meets_budget { "met" } else { "missed" }
        );
        s
    }

    /// `key value` lines under an `icevision-kit/v1 benchmark` header.
    pub fn to_records(&self) -> String {
        let mut s = String::from("icevision-kit/v1 benchmark\n");
        let _ = writeln!(s, "frames {}", self.frames);
        let _ = writeln!(s, "keyframes {}", self.keyframes);
        let _ = writeln!(s, "tracks {}", self.tracks);
        let _ = writeln!(s, "max_attainable {:.6}", self.max_attainable);
        let _ = writeln!(s, "raw_score {:.6}", self.raw.total);
        let _ = writeln!(s, "refined_score {:.6}", self.refined.total);
        let _ = writeln!(s, "elapsed_s {:.6}", self.elapsed.as_secs_f64());
        let _ = writeln!(s, "fps {:.3}", self.fps);
        let _ = writeln!(s, "budget_fps {:.3}", self.budget_fps);
        let _ = writeln!(s, "meets_budget {}", self.meets_budget);
        s
    }
}

/// Sum of best-case multipliers over annotated signs at or above the
/// ignore area.
pub fn max_attainable_score(scenario: &SyntheticScenario, cfg: &ScoringConfig) -> f64 {
    scenario
        .annotations()
        .iter()
        .flat_map(|a| a.signs.iter())
        .filter(|g| g.bbox.area() >= cfg.min_area_px)
        .fold(0.0, |acc, g| acc + cfg.max_multiplier(g))
}

/// Track, densify and refine keyframe detections, then score them. Returns
/// the tracks alongside the report.
pub fn run_pipeline(
    keyframes: &std::collections::BTreeMap<crate::FrameIndex, Vec<crate::Detection>>,
    annotations: &[crate::FrameAnnotations],
    last_frame: crate::FrameIndex,
    cfg: &PipelineConfig,
) -> Result<(Vec<Track>, ScoreReport), HarnessError> {
    let tracks = run_tracker(keyframes, &cfg.tracker)?;
    let dense: Vec<Track> = tracks.par_iter().map(|t| densify_linear(t, last_frame)).collect();
    let refined = refine_tracks(&dense, &cfg.thresholds)?;
    let report = score_dataset(&group_by_frame(refined), annotations, &cfg.scoring)?;
    Ok((dense, report))
}

/// Run the mock detector on the scenario and score the raw keyframe output
/// and the post-processed output against the sparse annotations.
pub fn run_benchmark(scenario: &SyntheticScenario, noise: &NoiseModel, cfg: &PipelineConfig) -> Result<BenchmarkReport, HarnessError> {
    let annotations = scenario.annotations();
    let keyframes = mock_detector(scenario, noise, cfg.tracker.keyframe_stride)?;
    let raw = score_dataset(&keyframes, &annotations, &cfg.scoring)?;

    let start = Instant::now();
    let (tracks, refined) = run_pipeline(&keyframes, &annotations, scenario.spec.frames - 1, cfg)?;
    let elapsed = start.elapsed();

    let fps = scenario.spec.frames as f64 / elapsed.as_secs_f64().max(1e-9);
    Ok(BenchmarkReport {
        frames: scenario.spec.frames,
        keyframes: keyframes.len(),
        tracks: tracks.len(),
        raw,
        refined,
        max_attainable: max_attainable_score(scenario, &cfg.scoring),
        elapsed,
        fps,
        budget_fps: cfg.budget_fps,
        meets_budget: fps >= cfg.budget_fps,
    })
}
