//! Synthetic scenarios, a mock detector and the end-to-end benchmark.
//!
//! All randomness comes from ChaCha8 (`rand_chacha`) seeded with
//! `seed_from_u64`. Scenario layout and the detector each draw from their
//! own seeded stream; sign textures use stream `sign id + 1` of the
//! scenario seed, so rendering any frame is independent of render order.

mod bench;
mod scenario;

pub use bench::{max_attainable_score, run_benchmark, run_pipeline, BenchmarkReport, PipelineConfig, DEFAULT_BUDGET_FPS};
pub use scenario::{dense_truth, generate_scenario, RenderedFrames, ScenarioSpec, SignTrack, SyntheticScenario};

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::detection::{ClassDistribution, Detection, FrameIndex};
use crate::geometry::BoundingBox;
use crate::kv::{KvError, KvFile};
use crate::refinement::RefineError;
use crate::scoring::ScoringError;
use crate::taxonomy::ClassCode;
use crate::tracking::TrackingError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("could not place sign {0} inside the frame without overlap")]
    Placement(usize),
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error(transparent)]
    Config(#[from] KvError),
    #[error(transparent)]
    Tracking(#[from] TrackingError),
    #[error(transparent)]
    Refine(#[from] RefineError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

/// Imperfections of the mock detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Chance that a visible sign is not reported on a keyframe.
    pub drop_probability: f64,
    /// Expected number of false positives per keyframe.
    pub fp_per_frame: f64,
    /// Each coordinate moves by a uniform offset in `[-j, j]`.
    pub position_jitter_px: f64,
    /// Probability mass moved from the true class to one sibling.
    pub class_confusion: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::none(0)
    }
}

impl NoiseModel {
    pub fn none(seed: u64) -> Self {
        NoiseModel { drop_probability: 0.0, fp_per_frame: 0.0, position_jitter_px: 0.0, class_confusion: 0.0, seed }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !unit(self.drop_probability) {
            return Err(HarnessError::InvalidNoise("drop_probability outside [0, 1]".into()));
        }
        if !unit(self.class_confusion) {
            return Err(HarnessError::InvalidNoise("class_confusion outside [0, 1]".into()));
        }
        if !nonneg(self.fp_per_frame) || !nonneg(self.position_jitter_px) {
            return Err(HarnessError::InvalidNoise("fp_per_frame and position_jitter_px must be non-negative".into()));
        }
        Ok(())
    }

    pub const KEYS: [&'static str; 5] = ["drop_probability", "fp_per_frame", "position_jitter_px", "class_confusion", "seed"];

    /// `key=value` text with any of [`NoiseModel::KEYS`]; missing keys keep
    /// their zero defaults.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let kv = KvFile::parse(text)?;
        kv.restrict(&Self::KEYS)?;
        let mut n = NoiseModel::default();
        if let Some(v) = kv.get("drop_probability")? {
            n.drop_probability = v;
        }
        if let Some(v) = kv.get("fp_per_frame")? {
            n.fp_per_frame = v;
        }
        if let Some(v) = kv.get("position_jitter_px")? {
            n.position_jitter_px = v;
        }
        if let Some(v) = kv.get("class_confusion")? {
            n.class_confusion = v;
        }
        if let Some(v) = kv.get("seed")? {
            n.seed = v;
        }
        n.validate()?;
        Ok(n)
    }
}

/// Class that absorbs confused mass: a pool member with the same parent,
/// else one with the same top-level category, else any other member.
fn sibling_candidates(code: &ClassCode, pool: &[ClassCode]) -> Vec<ClassCode> {
    let others: Vec<ClassCode> = pool.iter().copied().filter(|c| c != code).collect();
    let same_parent: Vec<ClassCode> = others.iter().copied().filter(|c| c.parent().is_some() && c.parent() == code.parent()).collect();
    if !same_parent.is_empty() {
        return same_parent;
    }
    let same_top: Vec<ClassCode> = others.iter().copied().filter(|c| c.truncate(1) == code.truncate(1)).collect();
    if !same_top.is_empty() {
        return same_top;
    }
    others
}

fn jitter(rng: &mut ChaCha8Rng, b: &BoundingBox, j: f64) -> BoundingBox {
    if j == 0.0 {
        return *b;
    }
    let mut v = [b.x_min, b.y_min, b.x_max, b.y_max];
    for x in &mut v {
        *x += rng.random_range(-j..=j);
    }
    BoundingBox { x_min: v[0].min(v[2]), y_min: v[1].min(v[3]), x_max: v[0].max(v[2]), y_max: v[1].max(v[3]) }
}

/// Keyframe detections for frames `0, stride, 2*stride, ...`. Every
/// keyframe is present in the map, possibly with no detections.
///
/// Per visible sign: dropped with `drop_probability`, else a jittered box
/// with `1 - class_confusion` on the true class and `class_confusion` on a
/// random sibling, plus the sign's data and temporary flag. False positives
/// follow, Poisson-distributed, with uniform position, size and class and a
/// uniform confidence in `[0.3, 1]`.
pub fn mock_detector(
    scenario: &SyntheticScenario,
    noise: &NoiseModel,
    stride: u32,
) -> Result<BTreeMap<FrameIndex, Vec<Detection>>, HarnessError> {
    noise.validate()?;
    if stride == 0 {
        return Err(HarnessError::InvalidNoise("keyframe stride must be positive".into()));
    }
    let spec = &scenario.spec;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let poisson = if noise.fp_per_frame > 0.0 {
        Some(Poisson::new(noise.fp_per_frame).map_err(|e| HarnessError::InvalidNoise(e.to_string()))?)
    } else {
        None
    };
    let mut out = BTreeMap::new();
    for f in (0..spec.frames).step_by(stride as usize) {
        let mut dets = Vec::new();
        for sign in scenario.signs.iter().filter(|s| s.visible(f)) {
            if noise.drop_probability > 0.0 && rng.random_bool(noise.drop_probability) {
                continue;
            }
            let bbox = jitter(&mut rng, &sign.box_at(f), noise.position_jitter_px);
            let c = noise.class_confusion;
            let dist = if c > 0.0 {
                let sibs = sibling_candidates(&sign.code, &spec.classes);
                if sibs.is_empty() {
                    ClassDistribution::certain(sign.code)
                } else {
                    let sib = sibs[rng.random_range(0..sibs.len())];
                    ClassDistribution::from_pairs([(sign.code, 1.0 - c), (sib, c)]).expect("valid split")
                }
            } else {
                ClassDistribution::certain(sign.code)
            };
            dets.push(Detection::new(f, bbox, dist).with_data(sign.associated_data.clone()).with_temporary(Some(sign.temporary)));
        }
        let n_fp = poisson.as_ref().map_or(0, |p| p.sample(&mut rng) as usize);
        for _ in 0..n_fp {
            let w = rng.random_range(spec.min_size..=spec.max_size);
            let h = rng.random_range(spec.min_size..=spec.max_size);
            let x = rng.random_range(0.0..=(spec.width as f64 - w));
            let y = rng.random_range(0.0..=(spec.height as f64 - h));
            let code = spec.classes[rng.random_range(0..spec.classes.len())];
            let p = rng.random_range(0.3..=1.0);
            let dist = ClassDistribution::single(code, p).expect("probability in range");
            dets.push(Detection::new(f, BoundingBox { x_min: x, y_min: y, x_max: x + w, y_max: y + h }, dist));
        }
        out.insert(f, dets);
    }
    Ok(out)
}
