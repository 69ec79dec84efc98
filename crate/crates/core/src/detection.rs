//! Per-frame detection and ground-truth records.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::geometry::BoundingBox;
use crate::taxonomy::ClassCode;

pub type FrameIndex = u32;

/// Slack allowed on the sum of a distribution.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("empty class distribution")]
    Empty,
    #[error("probability {prob} for {code} outside [0, 1]")]
    OutOfRange { code: ClassCode, prob: f64 },
    #[error("probabilities sum to {0}, above 1")]
    SumAboveOne(f64),
    #[error("class {0} listed twice")]
    DuplicateClass(ClassCode),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Detected,
    Interpolated,
}

/// Probability mass per class code, iterated in canonical code order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassDistribution(BTreeMap<ClassCode, f64>);

impl ClassDistribution {
    pub fn single(code: ClassCode, prob: f64) -> Result<Self, DistributionError> {
        Self::from_pairs([(code, prob)])
    }

    /// Certain single-class distribution.
    pub fn certain(code: ClassCode) -> Self {
        let mut m = BTreeMap::new();
        m.insert(code, 1.0);
        ClassDistribution(m)
    }

    pub fn from_pairs<I: IntoIterator<Item = (ClassCode, f64)>>(pairs: I) -> Result<Self, DistributionError> {
        let mut m = BTreeMap::new();
        for (code, prob) in pairs {
            if !(0.0..=1.0).contains(&prob) {
                return Err(DistributionError::OutOfRange { code, prob });
            }
            if m.insert(code, prob).is_some() {
                return Err(DistributionError::DuplicateClass(code));
            }
        }
        let d = ClassDistribution(m);
        d.validate()?;
        Ok(d)
    }

    /// Unvalidated construction for internally produced means and sums.
    pub(crate) fn from_map(m: BTreeMap<ClassCode, f64>) -> Self {
        ClassDistribution(m)
    }

    pub fn validate(&self) -> Result<(), DistributionError> {
        if self.0.is_empty() {
            return Err(DistributionError::Empty);
        }
        for (&code, &prob) in &self.0 {
            if !(0.0..=1.0).contains(&prob) {
                return Err(DistributionError::OutOfRange { code, prob });
            }
        }
        let sum = self.sum();
        if sum > 1.0 + PROBABILITY_SUM_TOLERANCE {
            return Err(DistributionError::SumAboveOne(sum));
        }
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.0.values().fold(0.0, |a, p| a + p)
    }

    pub fn get(&self, code: &ClassCode) -> f64 {
        self.0.get(code).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ClassCode, &f64)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Most probable class; ties go to the smallest code.
    pub fn best(&self) -> Option<(ClassCode, f64)> {
        let mut best: Option<(ClassCode, f64)> = None;
        for (&c, &p) in &self.0 {
            match best {
                Some((_, bp)) if p <= bp => {}
                _ => best = Some((c, p)),
            }
        }
        best
    }

    pub fn as_map(&self) -> &BTreeMap<ClassCode, f64> {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame_index: FrameIndex,
    pub bbox: BoundingBox,
    pub distribution: ClassDistribution,
    /// Probability of the best class.
    pub confidence: f64,
    pub associated_data: Option<String>,
    pub temporary: Option<bool>,
    pub source: Source,
}

impl Detection {
    pub fn new(frame_index: FrameIndex, bbox: BoundingBox, distribution: ClassDistribution) -> Self {
        let confidence = distribution.best().map_or(0.0, |(_, p)| p);
        Detection { frame_index, bbox, distribution, confidence, associated_data: None, temporary: None, source: Source::Detected }
    }

    pub fn with_data(mut self, data: Option<String>) -> Self {
        self.associated_data = data;
        self
    }

    pub fn with_temporary(mut self, temporary: Option<bool>) -> Self {
        self.temporary = temporary;
        self
    }

    pub fn with_source(mut self, source: Source) -> Self {
        self.source = source;
        self
    }

    pub fn best_class(&self) -> ClassCode {
        self.distribution.best().expect("detections carry a non-empty distribution").0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthSign {
    pub frame_index: FrameIndex,
    pub bbox: BoundingBox,
    pub code: ClassCode,
    pub associated_data: Option<String>,
    pub temporary: bool,
}

/// Ground truth for one frame. `annotated == false` means nobody looked at
/// the frame, which is different from an annotated frame without signs.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameAnnotations {
    pub frame_index: FrameIndex,
    pub signs: Vec<GroundTruthSign>,
    pub annotated: bool,
}

impl FrameAnnotations {
    pub fn annotated(frame_index: FrameIndex, signs: Vec<GroundTruthSign>) -> Self {
        FrameAnnotations { frame_index, signs, annotated: true }
    }

    pub fn empty(frame_index: FrameIndex) -> Self {
        FrameAnnotations { frame_index, signs: Vec::new(), annotated: true }
    }
}

/// Bucket detections by frame, keeping their relative order.
pub fn group_by_frame(detections: impl IntoIterator<Item = Detection>) -> BTreeMap<FrameIndex, Vec<Detection>> {
    let mut m: BTreeMap<FrameIndex, Vec<Detection>> = BTreeMap::new();
    for d in detections {
        m.entry(d.frame_index).or_default().push(d);
    }
    m
}
