//! The competition metric.
//!
//! A true positive earns a base score that grows with IoU from zero at the
//! stage's acceptance threshold up to one at `full_score_iou`:
//!
//! ```text
//! s = 1                                           if iou > full_score_iou
//! s = ((iou - thr) / (full_score_iou - thr))^0.25 otherwise
//! ```
//!
//! The online stage accepts exact class codes at `iou >= 0.5`. The offline
//! stage accepts exact or superclass codes at `iou >= 0.3` and multiplies the
//! base score by `max(0, 1 + k1 + k2 + k3)`. Every false positive costs
//! `fp_penalty` points; ground-truth boxes below `min_area_px` are ignored.

mod matching;
mod report;

pub use matching::{match_frame, FalsePositive, FpReason, MatchResult, TruePositive};
pub use report::{score_dataset, ClassScore, FrameScore, ScoreReport};

use thiserror::Error;

use crate::detection::{Detection, FrameIndex, GroundTruthSign};
use crate::kv::{KvError, KvFile};
use crate::taxonomy::ClassCode;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoringError {
    #[error("IoU {iou} is below the acceptance threshold {threshold}")]
    BelowThreshold { iou: f64, threshold: f64 },
    #[error("detection on frame {found} passed to frame {expected}")]
    FrameMismatch { expected: FrameIndex, found: FrameIndex },
    #[error("frame {0} is annotated more than once")]
    DuplicateFrame(FrameIndex),
    #[error("invalid scoring configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Config(#[from] KvError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Online,
    Offline,
}

impl std::str::FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "online" => Ok(Stage::Online),
            "offline" => Ok(Stage::Offline),
            _ => Err(format!("unknown stage {s:?}")),
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Online => "online",
            Stage::Offline => "offline",
        })
    }
}

/// Offline-stage bonus terms. `k1` rewards the class code, `k2` the
/// associated data (e.g. a speed value) and `k3` the temporary-sign flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KCoefficients {
    pub k1_exact: f64,
    pub k1_superclass: f64,
    pub k2_match: f64,
    pub k2_mismatch: f64,
    pub k2_absent: f64,
    pub k3_match: f64,
    pub k3_mismatch: f64,
    pub k3_absent: f64,
}

impl Default for KCoefficients {
    fn default() -> Self {
        KCoefficients {
            k1_exact: 0.3,
            k1_superclass: 0.0,
            k2_match: 0.4,
            k2_mismatch: -0.5,
            k2_absent: 0.0,
            k3_match: 0.3,
            k3_mismatch: -0.5,
            k3_absent: 0.0,
        }
    }
}

impl KCoefficients {
    pub fn zero() -> Self {
        KCoefficients {
            k1_exact: 0.0,
            k1_superclass: 0.0,
            k2_match: 0.0,
            k2_mismatch: 0.0,
            k2_absent: 0.0,
            k3_match: 0.0,
            k3_mismatch: 0.0,
            k3_absent: 0.0,
        }
    }

    fn all(&self) -> [f64; 8] {
        [
            self.k1_exact,
            self.k1_superclass,
            self.k2_match,
            self.k2_mismatch,
            self.k2_absent,
            self.k3_match,
            self.k3_mismatch,
            self.k3_absent,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoringConfig {
    pub stage: Stage,
    pub iou_threshold: f64,
    pub full_score_iou: f64,
    pub formula_exponent: f64,
    pub fp_penalty: f64,
    pub min_area_px: f64,
    pub k: KCoefficients,
}

const CONFIG_KEYS: &[&str] = &[
    "stage",
    "iou_threshold",
    "full_score_iou",
    "formula_exponent",
    "fp_penalty",
    "min_area_px",
    "k1_exact",
    "k1_superclass",
    "k2_match",
    "k2_mismatch",
    "k2_absent",
    "k3_match",
    "k3_mismatch",
    "k3_absent",
];

impl ScoringConfig {
    pub fn online() -> Self {
        ScoringConfig {
            stage: Stage::Online,
            iou_threshold: 0.5,
            full_score_iou: 0.85,
            formula_exponent: 0.25,
            fp_penalty: 2.0,
            min_area_px: 100.0,
            k: KCoefficients::default(),
        }
    }

    pub fn offline() -> Self {
        ScoringConfig { stage: Stage::Offline, iou_threshold: 0.3, ..Self::online() }
    }

    pub fn for_stage(stage: Stage) -> Self {
        match stage {
            Stage::Online => Self::online(),
            Stage::Offline => Self::offline(),
        }
    }

    pub fn validate(&self) -> Result<(), ScoringError> {
        let bad = |m: &str| Err(ScoringError::InvalidConfig(m.to_string()));
        if !(self.iou_threshold > 0.0 && self.iou_threshold < self.full_score_iou && self.full_score_iou <= 1.0) {
            return bad("require 0 < iou_threshold < full_score_iou <= 1");
        }
        if !(self.fp_penalty >= 0.0 && self.fp_penalty.is_finite()) {
            return bad("fp_penalty must be a finite non-negative number");
        }
        if !(self.min_area_px >= 0.0 && self.min_area_px.is_finite()) {
            return bad("min_area_px must be a finite non-negative number");
        }
        if !(self.formula_exponent > 0.0 && self.formula_exponent.is_finite()) {
            return bad("formula_exponent must be positive");
        }
        if !self.k.all().iter().all(|v| v.is_finite()) {
            return bad("k coefficients must be finite");
        }
        Ok(())
    }

    /// Read overrides from `key=value` text. A `stage` key selects the base
    /// defaults; otherwise `self` is the base.
    pub fn with_overrides(self, kv: &KvFile) -> Result<Self, ScoringError> {
        kv.restrict(CONFIG_KEYS)?;
        let mut cfg = self;
        if let Some(raw) = kv.raw("stage") {
            let stage: Stage = raw.parse().map_err(|_| kv.invalid("stage"))?;
            cfg = Self::for_stage(stage);
        }
        let set = |slot: &mut f64, key: &str| -> Result<(), KvError> {
            if let Some(v) = kv.get::<f64>(key)? {
                *slot = v;
            }
            Ok(())
        };
        set(&mut cfg.iou_threshold, "iou_threshold")?;
        set(&mut cfg.full_score_iou, "full_score_iou")?;
        set(&mut cfg.formula_exponent, "formula_exponent")?;
        set(&mut cfg.fp_penalty, "fp_penalty")?;
        set(&mut cfg.min_area_px, "min_area_px")?;
        set(&mut cfg.k.k1_exact, "k1_exact")?;
        set(&mut cfg.k.k1_superclass, "k1_superclass")?;
        set(&mut cfg.k.k2_match, "k2_match")?;
        set(&mut cfg.k.k2_mismatch, "k2_mismatch")?;
        set(&mut cfg.k.k2_absent, "k2_absent")?;
        set(&mut cfg.k.k3_match, "k3_match")?;
        set(&mut cfg.k.k3_mismatch, "k3_mismatch")?;
        set(&mut cfg.k.k3_absent, "k3_absent")?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Whether a predicted code may match a ground-truth code in this stage.
    pub fn class_acceptable(&self, pred: &ClassCode, gt: &ClassCode) -> bool {
        match self.stage {
            Stage::Online => pred == gt,
            Stage::Offline => pred.is_same_or_superclass_of(gt),
        }
    }

    /// Largest multiplier any detection can earn on `gt`.
    pub fn max_multiplier(&self, gt: &GroundTruthSign) -> f64 {
        if self.stage == Stage::Online {
            return 1.0;
        }
        let k = &self.k;
        let k1 = if gt.code.level() > 1 { k.k1_exact.max(k.k1_superclass) } else { k.k1_exact };
        // without ground-truth data any non-empty answer is a mismatch
        let k2 = match gt.associated_data {
            Some(_) => k.k2_match.max(k.k2_mismatch).max(k.k2_absent),
            None => k.k2_mismatch.max(k.k2_absent),
        };
        let k3 = k.k3_match.max(k.k3_mismatch).max(k.k3_absent);
        (1.0 + k1 + k2 + k3).max(0.0)
    }
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self::offline()
    }
}

/// Base score of a true positive with the given IoU.
pub fn tp_base_score(iou: f64, cfg: &ScoringConfig) -> Result<f64, ScoringError> {
    if iou.is_nan() || iou < cfg.iou_threshold {
        return Err(ScoringError::BelowThreshold { iou, threshold: cfg.iou_threshold });
    }
    if iou > cfg.full_score_iou {
        return Ok(1.0);
    }
    let x = (iou - cfg.iou_threshold) / (cfg.full_score_iou - cfg.iou_threshold);
    Ok(x.clamp(0.0, 1.0).powf(cfg.formula_exponent))
}

fn normalize_data(s: &str) -> String {
    s.trim().to_lowercase()
}

/// `max(0, 1 + k1 + k2 + k3)` for an accepted detection. Always 1 online.
pub fn k_multiplier(det: &Detection, gt: &GroundTruthSign, cfg: &ScoringConfig) -> f64 {
    if cfg.stage == Stage::Online {
        return 1.0;
    }
    let k = &cfg.k;
    let k1 = if det.best_class() == gt.code { k.k1_exact } else { k.k1_superclass };
    let k2 = match (&det.associated_data, &gt.associated_data) {
        (None, _) => k.k2_absent,
        (Some(d), Some(g)) if normalize_data(d) == normalize_data(g) => k.k2_match,
        (Some(_), _) => k.k2_mismatch,
    };
    let k3 = match det.temporary {
        None => k.k3_absent,
        Some(t) if t == gt.temporary => k.k3_match,
        Some(_) => k.k3_mismatch,
    };
    (1.0 + k1 + k2 + k3).max(0.0)
}
