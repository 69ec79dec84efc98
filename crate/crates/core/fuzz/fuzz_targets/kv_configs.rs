#![no_main]

use icevision_kit::frames::FrameSidecar;
use icevision_kit::harness::{NoiseModel, ScenarioSpec};
use icevision_kit::kv::KvFile;
use icevision_kit::scoring::ScoringConfig;
use icevision_kit::tracking::TrackerConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = FrameSidecar::parse(text);
    let _ = TrackerConfig::parse(text);
    if let Ok(spec) = ScenarioSpec::parse(text) {
        spec.validate().expect("parsed spec is valid");
    }
    if let Ok(noise) = NoiseModel::parse(text) {
        noise.validate().expect("parsed noise model is valid");
    }
    if let Ok(kv) = KvFile::parse(text) {
        if let Ok(cfg) = ScoringConfig::offline().with_overrides(&kv) {
            cfg.validate().expect("overridden config is valid");
        }
    }
});
