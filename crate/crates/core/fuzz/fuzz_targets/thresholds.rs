#![no_main]

use icevision_kit::datastore::{format_thresholds, parse_thresholds};
use icevision_kit::refinement::ThresholdGrid;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(thr) = parse_thresholds(text, "fuzz") {
        thr.validate().expect("parsed thresholds are valid");
        let once = format_thresholds(&thr);
        assert_eq!(format_thresholds(&parse_thresholds(&once, "fuzz").unwrap()), once);
    }
    if let Ok(values) = ThresholdGrid::parse_list(text) {
        assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
    }
});
