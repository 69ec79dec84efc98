#![no_main]

use icevision_kit::datastore::{format_detections, parse_detections, ReadOptions};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let opts = ReadOptions::default();
    if let Ok(dets) = parse_detections(text, "fuzz", &opts) {
        let once = format_detections(dets.values().flatten()).expect("parsed detections format");
        let reparsed = parse_detections(&once, "fuzz", &opts).expect("formatted detections parse");
        assert_eq!(format_detections(reparsed.values().flatten()).unwrap(), once);
    }
});
