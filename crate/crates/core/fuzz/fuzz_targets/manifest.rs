#![no_main]

use icevision_kit::datastore::parse_manifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(m) = parse_manifest(text, "fuzz") {
        assert!(m.frames.windows(2).all(|w| w[0].0 < w[1].0));
    }
});
