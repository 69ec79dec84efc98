#![no_main]

use icevision_kit::datastore::{format_tracks, parse_tracks, ReadOptions};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let opts = ReadOptions::default();
    if let Ok(tracks) = parse_tracks(text, "fuzz", &opts) {
        let once = format_tracks(&tracks).expect("parsed tracks format");
        let reparsed = parse_tracks(&once, "fuzz", &opts).expect("formatted tracks parse");
        assert_eq!(format_tracks(&reparsed).unwrap(), once);
    }
});
