#![no_main]

use icevision_kit::datastore::{format_annotations, parse_annotations, ReadOptions};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    for permissive in [false, true] {
        let opts = ReadOptions { taxonomy: None, permissive };
        if let Ok(ann) = parse_annotations(text, "fuzz", &opts) {
            let once = format_annotations(&ann).expect("parsed annotations format");
            let reparsed = parse_annotations(&once, "fuzz", &opts).expect("formatted annotations parse");
            assert_eq!(format_annotations(&reparsed).unwrap(), once);
        }
    }
});
