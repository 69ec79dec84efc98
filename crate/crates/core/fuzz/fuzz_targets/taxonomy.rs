#![no_main]

use icevision_kit::Taxonomy;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(tax) = Taxonomy::parse(text) {
        for code in tax.listed() {
            assert!(tax.contains(code));
        }
    }
});
