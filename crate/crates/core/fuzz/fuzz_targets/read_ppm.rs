#![no_main]

use icevision_kit::frames::{read_ppm, write_ppm};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = read_ppm(data) {
        let again = read_ppm(&write_ppm(&img)).expect("re-encoded image decodes");
        assert_eq!(img, again);
    }
});
