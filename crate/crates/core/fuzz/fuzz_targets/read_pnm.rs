#![no_main]

use icevision_kit::frames::{read_pnm, write_pgm};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = read_pnm(data) {
        let again = read_pnm(&write_pgm(&img)).expect("re-encoded image decodes");
        assert_eq!(img, again);
    }
});
