#![no_main]

use icevision_kit::frames::{convert_raw, CfaPattern, FrameSidecar};
use libfuzzer_sys::fuzz_target;

// first byte picks the settings, the rest is the raw frame
fuzz_target!(|data: &[u8]| {
    let Some((&mode, raw)) = data.split_first() else {
        return;
    };
    let pattern = [CfaPattern::Rggb, CfaPattern::Bggr, CfaPattern::Grbg, CfaPattern::Gbrg][(mode & 3) as usize];
    let crop_keep = (mode & 0x70 != 0).then_some(((mode >> 4) & 7) as usize);
    let sidecar = FrameSidecar { pattern, equalize: mode & 4 != 0, crop_keep };
    if let Ok(rgb) = convert_raw(raw, &sidecar) {
        assert!(rgb.samples.iter().all(|&v| v <= rgb.max_value));
    }
});
