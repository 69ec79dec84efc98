#![no_main]

use icevision_kit::taxonomy::parse_code;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(code) = parse_code(text) {
        let printed = code.to_string();
        assert_eq!(parse_code(&printed).expect("printed code parses"), code);
        for level in 1..=code.level() {
            let prefix = code.truncate(level).expect("level within depth");
            assert!(prefix.is_same_or_superclass_of(&code));
        }
    }
});
