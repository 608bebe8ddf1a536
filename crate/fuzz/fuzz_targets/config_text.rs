#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(pairs) = opdet::config::parse_config(text) {
            for (k, _) in &pairs {
                assert!(!k.is_empty());
                assert!(!k.contains('='));
            }
        }
    }
});
