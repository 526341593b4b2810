#![no_main]

use libfuzzer_sys::fuzz_target;
use mtasep::codec::{config_to_json, parse_config_json, parse_ring_json};

// Anything that parses must survive a round trip unchanged.
fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(c) = parse_config_json(s) {
        let again = parse_config_json(&config_to_json(&c).to_string()).expect("re-encoded config parses");
        assert_eq!(again, c);
    }
    let _ = parse_ring_json(s);
});
