#![no_main]

use libfuzzer_sys::fuzz_target;
use mtasep::codec::{multiline_to_json, parse_multiline_json};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(x) = parse_multiline_json(s) {
        let again = parse_multiline_json(&multiline_to_json(&x).to_string()).unwrap();
        assert_eq!(again, x);
    }
});
