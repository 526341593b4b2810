#![no_main]

use libfuzzer_sys::fuzz_target;
use mtasep::codec::{distribution_to_json, parse_distribution_json};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(d) = parse_distribution_json(s) {
        let again = parse_distribution_json(&distribution_to_json(&d).to_string()).unwrap();
        assert_eq!(again, d);
    }
});
