#![no_main]

use libfuzzer_sys::fuzz_target;
use mtasep::codec::parse_trace_jsonl;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok((events, _)) = parse_trace_jsonl(s) {
        assert!(events.windows(2).all(|w| w[0].t < w[1].t));
    }
});
