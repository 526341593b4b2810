#![no_main]

use libfuzzer_sys::fuzz_target;
use mtasep::codec::{parse_class_list, parse_int_list, parse_rate_list};

fuzz_target!(|data: &[u8]| {
    let Some((&n, rest)) = data.split_first() else { return };
    let Ok(s) = std::str::from_utf8(rest) else { return };
    let _ = parse_int_list(s);
    if let Ok(rates) = parse_rate_list(s) {
        assert!(rates.iter().all(|r| r.is_finite()));
    }
    if let Ok(v) = parse_class_list(s, usize::from(n)) {
        assert!(v.iter().all(|c| c.class_index().map_or(true, |k| k <= usize::from(n))));
    }
});
