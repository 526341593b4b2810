#![no_main]

use libfuzzer_sys::fuzz_target;
use mtasep::codec::parse_distribution_csv;

// First byte picks the number of classes.
fuzz_target!(|data: &[u8]| {
    let Some((&n, rest)) = data.split_first() else { return };
    let Ok(s) = std::str::from_utf8(rest) else { return };
    let _ = parse_distribution_csv(s, usize::from(n % 8));
});
