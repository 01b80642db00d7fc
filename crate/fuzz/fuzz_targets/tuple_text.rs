#![no_main]

use libfuzzer_sys::fuzz_target;
use meanred::textio::{format_points, parse_injection, parse_points};

fuzz_target!(|data: &str| {
    if let Ok(x) = parse_points(data) {
        let again = parse_points(&format_points(&x)).expect("formatted tuple parses");
        assert_eq!(again, x);
    }
    for n in 1..=6 {
        if let Ok(chi) = parse_injection(data, n) {
            assert!(chi.k() <= n);
        }
    }
});
