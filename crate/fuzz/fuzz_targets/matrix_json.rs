#![no_main]

use libfuzzer_sys::fuzz_target;
use multifunc::matrix::{matrix_from_json, matrix_to_json};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(m) = matrix_from_json(text) {
            let back = matrix_from_json(&matrix_to_json(&m).expect("decoded matrices encode")).expect("round-trip");
            assert_eq!(back, m);
        }
    }
});
