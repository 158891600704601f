#![no_main]

use libfuzzer_sys::fuzz_target;
use multifunc::tensor::tensor_from_json;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(t) = tensor_from_json(text) {
            let back = tensor_from_json(&t.to_json().expect("decoded tensors encode")).expect("round-trip");
            assert_eq!(back, t);
            let _ = t.as_matrix();
        }
    }
});
