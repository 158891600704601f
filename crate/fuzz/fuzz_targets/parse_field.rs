#![no_main]

use libfuzzer_sys::fuzz_target;
use multifunc::{Complex64, ScalarField};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(f) = ScalarField::parse(text) {
            // printed fields parse back to the same arity
            let again = ScalarField::parse_with_arity(&f.to_string(), f.arity()).expect("display round-trips");
            assert_eq!(again.arity(), f.arity());
            let point = vec![Complex64::new(0.5, -0.25); f.arity()];
            let _ = f.eval(&point);
        }
    }
});
