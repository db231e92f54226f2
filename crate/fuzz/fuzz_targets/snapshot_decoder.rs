#![no_main]

use libfuzzer_sys::fuzz_target;
use vlasov_stokes::snapshot::{decode, encode};

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = decode(data) {
        let bytes = encode(&s).expect("decoded snapshot encodes");
        assert!(decode(&bytes).expect("re-decode").bit_eq(&s));
    }
});
