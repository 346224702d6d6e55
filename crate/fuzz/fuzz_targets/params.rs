#![no_main]

use hevf_core::ckks::validate_params;
use hevf_core::serial::{params_from_bytes, params_to_bytes, peek_header};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = peek_header(data);
    if let Ok(p) = params_from_bytes(data) {
        assert_eq!(params_from_bytes(&params_to_bytes(&p)).unwrap(), p);
        let _ = validate_params(p);
    }
});
