#![no_main]

use hevf_core::ckks::Ciphertext;
use hevf_core::serial::Encodable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let ctx = hevf_fuzz::ctx();
    if let Ok(ct) = Ciphertext::from_bytes(ctx, data) {
        assert_eq!(Ciphertext::from_bytes(ctx, &ct.to_bytes(ctx)).unwrap().to_bytes(ctx), ct.to_bytes(ctx));
    }
});
