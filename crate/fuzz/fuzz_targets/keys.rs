#![no_main]

use hevf_core::ckks::{GaloisKeys, PublicKey, RelinKey, SecretKey};
use hevf_core::serial::Encodable;
use libfuzzer_sys::fuzz_target;

fn roundtrip<T: Encodable>(data: &[u8]) {
    let ctx = hevf_fuzz::ctx();
    if let Ok(v) = T::from_bytes(ctx, data) {
        let bytes = v.to_bytes(ctx);
        assert_eq!(T::from_bytes(ctx, &bytes).unwrap().to_bytes(ctx), bytes);
    }
}

fuzz_target!(|data: &[u8]| {
    roundtrip::<SecretKey>(data);
    roundtrip::<PublicKey>(data);
    roundtrip::<RelinKey>(data);
    roundtrip::<GaloisKeys>(data);
});
