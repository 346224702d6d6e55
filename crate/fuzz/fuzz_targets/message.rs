#![no_main]

use hevf_protocol::{EnrollmentRequest, Message};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let ctx = hevf_fuzz::ctx();
    let _ = EnrollmentRequest::peek_params(data);
    if let Ok(msg) = Message::from_bytes(ctx, data) {
        let bytes = msg.to_bytes(ctx);
        let again = Message::from_bytes(ctx, &bytes).unwrap();
        assert_eq!(again.to_bytes(ctx), bytes);
    }
});
