#![no_main]

use hevf_protocol::frame::{decode_frame, encode_frame, read_frame};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((frame, used)) = decode_frame(data) {
        assert!(used <= data.len());
        assert_eq!(encode_frame(frame.kind, &frame.payload).unwrap(), data[..used]);
    }
    let mut cursor = data;
    while let Ok(Some(_)) = read_frame(&mut cursor, 1 << 20) {}
});
