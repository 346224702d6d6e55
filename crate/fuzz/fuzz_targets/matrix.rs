#![no_main]

use hevf_core::linalg::ProjectionMatrix;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(q) = ProjectionMatrix::from_file_bytes(data) {
        assert_eq!(ProjectionMatrix::from_binary(&q.to_binary()).unwrap(), q);
        let _ = q.is_positive_semidefinite();
    }
});
