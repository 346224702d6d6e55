#![no_main]

use hevf_eval::SyntheticCorpus;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(c) = SyntheticCorpus::from_file_bytes(data) {
        assert_eq!(SyntheticCorpus::from_binary(&c.to_binary()).unwrap(), c);
        let _ = c.genuine_trials();
    }
});
