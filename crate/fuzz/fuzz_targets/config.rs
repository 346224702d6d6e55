#![no_main]

use hevf_cli::config::{parse_chain_spec, Config};
use hevf_cli::files::parse_vectors;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = Config::from_toml(text) {
        let _ = cfg.params();
        let _ = cfg.checked_plan();
    }
    let _ = parse_chain_spec(text);
    let _ = parse_vectors(text);
});
